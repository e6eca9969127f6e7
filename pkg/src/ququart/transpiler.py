"""Compile qubit circuits onto ququarts using only native pulses.

Each ion holds two qubits.  Qubit ``2 j`` is the high bit and qubit
``2 j + 1`` the low bit of ion ``j``, so the ququart level is
``2 q_high + q_low``.  With ion 0 the most significant register digit the
flat 16-dim ququart index coincides with the big-endian 4-qubit index, and
the encoding is the identity on state vectors.

Gates on qubits of one ion become a single 4x4 unitary decomposed into
``R_0k`` pulses.  A controlled-Z across ions is built from

    XX(pi) = exp(-i pi X01 (x) X01) = 1 - 2 P_A P_B

(``P`` projects on levels {0, 1}), emitted as four native ``XX(pi/4)``
pulses, between level permutations that move the levels where the involved
qubit is 1 into {0, 1}.  The permutation is undone afterwards, so the net
action is ``-1`` exactly when both qubits are 1.  CNOT adds Hadamards on the
target.  Every inter-ion gate is checked against its 16x16 target before it
is emitted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import ValidationError, embed_operator
from .gates import MSGate, Rotation, decompose_single_qudit, global_phase_distance, ms_matrix
from .ms import TAU_MS_PAPER

SUPPORTED_GATES = ("rx", "ry", "rz", "h", "cz", "cnot")
QUBITS_PER_ION = 2
D = 4
INTER_ION_TOL = 1e-8
EQUIVALENCE_TOL = 1e-7
DEFAULT_OMEGA = 2 * np.pi * 25e3
# worst cases: 12 pulses for a 4x4 decomposition; CZ = 2 * 3 permutation
# pulses per ion + 4 MS; CNOT adds two Hadamard decompositions
MAX_NATIVE_OPS = {"rx": 12, "ry": 12, "rz": 12, "h": 12, "cz": 16, "cnot": 40, "intra": 12}
NATIVE_FORMAT = "ququart-native-circuit/1"
QUBIT_FORMAT = "qubit-circuit/1"


class TranspileError(RuntimeError):
    """Raised when an emitted native sequence fails verification."""


@dataclass(frozen=True)
class QubitGate:
    name: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        name = self.name.lower()
        if name not in SUPPORTED_GATES:
            raise ValueError(f"unsupported gate {self.name!r}; supported: {', '.join(SUPPORTED_GATES)}")
        qubits = tuple(int(q) for q in self.qubits)
        arity = 1 if name in ("rx", "ry", "rz", "h") else 2
        if len(qubits) != arity or len(set(qubits)) != arity:
            raise ValueError(f"gate {name} needs {arity} distinct qubit(s), got {self.qubits}")
        if name in ("rx", "ry", "rz"):
            if self.angle is None or not math.isfinite(self.angle):
                raise ValueError(f"gate {name} needs a finite angle")
            angle = float(self.angle)
        else:
            angle = None
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "angle", angle)

    def matrix(self) -> np.ndarray:
        """Unitary in the gate's own qubit order (first listed qubit most significant)."""
        if self.name in ("rx", "ry", "rz"):
            return _pauli_rotation(self.name[1], self.angle)
        if self.name == "h":
            return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
        if self.name == "cz":
            return np.diag([1, 1, 1, -1]).astype(complex)
        return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)

    def to_dict(self) -> dict:
        out = {"gate": self.name, "qubits": list(self.qubits)}
        if self.angle is not None:
            out["angle"] = self.angle
        return out


_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.diag([1, -1]).astype(complex),
}


def _pauli_rotation(axis, angle):
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * _PAULI[axis]


@dataclass
class QubitCircuit:
    n_qubits: int
    gates: list[QubitGate] = field(default_factory=list)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= 2 * QUBITS_PER_ION:
            raise ValueError(f"n_qubits must be in 1..{2 * QUBITS_PER_ION} (two ions), got {self.n_qubits}")
        self.gates = [g if isinstance(g, QubitGate) else QubitGate(**g) for g in self.gates]
        for g in self.gates:
            if max(g.qubits) >= self.n_qubits or min(g.qubits) < 0:
                raise ValueError(f"gate {g.name} on qubits {g.qubits} outside 0..{self.n_qubits - 1}")

    @property
    def n_ions(self) -> int:
        return (self.n_qubits + 1) // QUBITS_PER_ION

    def add(self, name, *qubits, angle=None) -> QubitCircuit:
        g = QubitGate(name, qubits, angle)
        if max(g.qubits) >= self.n_qubits:
            raise ValueError(f"qubit index out of range for {self.n_qubits} qubits")
        self.gates.append(g)
        return self

    def to_dict(self) -> dict:
        return {"format": QUBIT_FORMAT, "n_qubits": self.n_qubits, "gates": [g.to_dict() for g in self.gates]}


@dataclass
class QuditCircuit:
    n_ions: int
    ops: list = field(default_factory=list)
    encoding: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def validate(self) -> None:
        """Native-set closure: only ``R_0k`` pulses and ``XX_01(pi/4)`` on the ion pair."""
        for n, op in enumerate(self.ops):
            if isinstance(op, Rotation):
                if op.levels[0] != 0 or not 1 <= op.levels[1] < D or not 0 <= op.ion < self.n_ions:
                    raise ValidationError(f"op {n}: non-native rotation {op}")
            elif isinstance(op, MSGate):
                if op.ions != (0, 1) or abs(op.chi - np.pi / 4) > 1e-15 or self.n_ions != 2:
                    raise ValidationError(f"op {n}: non-native MS gate {op}")
            else:
                raise ValidationError(f"op {n}: unknown op type {type(op).__name__}")

    def to_dict(self) -> dict:
        ops = []
        for op in self.ops:
            if isinstance(op, Rotation):
                ops.append({"op": "R", "ion": op.ion, "levels": list(op.levels), "phi": float(op.phi),
                            "theta": float(op.theta)})
            else:
                ops.append({"op": "MS", "ions": list(op.ions), "chi": float(op.chi)})
        return {"format": NATIVE_FORMAT, "n_ions": self.n_ions, "encoding": self.encoding, "ops": ops,
                "metadata": self.metadata}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> QuditCircuit:
        ops = []
        for o in data["ops"]:
            if o["op"] == "R":
                ops.append(Rotation(o["ion"], tuple(o["levels"]), o["phi"], o["theta"]))
            else:
                ops.append(MSGate(tuple(o["ions"]), o["chi"]))
        return cls(data["n_ions"], ops, data.get("encoding", {}), data.get("metadata", {}))


def qubit_location(q: int) -> tuple[int, int]:
    """``(ion, bit)`` of a global qubit; bit 1 is the high bit of the level."""
    return q // QUBITS_PER_ION, 1 - q % QUBITS_PER_ION


def encode_map(qubit_pair=(0, 1)) -> dict:
    """Level assigned to each two-qubit basis state ``|q_high q_low>`` of one ion."""
    hi, lo = qubit_pair
    if hi // QUBITS_PER_ION != lo // QUBITS_PER_ION or hi == lo:
        raise ValueError(f"qubits {qubit_pair} do not share an ion")
    return {f"{a}{b}": 2 * a + b for a in (0, 1) for b in (0, 1)}


def encoding_metadata(n_ions: int) -> dict:
    return {
        "levels": encode_map(),
        "qubits": {str(q): {"ion": q // 2, "bit": "high" if q % 2 == 0 else "low"} for q in range(2 * n_ions)},
        "rule": "level = 2*q_high + q_low; qubit 2j is the high bit of ion j",
    }


def _ion_unitary(gate: QubitGate) -> np.ndarray:
    """4x4 action of a gate whose qubits all sit on one ion."""
    bits = [qubit_location(q)[1] for q in gate.qubits]
    if len(bits) == 1:
        U = gate.matrix()
        return np.kron(U, np.eye(2)) if bits[0] == 1 else np.kron(np.eye(2), U)
    U = gate.matrix()
    if bits == [1, 0]:
        return U
    swap = np.eye(4)[[0, 2, 1, 3]]
    return swap @ U @ swap


def transpile_intra(gate: QubitGate) -> list[Rotation]:
    """Native pulses for a gate acting within one ion."""
    ions = {qubit_location(q)[0] for q in gate.qubits}
    if len(ions) != 1:
        raise ValueError(f"gate {gate.name} on {gate.qubits} spans several ions")
    ion = ions.pop()
    return decompose_single_qudit(_ion_unitary(gate), D, ion=ion)


# pulses (time order) moving the levels where the given bit is 1 into {0, 1}
_BIT_PERMUTATION = {
    0: [(3, 0.0, np.pi)],
    1: [(2, 0.0, np.pi), (1, 0.0, np.pi), (3, 0.0, np.pi)],
}


def _permutation(ion: int, bit: int) -> list[Rotation]:
    return [Rotation(ion, (0, k), phi, theta) for k, phi, theta in _BIT_PERMUTATION[bit]]


def native_unitary(ops, n_ions: int = 2) -> np.ndarray:
    dims = [D] * n_ions
    U = np.eye(D**n_ions, dtype=complex)
    for op in ops:
        if isinstance(op, Rotation):
            U = embed_operator(dims, op.matrix(D), [op.ion]) @ U
        else:
            U = embed_operator(dims, ms_matrix(op.chi, D), list(op.ions)) @ U
    return U


def qubit_unitary(gates, n_qubits: int) -> np.ndarray:
    """Reference unitary of qubit gates, qubit 0 most significant."""
    U = np.eye(2**n_qubits, dtype=complex)
    for g in gates:
        U = embed_operator([2] * n_qubits, g.matrix(), list(g.qubits)) @ U
    return U


def _controlled_z(qa: int, qb: int) -> list:
    (ia, ba), (ib, bb) = qubit_location(qa), qubit_location(qb)
    pre = _permutation(ia, ba) + _permutation(ib, bb)
    post = [r.inverse() for r in reversed(pre)]
    return pre + [MSGate((0, 1), np.pi / 4) for _ in range(4)] + post


def transpile_inter(gate: QubitGate) -> list:
    """Native ops for a CZ or CNOT whose qubits sit on different ions; verified on all 16 basis states."""
    if gate.name not in ("cz", "cnot"):
        raise ValueError(f"inter-ion gates must be cz or cnot, got {gate.name}")
    a, b = gate.qubits
    if qubit_location(a)[0] == qubit_location(b)[0]:
        raise ValueError(f"qubits {gate.qubits} sit on the same ion")
    ops = _controlled_z(a, b)
    if gate.name == "cnot":
        h = transpile_intra(QubitGate("h", (b,)))
        ops = h + ops + h
    target = qubit_unitary([gate], 4)
    err = global_phase_distance(native_unitary(ops, 2), target)
    if err > INTER_ION_TOL:
        raise TranspileError(f"inter-ion {gate.name} on {gate.qubits} failed verification (residual {err:.3g})")
    return ops


def _wall_time(ops, omega_rabi: float, tau_ms: float) -> float:
    t = 0.0
    for op in ops:
        t += abs(op.theta) / omega_rabi if isinstance(op, Rotation) else tau_ms
    return t


def transpile_circuit(circuit: QubitCircuit, omega_rabi: float = DEFAULT_OMEGA, tau_ms: float = TAU_MS_PAPER,
                      verify: bool = True) -> QuditCircuit:
    """Compile a qubit circuit (up to four qubits) into native ququart ops."""
    n_ions = circuit.n_ions
    ops: list = []
    per_gate = []
    for g in circuit.gates:
        ions = {qubit_location(q)[0] for q in g.qubits}
        new = transpile_intra(g) if len(ions) == 1 else transpile_inter(g)
        ceiling = MAX_NATIVE_OPS[g.name if len(ions) == 1 and len(g.qubits) == 1 else ("intra" if len(ions) == 1 else g.name)]
        if len(new) > ceiling:
            raise TranspileError(f"gate {g.name} produced {len(new)} ops, above the ceiling {ceiling}")
        per_gate.append(len(new))
        ops.extend(new)
    out = QuditCircuit(n_ions, ops, encoding_metadata(n_ions))
    out.validate()
    residual = equivalence_residual(circuit, out) if verify else None
    if residual is not None and residual > EQUIVALENCE_TOL:
        raise TranspileError(f"transpiled circuit differs from the input (residual {residual:.3g})")
    out.metadata = {
        "native_op_count": len(ops),
        "rotation_count": sum(isinstance(o, Rotation) for o in ops),
        "ms_count": sum(isinstance(o, MSGate) for o in ops),
        "ops_per_gate": per_gate,
        "omega_rabi": float(omega_rabi),
        "tau_ms": float(tau_ms),
        "wall_time": _wall_time(ops, omega_rabi, tau_ms),
        "residual": residual,
    }
    return out


def _padded_reference(circuit: QubitCircuit) -> np.ndarray:
    return qubit_unitary(circuit.gates, 2 * circuit.n_ions)


def equivalence_residual(circuit: QubitCircuit, native: QuditCircuit) -> float:
    """Frobenius distance (global phase removed) between the native and the encoded qubit unitary."""
    return global_phase_distance(native_unitary(native.ops, native.n_ions), _padded_reference(circuit))


def simulate(native: QuditCircuit, state=None) -> np.ndarray:
    """Final state vector of a native circuit (default input ``|0...0>``)."""
    dim = D**native.n_ions
    if state is None:
        state = np.zeros(dim, dtype=complex)
        state[0] = 1.0
    return native_unitary(native.ops, native.n_ions) @ np.asarray(state, dtype=complex)


def ghz_circuit(n_qubits: int = 4) -> QubitCircuit:
    c = QubitCircuit(n_qubits)
    c.add("h", 0)
    for q in range(n_qubits - 1):
        c.add("cnot", q, q + 1)
    return c


def random_circuit(n_qubits: int, depth: int, rng) -> QubitCircuit:
    rng = np.random.default_rng(rng)
    c = QubitCircuit(n_qubits)
    for _ in range(depth):
        kind = rng.choice(["rx", "ry", "rz", "h", "cz", "cnot"] if n_qubits > 1 else ["rx", "ry", "rz", "h"])
        if kind in ("cz", "cnot"):
            a, b = rng.choice(n_qubits, 2, replace=False)
            c.add(str(kind), int(a), int(b))
        elif kind == "h":
            c.add("h", int(rng.integers(n_qubits)))
        else:
            c.add(str(kind), int(rng.integers(n_qubits)), angle=float(rng.uniform(-np.pi, np.pi)))
    return c
