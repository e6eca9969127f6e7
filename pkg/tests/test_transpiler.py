import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ququart.core import ValidationError
from ququart.gates import MSGate, Rotation, global_phase_distance, sequence_unitary
from ququart.transpiler import (
    MAX_NATIVE_OPS,
    QubitCircuit,
    QubitGate,
    QuditCircuit,
    encode_map,
    equivalence_residual,
    ghz_circuit,
    native_unitary,
    qubit_unitary,
    random_circuit,
    simulate,
    transpile_circuit,
    transpile_inter,
    transpile_intra,
)


def test_encoding_map():
    m = encode_map((0, 1))
    assert m == {"00": 0, "01": 1, "10": 2, "11": 3}
    with pytest.raises(ValueError):
        encode_map((1, 2))


def test_identity_gate_gives_empty_sequence():
    assert transpile_intra(QubitGate("rz", (0,), 0.0)) == []
    assert transpile_circuit(QubitCircuit(4)).ops == []


def test_intra_ion_cz_is_diagonal_phase():
    pulses = transpile_intra(QubitGate("cz", (0, 1)))
    U = sequence_unitary(pulses)
    assert global_phase_distance(U, np.diag([1, 1, 1, -1])) < 1e-8


def test_intra_ion_cnot_swaps_upper_levels():
    U = sequence_unitary(transpile_intra(QubitGate("cnot", (0, 1))))
    assert global_phase_distance(U, np.eye(4)[[0, 1, 3, 2]]) < 1e-8
    # control on the low bit, target on the high bit swaps levels 1 and 3
    U = sequence_unitary(transpile_intra(QubitGate("cnot", (1, 0))))
    assert global_phase_distance(U, np.eye(4)[[0, 3, 2, 1]]) < 1e-8


@pytest.mark.parametrize("a,b", [(0, 2), (0, 3), (1, 2), (1, 3), (3, 0), (2, 1)])
@pytest.mark.parametrize("name", ["cz", "cnot"])
def test_inter_ion_gates_full_action(name, a, b):
    ops = transpile_inter(QubitGate(name, (a, b)))
    assert sum(isinstance(o, MSGate) for o in ops) == 4
    target = qubit_unitary([QubitGate(name, (a, b))], 4)
    assert global_phase_distance(native_unitary(ops), target) < 1e-8


def test_two_cnots_cancel():
    c = QubitCircuit(4).add("cnot", 1, 2).add("cnot", 1, 2)
    U = native_unitary(transpile_circuit(c).ops)
    assert global_phase_distance(U, np.eye(16)) < 1e-8


def test_inter_gate_rejects_same_ion():
    with pytest.raises(ValueError):
        transpile_inter(QubitGate("cz", (0, 1)))


def test_unsupported_gate_lists_supported_set():
    with pytest.raises(ValueError, match="supported: rx, ry, rz, h, cz, cnot"):
        QubitGate("toffoli", (0, 1, 2))


def test_circuit_validation():
    with pytest.raises(ValueError):
        QubitCircuit(5)
    with pytest.raises(ValueError):
        QubitCircuit(2).add("h", 2)
    with pytest.raises(ValueError):
        QubitGate("rx", (0,), float("nan"))


def test_native_closure_validation():
    QuditCircuit(2, [Rotation(0, (0, 2), 0, 1), MSGate()]).validate()
    with pytest.raises(ValidationError):
        QuditCircuit(2, [Rotation(0, (1, 2), 0, 1)]).validate()
    with pytest.raises(ValidationError):
        QuditCircuit(2, [MSGate(chi=np.pi / 2)]).validate()


def test_ghz_end_to_end():
    native = transpile_circuit(ghz_circuit())
    psi = simulate(native)
    ghz = np.zeros(16, dtype=complex)
    ghz[0] = ghz[15] = 1 / np.sqrt(2)
    assert abs(np.vdot(ghz, psi)) ** 2 >= 1 - 1e-7
    meta = native.metadata
    assert meta["native_op_count"] == len(native.ops) == meta["rotation_count"] + meta["ms_count"]
    assert meta["wall_time"] > meta["ms_count"] * meta["tau_ms"]


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10), st.integers(0, 2**32 - 1))
def test_random_circuits_equivalent(n_qubits, depth, seed):
    c = random_circuit(n_qubits, depth, seed)
    native = transpile_circuit(c)
    assert native.metadata["residual"] <= 1e-7
    assert all(n <= max(MAX_NATIVE_OPS.values()) for n in native.metadata["ops_per_gate"])


def test_three_qubit_circuit_pads_fourth_qubit():
    c = QubitCircuit(3).add("h", 2).add("cnot", 2, 0)
    native = transpile_circuit(c)
    assert native.n_ions == 2
    assert equivalence_residual(c, native) < 1e-8


def test_single_ion_circuit():
    c = QubitCircuit(2).add("h", 0).add("cnot", 0, 1)
    native = transpile_circuit(c)
    assert native.n_ions == 1
    assert not any(isinstance(o, MSGate) for o in native.ops)


def test_serialization_is_deterministic_and_round_trips():
    a = transpile_circuit(ghz_circuit()).to_json()
    b = transpile_circuit(ghz_circuit()).to_json()
    assert a == b
    import json

    back = QuditCircuit.from_dict(json.loads(a))
    assert global_phase_distance(native_unitary(back.ops), qubit_unitary(ghz_circuit().gates, 4)) < 1e-8
