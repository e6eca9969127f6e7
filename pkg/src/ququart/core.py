"""Mixed-radix registers of qudits.

Basis states are indexed row-major with ion 0 as the most significant
digit, so for ``dims=[4, 6]`` the state ``|3, 5>`` lives at flat index
``3 * 6 + 5 = 23``.  States are treated as immutable values; every
operation returns a new object.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

VALIDATION_TOL = 1e-10
MIN_DIM = 2
MAX_DIM = 6


class DimensionError(ValueError):
    """Raised when levels, dimensions or operator shapes do not match."""


class ValidationError(ValueError):
    """Raised when an input fails a physical validity check."""


def _check_dims(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise DimensionError("a register needs at least one qudit")
    for d in dims:
        if not MIN_DIM <= d <= MAX_DIM:
            raise DimensionError(f"qudit dimension {d} outside [{MIN_DIM}, {MAX_DIM}]")
    return dims


def flat_index(dims: Sequence[int], levels: Sequence[int]) -> int:
    """Row-major mixed-radix index of a basis state."""
    dims = _check_dims(dims)
    if len(levels) != len(dims):
        raise DimensionError(f"expected {len(dims)} levels, got {len(levels)}")
    idx = 0
    for d, lev in zip(dims, levels):
        if not 0 <= lev < d:
            raise DimensionError(f"level {lev} out of range for dimension {d}")
        idx = idx * d + int(lev)
    return idx


def unflatten_index(dims: Sequence[int], index: int) -> tuple[int, ...]:
    levels = []
    for d in reversed(dims):
        index, r = divmod(index, d)
        levels.append(r)
    return tuple(reversed(levels))


@dataclass(frozen=True, eq=False)
class QuditState:
    """Pure state of a register.  ``amplitudes`` has length ``prod(dims)``."""

    dims: tuple[int, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        dims = _check_dims(self.dims)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != int(np.prod(dims)):
            raise DimensionError(
                f"{amps.size} amplitudes do not fit dims {dims} (need {int(np.prod(dims))})"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > VALIDATION_TOL:
            raise ValidationError(f"state norm {norm:.12g} differs from 1")
        amps.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_vector(cls, dims, vector, normalize=False):
        v = np.asarray(vector, dtype=complex).reshape(-1)
        if normalize:
            v = v / np.linalg.norm(v)
        return cls(tuple(dims), v)

    @property
    def n_qudits(self) -> int:
        return len(self.dims)

    def to_density_matrix(self) -> DensityMatrix:
        v = self.amplitudes
        return DensityMatrix(self.dims, np.outer(v, v.conj()))

    def __repr__(self):
        return f"QuditState(dims={self.dims}, amplitudes={np.array2string(self.amplitudes, precision=4)})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Mixed state of a register; ``elements`` is ``prod(dims)`` square."""

    dims: tuple[int, ...]
    elements: np.ndarray

    def __post_init__(self):
        dims = _check_dims(self.dims)
        rho = np.array(self.elements, dtype=complex)
        n = int(np.prod(dims))
        if rho.shape != (n, n):
            raise DimensionError(f"density matrix shape {rho.shape} does not fit dims {dims}")
        if np.max(np.abs(rho - rho.conj().T)) > VALIDATION_TOL:
            raise ValidationError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > VALIDATION_TOL:
            raise ValidationError(f"density matrix trace {tr:.12g} differs from 1")
        if np.linalg.eigvalsh(rho).min() < -1e-9:
            raise ValidationError("density matrix has negative eigenvalues")
        rho.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "elements", rho)

    @classmethod
    def maximally_mixed(cls, dims):
        n = int(np.prod(dims))
        return cls(tuple(dims), np.eye(n) / n)

    @property
    def n_qudits(self) -> int:
        return len(self.dims)

    def purity(self) -> float:
        rho = self.elements
        return float(np.real(np.vdot(rho, rho)))

    def to_density_matrix(self) -> DensityMatrix:
        return self

    def __repr__(self):
        return f"DensityMatrix(dims={self.dims})"


def as_density_matrix(state) -> DensityMatrix:
    return state.to_density_matrix()


def basis_state(dims: Sequence[int], levels: Sequence[int]) -> QuditState:
    """Computational basis state ``|levels>`` of a register with ``dims``."""
    dims = _check_dims(dims)
    amps = np.zeros(int(np.prod(dims)), dtype=complex)
    amps[flat_index(dims, levels)] = 1.0
    return QuditState(dims, amps)


def check_unitary(U: np.ndarray, tol: float = VALIDATION_TOL) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise DimensionError(f"operator must be square, got shape {U.shape}")
    err = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))
    if err > tol:
        raise ValidationError(f"operator is not unitary (max deviation {err:.3g})")
    return U


def _check_targets(dims, targets):
    targets = [int(t) for t in np.atleast_1d(targets)]
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate targets {targets}")
    for t in targets:
        if not 0 <= t < len(dims):
            raise DimensionError(f"target {t} out of range for {len(dims)} qudits")
    return targets


def apply_operator_to_vector(vec, dims, U, targets):
    """Apply ``U`` on ``targets`` of a flat vector without building the full operator."""
    n = len(dims)
    psi = vec.reshape(dims)
    k = len(targets)
    sub = [dims[t] for t in targets]
    Ut = U.reshape(sub + sub)
    psi = np.tensordot(Ut, psi, axes=(list(range(k, 2 * k)), targets))
    # tensordot puts the contracted output axes first; restore the original order
    rest = [i for i in range(n) if i not in targets]
    order = list(targets) + rest
    psi = np.moveaxis(psi, list(range(n)), order)
    return psi.reshape(-1)


def apply_unitary(state, U, targets):
    """Apply unitary ``U`` to the qudits listed in ``targets``.

    ``U`` is ordered like the register itself: the first target is the most
    significant digit of ``U``'s row index.  Works for both pure states and
    density matrices.
    """
    dims = state.dims
    targets = _check_targets(dims, targets)
    side = int(np.prod([dims[t] for t in targets]))
    U = check_unitary(U)
    if U.shape[0] != side:
        raise DimensionError(f"operator side {U.shape[0]} does not match targets of total dimension {side}")

    if isinstance(state, QuditState):
        out = apply_operator_to_vector(state.amplitudes, dims, U, targets)
        out = out / np.linalg.norm(out)
        return QuditState(dims, out)

    rho = state.elements
    n = rho.shape[0]
    # U rho U^dag as U (x) U* on the doubled register (row digits, then column digits)
    doubled = tuple(dims) + tuple(dims)
    v = apply_operator_to_vector(rho.reshape(-1), doubled, U, targets)
    v = apply_operator_to_vector(v, doubled, U.conj(), [t + len(dims) for t in targets])
    out = v.reshape(n, n)
    out = 0.5 * (out + out.conj().T)
    return DensityMatrix(dims, out)


def embed_operator(dims, U, targets) -> np.ndarray:
    """Full-register matrix of ``U`` acting on ``targets`` (identity elsewhere)."""
    dims = _check_dims(dims)
    targets = _check_targets(dims, targets)
    n = int(np.prod(dims))
    eye = np.eye(n, dtype=complex)
    cols = [apply_operator_to_vector(eye[:, j], dims, np.asarray(U, dtype=complex), targets) for j in range(n)]
    return np.stack(cols, axis=1)


def populations(state) -> np.ndarray:
    """Exact basis-state probabilities in flat-index order."""
    if isinstance(state, QuditState):
        p = np.abs(state.amplitudes) ** 2
    else:
        p = np.clip(np.real(np.diag(state.elements)), 0.0, None)
    return p / p.sum()


def marginal_populations(state, qudit: int) -> np.ndarray:
    """Level populations of a single qudit."""
    p = populations(state).reshape(state.dims)
    axes = tuple(i for i in range(len(state.dims)) if i != qudit)
    return p.sum(axis=axes) if axes else p


def partial_trace(rho, keep) -> DensityMatrix:
    """Reduce ``rho`` to the subsystems listed in ``keep`` (kept in ascending order)."""
    rho = as_density_matrix(rho)
    keep = sorted(int(k) for k in np.atleast_1d(keep))
    if not keep:
        raise ValueError("keep must name at least one subsystem")
    dims = rho.dims
    n = len(dims)
    for k in keep:
        if not 0 <= k < n:
            raise DimensionError(f"subsystem {k} out of range for {n} qudits")
    if len(set(keep)) != len(keep):
        raise ValueError(f"duplicate subsystems in keep={keep}")
    t = rho.elements.reshape(list(dims) * 2)
    # einsum labels: row indices then column indices, traced ones shared
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[i] for i in range(n)]
    col = [letters[n + i] if i in keep else letters[i] for i in range(n)]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    red = np.einsum("".join(row + col) + "->" + "".join(out), t)
    kd = [dims[i] for i in keep]
    m = int(np.prod(kd))
    red = red.reshape(m, m)
    red = 0.5 * (red + red.conj().T)
    return DensityMatrix(tuple(kd), red / np.trace(red).real)


def tensor(*states):
    """Tensor product of states (pure if all inputs are pure)."""
    dims = sum((tuple(s.dims) for s in states), ())
    if all(isinstance(s, QuditState) for s in states):
        v = np.array([1.0 + 0j])
        for s in states:
            v = np.kron(v, s.amplitudes)
        return QuditState(dims, v)
    r = np.array([[1.0 + 0j]])
    for s in states:
        r = np.kron(r, as_density_matrix(s).elements)
    return DensityMatrix(dims, r)


def fidelity(state, target: QuditState) -> float:
    """Overlap ``<target|rho|target>`` with a pure target (global phase ignored)."""
    t = target.amplitudes
    if isinstance(state, QuditState):
        return float(abs(np.vdot(t, state.amplitudes)) ** 2)
    return float(np.real(t.conj() @ state.elements @ t))


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    # rounding leaves eigenvalues of order 1e-17 whose square roots would dominate the error
    w = np.where(w > 1e-13, w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def state_fidelity(a, b) -> float:
    """Uhlmann fidelity ``(tr |sqrt(a) sqrt(b)|)^2`` between two states."""
    ra, rb = as_density_matrix(a), as_density_matrix(b)
    if ra.dims != rb.dims:
        raise DimensionError(f"register mismatch {ra.dims} vs {rb.dims}")
    sv = np.linalg.svd(_psd_sqrt(ra.elements) @ _psd_sqrt(rb.elements), compute_uv=False)
    return float(np.sum(sv) ** 2)
