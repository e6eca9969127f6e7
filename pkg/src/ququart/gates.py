"""Native gate set of the optical ququart processor.

Single-qudit pulses couple level 0 to one upper level ``k``::

    R_0k(phi, theta) = [[cos(theta/2),               -i e^{-i phi} sin(theta/2)],
                        [-i e^{+i phi} sin(theta/2),   cos(theta/2)            ]]

on ``span{|0>, |k>}`` and identity elsewhere, with ``theta = Omega * tau``.
The entangler is the Molmer-Sorensen gate ``exp(-i chi X01 (x) X01)`` where
``X01 = |0><1| + |1><0|`` is zero on the spectator levels.

Composite rotations between two upper levels ``i`` and ``k`` are built as
``R_0i(0, pi) R_0k(phi - pi/2, theta) R_0i(0, -pi)``.  With that phase shift
the product has exactly the matrix form above on ``span{|i>, |k>}`` (the
``(i, i)`` corner plays the role of ``(0, 0)``) and is the identity on every
other level, including ``|0>``, with no leftover phases.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ValidationError, check_unitary

logger = logging.getLogger(__name__)

DEFAULT_DIM = 4
UNITARY_TOL = 1e-12


@dataclass(frozen=True)
class Rotation:
    """A single-qudit pulse on ``ion`` coupling ``levels = (i, k)``."""

    ion: int
    levels: tuple[int, int]
    phi: float
    theta: float

    def __post_init__(self):
        i, k = (int(x) for x in self.levels)
        if i == k:
            raise ValueError(f"rotation levels must differ, got {self.levels}")
        object.__setattr__(self, "levels", (i, k))

    @property
    def is_native(self) -> bool:
        return self.levels[0] == 0

    def matrix(self, d: int = DEFAULT_DIM) -> np.ndarray:
        return two_level_rotation(self.levels[0], self.levels[1], self.phi, self.theta, d)

    def inverse(self) -> Rotation:
        return Rotation(self.ion, self.levels, self.phi, -self.theta)

    def on_ion(self, ion: int) -> Rotation:
        return Rotation(ion, self.levels, self.phi, self.theta)


@dataclass(frozen=True)
class MSGate:
    """Molmer-Sorensen pulse ``exp(-i chi X01 (x) X01)`` on an ion pair."""

    ions: tuple[int, int] = (0, 1)
    chi: float = np.pi / 4
    levels: tuple[int, int] = (0, 1)

    def __post_init__(self):
        ions = tuple(int(i) for i in self.ions)
        if len(ions) != 2 or ions[0] == ions[1]:
            raise ValueError(f"MS gate needs two distinct ions, got {self.ions}")
        if tuple(self.levels) != (0, 1):
            raise ValueError("only the (0, 1) level pair is supported for MS gates")
        object.__setattr__(self, "ions", ions)
        object.__setattr__(self, "levels", (0, 1))

    def matrix(self, d: int = DEFAULT_DIM) -> np.ndarray:
        return ms_matrix(self.chi, d)

    def inverse(self) -> MSGate:
        return MSGate(self.ions, -self.chi)


def two_level_rotation(i: int, k: int, phi: float, theta: float, d: int = DEFAULT_DIM) -> np.ndarray:
    """Rotation of the native form acting on levels ``i`` (first) and ``k``."""
    if not (0 <= i < d and 0 <= k < d) or i == k:
        raise ValueError(f"invalid level pair ({i}, {k}) for d={d}")
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    U = np.eye(d, dtype=complex)
    U[i, i] = c
    U[k, k] = c
    U[i, k] = -1j * np.exp(-1j * phi) * s
    U[k, i] = -1j * np.exp(1j * phi) * s
    return U


def rotation_matrix(k: int, phi: float, theta: float, d: int = DEFAULT_DIM) -> np.ndarray:
    """Native pulse ``R_0k(phi, theta)`` as a ``d x d`` unitary."""
    if not 1 <= k < d:
        raise ValueError(f"native rotations need 1 <= k < d, got k={k}, d={d}")
    return two_level_rotation(0, k, phi, theta, d)


def x01(d: int = DEFAULT_DIM) -> np.ndarray:
    X = np.zeros((d, d), dtype=complex)
    X[0, 1] = X[1, 0] = 1.0
    return X


def ms_matrix(chi: float, d: int = DEFAULT_DIM) -> np.ndarray:
    """``exp(-i chi X01 (x) X01)`` on two qudits of dimension ``d``.

    ``(X01 (x) X01)^2`` is the projector ``P`` onto ``span{|00>,|01>,|10>,|11>}``,
    so the exponential is ``1 - P + cos(chi) P - i sin(chi) X01 (x) X01``.
    """
    XX = np.kron(x01(d), x01(d))
    P = XX @ XX
    return np.eye(d * d, dtype=complex) - P + np.cos(chi) * P - 1j * np.sin(chi) * XX


def composite_rotation(i: int, k: int, phi: float, theta: float, d: int = DEFAULT_DIM, ion: int = 0) -> list[Rotation]:
    """Native pulse sequence (time order) realizing a rotation between upper levels.

    The product equals ``two_level_rotation(i, k, phi, theta, d)`` exactly.
    """
    if i == k:
        raise ValueError("composite rotation needs two distinct levels")
    if not (1 <= i < d and 1 <= k < d):
        raise ValueError(f"composite rotation levels must be upper levels 1..{d - 1}, got ({i}, {k})")
    return [
        Rotation(ion, (0, i), 0.0, -np.pi),
        Rotation(ion, (0, k), phi - np.pi / 2, theta),
        Rotation(ion, (0, i), 0.0, np.pi),
    ]


def sequence_unitary(pulses: Sequence[Rotation], d: int = DEFAULT_DIM) -> np.ndarray:
    """Product of single-qudit pulses given in time order (ions ignored)."""
    U = np.eye(d, dtype=complex)
    for p in pulses:
        U = p.matrix(d) @ U
    return U


def global_phase_distance(U: np.ndarray, V: np.ndarray) -> float:
    """Frobenius distance between ``U`` and ``V`` after optimal global phase alignment."""
    ov = np.trace(V.conj().T @ U)
    phase = ov / abs(ov) if abs(ov) > 1e-300 else 1.0
    return float(np.linalg.norm(U - phase * V))


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def decompose_single_qudit(U, d: int | None = None, ion: int = 0, return_phase: bool = False, atol: float = 1e-13):
    """Native ``R_0k`` pulse sequence reproducing a single-qudit unitary.

    Uses two-level Givens eliminations routed through level 0, then corrects
    the remaining diagonal phases with pairs of pi pulses.  The pulses are
    returned in time order; their product equals ``U`` up to a global phase,
    which is returned as well when ``return_phase`` is set, such that
    ``U = exp(1j * phase) * sequence_unitary(pulses)``.
    """
    U = check_unitary(U)
    if d is None:
        d = U.shape[0]
    if U.shape != (d, d):
        raise ValidationError(f"expected a {d}x{d} unitary, got shape {U.shape}")

    W = U.copy()
    eliminations: list[Rotation] = []

    def apply(rot):
        nonlocal W
        W = rot.matrix(d) @ W
        eliminations.append(rot)

    for col in range(d - 1, 0, -1):
        # gather all weight of this column into row 0, skipping rows already fixed
        for row in range(1, col):
            a, b = W[0, col], W[row, col]
            if abs(b) <= atol:
                continue
            theta = 2 * np.arctan2(abs(b), abs(a))
            phi = np.angle(b) - np.angle(a) - np.pi / 2 if abs(a) > atol else np.angle(b) - np.pi / 2
            apply(Rotation(ion, (0, row), phi, theta))
        a, b = W[0, col], W[col, col]
        if abs(a) > atol:
            theta = 2 * np.arctan2(abs(a), abs(b))
            phi = np.angle(b) - np.angle(a) + np.pi / 2 if abs(b) > atol else -np.angle(a) + np.pi / 2
            apply(Rotation(ion, (0, col), phi, theta))

    diag = np.diag(W)
    if np.max(np.abs(np.abs(diag) - 1)) > 1e-8:
        raise ValidationError("elimination did not reach a diagonal matrix")
    delta = np.angle(diag)

    # W = G_m ... G_1 U is diagonal, so U = G_1^-1 ... G_m^-1 W.
    # Realize W (up to global phase) first, then the inverted eliminations.
    phase_pulses: list[Rotation] = []
    rel = _wrap(delta[1:] - delta[0])
    if np.max(np.abs(rel)) > 1e-12:
        # A pulse pair R_0k(D, pi) R_0k(0, pi) multiplies |0> by -e^{-iD} and |k> by -e^{iD}.
        # Pick D_k for every k so that the level-k / level-0 phase ratios match W.
        n = d - 1
        t = delta[1:] - delta[0] - np.pi * (n + 1)
        total = t.sum() / (n + 1)
        for k, shift in enumerate(t - total, start=1):
            phase_pulses.append(Rotation(ion, (0, k), 0.0, np.pi))
            phase_pulses.append(Rotation(ion, (0, k), float(_wrap(shift)), np.pi))

    pulses = phase_pulses + [r.inverse() for r in reversed(eliminations)]
    V = sequence_unitary(pulses, d)
    ov = np.trace(V.conj().T @ U)
    phase = float(np.angle(ov))
    err = np.linalg.norm(U - np.exp(1j * phase) * V)
    if err > 1e-8:
        raise ValidationError(f"decomposition residual {err:.3g} exceeds tolerance")
    logger.debug("decomposed %dx%d unitary into %d pulses (residual %.2e)", d, d, len(pulses), err)
    if return_phase:
        return pulses, phase
    return pulses
