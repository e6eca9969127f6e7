"""Error channels and the sequential electron-shelving readout.

Dephasing is modelled as exponential decay of coherences: element ``(i, j)``
of a single-ion density matrix decays at ``gamma_i + gamma_j`` plus the
laser rate when exactly one of the two levels is the ground level 0 (optical
coherences see the laser phase, Zeeman coherences inside the D manifold do
not).  Per-ion rates add for multi-ion registers.

Readout follows the shelving protocol: a fluorescence detection separates
|0> (bright) from the D manifold (dark); for ``k >= 1`` a transfer pulse
``R_0k(0, pi)`` then maps |k> to |0> and a second detection follows.  A shot
counts towards ``P(|k>)`` when its detection pattern is (dark, bright), or
simply bright for ``k = 0``.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .core import DensityMatrix, as_density_matrix, partial_trace
from .gates import Rotation, rotation_matrix

logger = logging.getLogger(__name__)

# First-order Zeeman shifts of the encoding levels in Hz/uT: |0> = S1/2(m=0),
# |1> = D3/2(m=0), |2> = D3/2(m=+1), |3> = D3/2(m=-1).  The 4.2 MHz splitting at
# 500 uT sets the m=+-1 slope; the m=0 clock pair is treated as insensitive.
ZEEMAN_SENSITIVITY = (0.0, 0.0, 4.2e6 / 500, -4.2e6 / 500)
CLOCK_PAIR_SENSITIVITY = 52.0  # Hz/uT at 500 uT, second order
READOUT_PERIOD = 5e-3  # s per projection + detection
MAX_CROSSTALK = 0.2
SHOT_BLOCK = 8192


@dataclass(frozen=True)
class NoiseModel:
    """Noise knobs.  Rates are in 1/s; ``spam`` is (P(dark | bright), P(bright | dark))."""

    dephasing_rate_per_level: tuple = (0.0, 0.0, 0.0, 0.0)
    laser_dephasing_rate: float = 0.0
    crosstalk_fraction: float = 0.10
    spam: tuple = (0.0, 0.0)
    b_sensitivity: tuple = ZEEMAN_SENSITIVITY
    transfer_error: float = 0.0
    readout_period: float = READOUT_PERIOD

    def __post_init__(self):
        rates = tuple(float(r) for r in self.dephasing_rate_per_level)
        if any(r < 0 for r in rates) or self.laser_dephasing_rate < 0:
            raise ValueError("dephasing rates must be non-negative")
        if not 0 <= self.crosstalk_fraction <= MAX_CROSSTALK:
            raise ValueError(f"crosstalk fraction must lie in [0, {MAX_CROSSTALK}]")
        spam = tuple(float(p) for p in self.spam)
        if len(spam) != 2 or any(not 0 <= p <= 1 for p in spam):
            raise ValueError("spam must be two probabilities in [0, 1]")
        object.__setattr__(self, "dephasing_rate_per_level", rates)
        object.__setattr__(self, "spam", spam)
        object.__setattr__(self, "b_sensitivity", tuple(float(b) for b in self.b_sensitivity))

    @classmethod
    def noiseless(cls):
        return cls(crosstalk_fraction=0.0)

    @classmethod
    def from_field_noise(cls, b_rms_uT, correlation_time, **kwargs):
        """Per-level rates ``(2 pi s_i b_rms)^2 tau_c`` from white-ish magnetic noise."""
        sens = np.asarray(kwargs.get("b_sensitivity", ZEEMAN_SENSITIVITY))
        rates = (2 * np.pi * sens * b_rms_uT) ** 2 * correlation_time
        return cls(dephasing_rate_per_level=tuple(rates), **kwargs)

    def level_rates(self, d: int) -> np.ndarray:
        rates = np.zeros(d)
        r = np.asarray(self.dephasing_rate_per_level)
        rates[: min(d, len(r))] = r[:d]
        return rates

    def coherence_decay_rates(self, d: int) -> np.ndarray:
        """Matrix of decay rates ``Gamma_ij`` for one ion (zero diagonal)."""
        g = self.level_rates(d)
        G = g[:, None] + g[None, :]
        optical = np.zeros((d, d), dtype=bool)
        optical[0, 1:] = optical[1:, 0] = True
        G = G + self.laser_dephasing_rate * optical
        np.fill_diagonal(G, 0.0)
        return G


def register_decay_rates(dims, noise: NoiseModel) -> np.ndarray:
    """Decay rates for every element of a register density matrix."""
    total = np.zeros((1, 1))
    for d in dims:
        G = noise.coherence_decay_rates(d)
        n_prev = total.shape[0]
        total = (total[:, None, :, None] + G[None, :, None, :]).reshape(n_prev * d, n_prev * d)
    return total


def apply_dephasing(rho, noise: NoiseModel, duration: float) -> DensityMatrix:
    """Multiply each coherence by ``exp(-Gamma_ij * duration)``."""
    if duration < 0:
        raise ValueError("duration must be non-negative")
    rho = as_density_matrix(rho)
    G = register_decay_rates(rho.dims, noise)
    return DensityMatrix(rho.dims, rho.elements * np.exp(-G * duration))


def crosstalk_expand(rotation: Rotation, epsilon: float, n_ions: int = 2) -> list[Rotation]:
    """Addressed rotation plus its spill-over ``theta' = epsilon * theta`` on the neighbour."""
    if not 0 <= epsilon <= MAX_CROSSTALK:
        raise ValueError(f"crosstalk fraction must lie in [0, {MAX_CROSSTALK}]")
    out = [rotation]
    if epsilon == 0 or rotation.theta == 0:
        return out
    ion = rotation.ion
    neighbour = ion + 1 if ion + 1 < n_ions else ion - 1
    if neighbour < 0:
        return out
    out.append(Rotation(neighbour, rotation.levels, rotation.phi, epsilon * rotation.theta))
    return out


def _superop_on_target(rho: DensityMatrix, L: np.ndarray, target: int) -> DensityMatrix:
    """Apply a single-qudit superoperator (row-major vec convention) to ``target``."""
    dims = rho.dims
    n = len(dims)
    d = dims[target]
    t = rho.elements.reshape(list(dims) * 2)
    L4 = L.reshape(d, d, d, d)
    t = np.tensordot(L4, t, axes=([2, 3], [target, target + n]))
    # output axes 0, 1 are the new (row, column) indices of the target
    rest = [i for i in range(2 * n) if i not in (target, target + n)]
    t = np.moveaxis(t, [0, 1] + list(range(2, 2 * n)), [target, target + n] + rest)
    m = rho.elements.shape[0]
    out = t.reshape(m, m)
    out = 0.5 * (out + out.conj().T)
    return DensityMatrix(dims, out / np.trace(out).real)


def driven_superoperator(d: int, levels, phi: float, omega: float, noise: NoiseModel, duration: float) -> np.ndarray:
    """Propagator of a resonant drive on ``levels`` with dephasing, as a d^2 x d^2 matrix.

    Without dephasing it reduces to conjugation by ``R_ik(phi, omega * duration)``.
    """
    i, k = levels
    H = np.zeros((d, d), dtype=complex)
    H[i, k] = omega / 2 * np.exp(-1j * phi)
    H[k, i] = omega / 2 * np.exp(1j * phi)
    eye = np.eye(d)
    G = noise.coherence_decay_rates(d)
    L = -1j * (np.kron(H, eye) - np.kron(eye, H.T)) - np.diag(G.reshape(-1))
    return expm(L * duration)


def noisy_pulse(rho, rotation: Rotation, omega_rabi: float, noise: NoiseModel) -> DensityMatrix:
    """Physical pulse on one ion: dephasing during the pulse plus crosstalk on the neighbour.

    The pulse lasts ``|theta| / omega_rabi``; other ions dephase for the same time.
    """
    rho = as_density_matrix(rho)
    duration = abs(rotation.theta) / omega_rabi
    sign = np.sign(rotation.theta) or 1.0
    n_ions = len(rho.dims)
    pulses = crosstalk_expand(rotation, noise.crosstalk_fraction, n_ions)
    driven = {p.ion: p for p in pulses}
    for ion, d in enumerate(rho.dims):
        if ion in driven:
            p = driven[ion]
            omega = sign * omega_rabi * (abs(p.theta) / abs(rotation.theta) if rotation.theta else 1.0)
            L = driven_superoperator(d, p.levels, p.phi, omega, noise, duration)
        else:
            G = noise.coherence_decay_rates(d)
            L = np.diag(np.exp(-G.reshape(-1) * duration))
        rho = _superop_on_target(rho, L, ion)
    return rho


@dataclass
class ShotRecord:
    """Outcomes of one readout experiment.

    ``outcomes`` holds one row per shot and one boolean column per detection
    (True = bright).  ``hits`` counts shots reporting population in
    ``level``.  ``shots == 0`` stores the exact probability in ``exact``.
    """

    experiment: str
    level: int
    shots: int
    seed: int | None
    outcomes: np.ndarray
    hits: int = 0
    ion: int = 0
    exact: float | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.outcomes = np.asarray(self.outcomes, dtype=bool)
        if self.shots and self.outcomes.shape[0] != self.shots:
            raise ValueError("outcome rows must equal the shot count")
        if not 0 <= self.hits <= max(self.shots, 0):
            raise ValueError("hit count exceeds shots")

    @property
    def estimate(self) -> float:
        if self.shots == 0:
            return float(self.exact)
        return self.hits / self.shots

    @property
    def stderr(self) -> float:
        if self.shots == 0:
            return 0.0
        p = self.estimate
        return float(np.sqrt(p * (1 - p) / self.shots))

    def counts(self) -> dict:
        """Shot counts keyed by detection pattern, e.g. ``'DB'`` for (dark, bright)."""
        if self.shots == 0:
            return {}
        codes = ["".join("B" if b else "D" for b in row) for row in self.outcomes]
        keys, n = np.unique(codes, return_counts=True)
        return {str(k): int(c) for k, c in zip(keys, n)}

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "level": self.level,
            "ion": self.ion,
            "shots": self.shots,
            "seed": self.seed,
            "hits": self.hits,
            "exact": self.exact,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "counts": self.counts(),
            "outcomes": ["".join("B" if b else "D" for b in row) for row in self.outcomes],
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> ShotRecord:
        outcomes = np.array([[c == "B" for c in row] for row in data.get("outcomes", [])], dtype=bool)
        if outcomes.size == 0:
            outcomes = np.zeros((0, 0), dtype=bool)
        return cls(
            experiment=data["experiment"],
            level=int(data["level"]),
            shots=int(data["shots"]),
            seed=data.get("seed"),
            outcomes=outcomes,
            hits=int(data.get("hits", 0)),
            ion=int(data.get("ion", 0)),
            exact=data.get("exact"),
            metadata=dict(data.get("metadata", {})),
        )


def make_rng(seed, *key) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``; keys split a master seed into streams."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def sample_categorical(probs, shots: int, seed, key=(), workers: int = 1) -> np.ndarray:
    """Draw ``shots`` outcome indices from ``probs``.

    Shots are produced in fixed-size blocks, each with its own stream derived
    from ``(seed, *key, block)``, so the result does not depend on ``workers``.
    """
    probs = np.clip(np.asarray(probs, dtype=float), 0, None)
    probs = probs / probs.sum()
    n_blocks = -(-shots // SHOT_BLOCK)

    def block(b):
        size = min(SHOT_BLOCK, shots - b * SHOT_BLOCK)
        return make_rng(seed, *key, b).choice(len(probs), size=size, p=probs)

    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(block, range(n_blocks)))
    else:
        parts = [block(b) for b in range(n_blocks)]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=int)


def _flip(bits, spam, rng):
    """Apply detection misassignment: bright -> dark with spam[0], dark -> bright with spam[1]."""
    if spam == (0.0, 0.0):
        return bits
    u = rng.random(bits.shape)
    return np.where(bits, u >= spam[0], u < spam[1])


def _single_ion_rho(state, ion: int) -> DensityMatrix:
    rho = as_density_matrix(state)
    if len(rho.dims) == 1:
        return rho
    return partial_trace(rho, [ion])


def shelving_probabilities(state, level: int, ion: int = 0, noise: NoiseModel | None = None) -> np.ndarray:
    """Ideal-detector probabilities of the detection patterns.

    For ``level == 0`` returns ``[P(D), P(B)]``; otherwise
    ``[P(DD), P(DB), P(BB)]``.  Ions bright in the first detection are pumped
    out of the qudit manifold and keep fluorescing.
    """
    noise = noise or NoiseModel.noiseless()
    rho = _single_ion_rho(state, ion)
    d = rho.dims[0]
    if not 0 <= level < d:
        raise ValueError(f"level {level} out of range for d={d}")
    r = rho.elements
    p0 = float(np.clip(r[0, 0].real, 0, 1))
    if level == 0:
        return np.array([1 - p0, p0])
    if p0 >= 1 - 1e-15:
        return np.array([0.0, 0.0, 1.0])
    proj = r.copy()
    proj[0, :] = 0
    proj[:, 0] = 0
    proj = proj / np.trace(proj).real
    R = rotation_matrix(level, 0.0, np.pi * (1 + noise.transfer_error), d)
    after = R @ proj @ R.conj().T
    q = float(np.clip(after[0, 0].real, 0, 1))
    return np.array([(1 - p0) * (1 - q), (1 - p0) * q, p0])


def shelving_readout(state, level: int, shots: int, rng_seed, noise: NoiseModel | None = None, ion: int = 0, key=()) -> ShotRecord:
    """Simulate the shelving readout of ``P(|level>)`` on one ion.

    ``shots == 0`` returns the exact (spam-free, infinite-shot) value.
    """
    noise = noise or NoiseModel.noiseless()
    probs = shelving_probabilities(state, level, ion, noise)
    meta = {"readout_time": noise.readout_period * (1 if level == 0 else 2)}
    if shots < 0:
        raise ValueError("shots must be non-negative")
    if shots == 0:
        return ShotRecord("shelving", level, 0, rng_seed, np.zeros((0, 1 if level == 0 else 2), dtype=bool),
                          ion=ion, exact=float(probs[-1] if level == 0 else probs[1]), metadata=meta)
    idx = sample_categorical(probs, shots, rng_seed, key)
    if level == 0:
        outcomes = (idx == 1)[:, None]
    else:
        outcomes = np.stack([idx == 2, idx >= 1], axis=1)
    outcomes = _flip(outcomes, noise.spam, make_rng(rng_seed, *key, 2**31 - 1))
    hits = outcomes[:, 0] if level == 0 else (~outcomes[:, 0]) & outcomes[:, 1]
    return ShotRecord("shelving", level, shots, rng_seed, outcomes, int(hits.sum()), ion, metadata=meta)


def camera_readout(state, shots: int, rng_seed, noise: NoiseModel | None = None, key=()) -> ShotRecord:
    """Single fluorescence detection on every ion at once (bright = level 0).

    ``outcomes`` has one column per ion; ``hits`` counts shots with exactly
    one bright ion, i.e. the P01+P10 numerator of a parity measurement.
    """
    noise = noise or NoiseModel.noiseless()
    rho = as_density_matrix(state)
    p = np.clip(np.real(np.diag(rho.elements)), 0, None).reshape(rho.dims)
    n = len(rho.dims)
    # collapse each ion to bright (level 0) / dark (anything else)
    pat = np.zeros([2] * n)
    for idx in np.ndindex(*rho.dims):
        pat[tuple(int(i == 0) for i in idx)] += p[idx]
    flat = pat.reshape(-1)
    if shots == 0:
        exact = float(sum(flat[i] for i in range(2**n) if bin(i).count("1") == 1)) if n == 2 else None
        return ShotRecord("camera", 0, 0, rng_seed, np.zeros((0, n), dtype=bool), exact=exact,
                          metadata={"pattern_probabilities": flat.tolist()})
    draws = sample_categorical(flat, shots, rng_seed, key)
    bits = ((draws[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(bool)
    bits = _flip(bits, noise.spam, make_rng(rng_seed, *key, 2**31 - 1))
    hits = int((bits.sum(axis=1) == 1).sum())
    return ShotRecord("camera", 0, shots, rng_seed, bits, hits, metadata={"ions": n})


def estimate_populations(records, d: int | None = None):
    """Population vector and standard errors from per-level shelving records.

    Exactly one level may be missing and is filled in as the complement; if
    all levels are present the highest one is replaced by its complement so
    that the estimates always sum to one.
    """
    if isinstance(records, dict):
        recs = list(records.values())
    else:
        recs = list(records)
    by_level = {}
    for r in recs:
        if r.level in by_level:
            raise ValueError(f"duplicate record for level {r.level}")
        by_level[r.level] = r
    if d is None:
        # the usual protocol measures d - 1 levels
        d = max(len(by_level) + 1, max(by_level) + 1)
    missing = [k for k in range(d) if k not in by_level]
    if len(missing) > 1:
        raise ValueError(f"records for levels {missing} are missing; at most one level may be inferred")
    omit = missing[0] if missing else d - 1
    p = np.zeros(d)
    var = np.zeros(d)
    for k in range(d):
        if k == omit:
            continue
        p[k] = by_level[k].estimate
        var[k] = by_level[k].stderr ** 2
    p[omit] = 1.0 - math.fsum(p)
    var[omit] = var.sum()
    return p, np.sqrt(var)


def infinite_shot_records(state, d: int, ion: int = 0, noise: NoiseModel | None = None) -> dict:
    return {k: shelving_readout(state, k, 0, None, noise, ion) for k in range(d - 1)}

