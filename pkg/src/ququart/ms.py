"""Spin-motion dynamics of the bichromatic Molmer-Sorensen drive.

Model
-----
Two ions share one motional mode (the axial stretch mode).  In the
interaction picture, to first order in the Lamb-Dicke parameter and after
the rotating-wave approximation, the drive tuned to ``omega_01 +- (omega_m + delta)``
gives::

    H(t) = g * S (x) (a e^{+i delta t} + a^dag e^{-i delta t}),
    S = X01_A + X01_B,     g = eta * Omega / 2.

``S`` only couples levels |0> and |1>, so the spectator levels |2>, |3>
never move.  The propagator is exact in closed form::

    U(t) = D(alpha(t) S) exp(-i Phi(t) S^2),
    alpha(t) = g (e^{-i delta t} - 1) / delta,
    Phi(t)   = g^2 (t / delta - sin(delta t) / delta^2).

Because ``S^2 = P_A + P_B + 2 X01_A X01_B`` (``P`` projects onto levels
{0, 1}), at loop closure ``delta t = 2 pi`` the spin part is
``exp(-i chi X01 (x) X01)`` with ``chi = 2 Phi = 4 pi g^2 / delta^2``, times the
local phases ``exp(-i chi/2 (P_A + P_B))``.  ``chi = pi/4`` therefore needs
``eta * Omega = delta / 2``.  In ordinary frequency units this is
``tau = 1 / (delta / 2 pi)`` and ``1 / tau = eta * Omega / pi``.

Thermal dependence
------------------
The first-order model is blind to the phonon number.  To next order the
sideband couplings carry Debye-Waller factors, which rescale the two-photon
coupling seen by Fock state ``n`` to ``g_n = g * sqrt(w_n)`` with::

    r_n = exp(-eta^2 / 2) L_n^(1)(eta^2) / (n + 1)
    w_n = (n + 1) r_n^2 - n r_{n-1}^2       (~ 1 - eta^2 (2n + 1))

Each initial Fock component evolves under ``H`` with its own ``g_n``
(occupation labels are frozen for the duration of the pulse).  This keeps
the evolution exactly solvable, and the oracle integrator uses the same
per-component couplings, so the two routes check each other.  Set
``debye_waller=False`` for the plain Lamb-Dicke model.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import eval_genlaguerre, gammaln

from .core import DensityMatrix, QuditState, as_density_matrix
from .gates import x01

logger = logging.getLogger(__name__)

TWO_PI = 2 * np.pi
STRETCH_MODE_FREQ = TWO_PI * 809e3  # rad/s
TRAP_FREQS = (TWO_PI * 1520e3, TWO_PI * 1500e3, TWO_PI * 467e3)  # rad/s
NBAR_STRETCH = 0.079
TAU_MS_PAPER = 310e-6  # s
YB171_MASS = 170.936323 * 1.66053906660e-27  # kg
CLOCK_WAVELENGTH = 435.5e-9  # m
HBAR = 1.054571817e-34

MAX_ETA = 0.3
TAIL_TOL = 1e-8
DEFAULT_CUTOFF = 20


def lamb_dicke_parameter(omega_m=STRETCH_MODE_FREQ, wavelength=CLOCK_WAVELENGTH, mass=YB171_MASS, participation=1 / np.sqrt(2)):
    """eta = k * x0 * b for a beam along the mode axis (b = 1/sqrt(2) for the two-ion stretch mode)."""
    k = TWO_PI / wavelength
    x0 = np.sqrt(HBAR / (2 * mass * omega_m))
    return float(k * x0 * participation)


@dataclass(frozen=True)
class PulseParams:
    """Physical MS drive parameters; all frequencies are angular (rad/s)."""

    omega_rabi: float
    delta: float
    eta: float
    tau: float
    omega_m: float = STRETCH_MODE_FREQ
    debye_waller: bool = True
    carrier_fraction: float = 0.0

    def __post_init__(self):
        if not 0 < self.eta <= MAX_ETA:
            raise ValueError(f"Lamb-Dicke parameter eta={self.eta} outside (0, {MAX_ETA}]")
        if self.delta <= 0:
            raise ValueError("detuning delta must be positive")
        if self.tau <= 0:
            raise ValueError("pulse duration tau must be positive")
        if self.omega_rabi <= 0:
            raise ValueError("Rabi frequency must be positive")
        if self.omega_m <= 0:
            raise ValueError("mode frequency must be positive")
        if self.carrier_fraction < 0:
            raise ValueError("carrier_fraction must be non-negative")

    @property
    def coupling(self) -> float:
        """Bare sideband coupling g = eta * Omega / 2."""
        return self.eta * self.omega_rabi / 2

    @property
    def loop_period(self) -> float:
        return TWO_PI / self.delta

    def debye_waller_weights(self, n_max: int) -> np.ndarray:
        """Relative two-photon coupling strength ``w_n`` for Fock states 0..n_max."""
        n = np.arange(n_max + 1)
        if not self.debye_waller:
            return np.ones(n_max + 1)
        x = self.eta**2
        r = np.exp(-x / 2) * eval_genlaguerre(n, 1, x) / (n + 1)
        r_prev = np.concatenate([[0.0], r[:-1]])
        w = (n + 1) * r**2 - n * r_prev**2
        if np.any(w <= 0):
            raise ValueError(f"Debye-Waller weights become non-positive below n={n_max}; reduce eta or the Fock cutoff")
        return w

    def couplings(self, n_max: int) -> np.ndarray:
        return self.coupling * np.sqrt(self.debye_waller_weights(n_max))

    def gate_phase(self, t, n: int = 0) -> float:
        """Accumulated chi(t) = 2 Phi(t) for a component starting in Fock state ``n``."""
        g = self.couplings(n)[n]
        return 2 * g**2 * (t / self.delta - np.sin(self.delta * t) / self.delta**2)


def solve_gate_params(eta, delta, omega_m=STRETCH_MODE_FREQ, chi=np.pi / 4, debye_waller=True) -> PulseParams:
    """Pulse parameters closing the first phase-space loop with gate phase ``chi``.

    ``tau = 2 pi / delta`` and ``Omega`` is chosen so that the motional
    ground state accumulates ``chi`` (``eta * Omega = delta / 2`` for
    ``chi = pi/4`` without the Debye-Waller correction).
    """
    if delta <= 0:
        raise ValueError("detuning delta must be positive")
    if not 0 < eta <= MAX_ETA:
        raise ValueError(f"Lamb-Dicke parameter eta={eta} outside (0, {MAX_ETA}]")
    tau = TWO_PI / delta
    # chi = 4 pi g0^2 / delta^2  ->  g0 = delta sqrt(chi / (4 pi))
    g0 = delta * np.sqrt(chi / (4 * np.pi))
    probe = PulseParams(1.0, delta, eta, tau, omega_m, debye_waller)
    w0 = probe.debye_waller_weights(0)[0]
    omega = 2 * g0 / (eta * np.sqrt(w0))
    return PulseParams(omega, delta, eta, tau, omega_m, debye_waller)


def params_for_duration(tau, eta=None, omega_m=STRETCH_MODE_FREQ, chi=np.pi / 4, debye_waller=True) -> PulseParams:
    """Gate parameters for a requested gate duration (default: the 310 us operating point)."""
    if eta is None:
        eta = lamb_dicke_parameter(omega_m)
    return solve_gate_params(eta, TWO_PI / tau, omega_m, chi, debye_waller)


@dataclass(frozen=True)
class MotionState:
    """Initial state of the motional mode.

    Either thermal with mean occupation ``nbar`` or an explicit Fock-basis
    density matrix in ``rho`` (which must be diagonal: components are
    labelled by their initial phonon number).  ``fock_cutoff`` is the highest
    retained Fock state; left as ``None`` it is chosen automatically.
    """

    nbar: float = 0.0
    fock_cutoff: int | None = None
    rho: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.nbar < 0:
            raise ValueError("nbar must be non-negative")
        if self.rho is not None:
            rho = np.asarray(self.rho, dtype=complex)
            if rho.ndim == 1:
                rho = np.diag(rho)
            if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
                raise ValueError("motional density matrix must be square")
            off = rho - np.diag(np.diag(rho))
            if np.max(np.abs(off), initial=0.0) > 1e-12:
                raise ValueError("motional density matrix must be diagonal in the Fock basis")
            p = np.real(np.diag(rho))
            if np.any(p < -1e-12) or abs(p.sum() - 1) > 1e-10:
                raise ValueError("motional populations must be non-negative and sum to 1")
            object.__setattr__(self, "rho", rho)
            object.__setattr__(self, "fock_cutoff", rho.shape[0] - 1)
            object.__setattr__(self, "nbar", float(np.dot(np.arange(len(p)), p)))
        elif self.fock_cutoff is None:
            object.__setattr__(self, "fock_cutoff", required_cutoff(self.nbar))
        elif self.fock_cutoff < 0:
            raise ValueError("fock_cutoff must be non-negative")

    @classmethod
    def thermal(cls, nbar, fock_cutoff=None):
        return cls(nbar=nbar, fock_cutoff=fock_cutoff)

    @classmethod
    def fock(cls, n, fock_cutoff=None):
        size = max(n, fock_cutoff or 0) + 1
        p = np.zeros(size)
        p[n] = 1.0
        return cls(rho=p)

    def populations(self) -> np.ndarray:
        """Fock populations p_0..p_cutoff (renormalized after truncation)."""
        if self.rho is not None:
            return np.clip(np.real(np.diag(self.rho)), 0, None)
        N = self.fock_cutoff
        if self.nbar == 0:
            p = np.zeros(N + 1)
            p[0] = 1.0
            return p
        ratio = self.nbar / (self.nbar + 1)
        tail = ratio ** (N + 1)
        if tail > TAIL_TOL:
            raise ValueError(
                f"fock_cutoff={N} leaves thermal tail mass {tail:.2e} > {TAIL_TOL:g} for nbar={self.nbar}; "
                f"use fock_cutoff >= {required_cutoff(self.nbar)}"
            )
        n = np.arange(N + 1)
        p = ratio**n / (self.nbar + 1)
        return p / p.sum()


def required_cutoff(nbar, tail_tol=TAIL_TOL, minimum=DEFAULT_CUTOFF) -> int:
    if nbar == 0:
        return minimum
    ratio = nbar / (nbar + 1)
    n = int(np.ceil(np.log(tail_tol) / np.log(ratio))) - 1
    return max(minimum, n)


def spin_operator(d=4) -> np.ndarray:
    """Collective coupling S = X01 (x) 1 + 1 (x) X01."""
    X = x01(d)
    eye = np.eye(d)
    return np.kron(X, eye) + np.kron(eye, X)


def _spin_rho(spin_state) -> DensityMatrix:
    rho = as_density_matrix(spin_state)
    if len(rho.dims) != 2 or rho.dims[0] != rho.dims[1]:
        raise ValueError(f"MS dynamics needs two equal-dimension qudits, got dims {rho.dims}")
    return rho


def _displacement_diag(n, x):
    """<n| D(beta) |n> = exp(-x/2) L_n(x) for x = |beta|^2 (broadcasts)."""
    return np.exp(-x / 2) * eval_genlaguerre(n, 0, x)


def displacement_element(m, n, beta):
    """Matrix element <m| D(beta) |n> in the Fock basis."""
    x = abs(beta) ** 2
    if m >= n:
        pref = np.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)))
        return pref * beta ** (m - n) * np.exp(-x / 2) * eval_genlaguerre(n, m - n, x)
    pref = np.exp(0.5 * (gammaln(m + 1) - gammaln(n + 1)))
    return pref * (-np.conj(beta)) ** (n - m) * np.exp(-x / 2) * eval_genlaguerre(m, n - m, x)


def _evolve_analytic(rho0, motion: MotionState, params: PulseParams, t):
    d = rho0.dims[0]
    S = spin_operator(d)
    s, V = np.linalg.eigh(S)
    s = np.round(s)  # eigenvalues of S are integers in -2..2
    rt = V.conj().T @ rho0.elements @ V
    p = motion.populations()
    g = params.couplings(len(p) - 1)
    delta = params.delta
    ds = s[:, None] - s[None, :]
    ds2 = (s**2)[:, None] - (s**2)[None, :]
    u = (np.exp(-1j * delta * t) - 1) / delta
    phase_t = t / delta - np.sin(delta * t) / delta**2
    kernel = np.zeros_like(rt)
    # fixed summation order over n keeps the thermal average reproducible
    for n, (pn, gn) in enumerate(zip(p, g)):
        if pn == 0:
            continue
        x = abs(gn * u) ** 2 * ds**2
        kernel += pn * np.exp(-1j * gn**2 * phase_t * ds2) * _displacement_diag(n, x)
    out = V @ (rt * kernel) @ V.conj().T
    out = 0.5 * (out + out.conj().T)
    return DensityMatrix(rho0.dims, out / np.trace(out).real)


def evolve_ms(spin_state, motion: MotionState, params: PulseParams, t):
    """Reduced two-ion density matrix after driving for time ``t``.

    ``t`` may be a scalar (returns one ``DensityMatrix``) or a sequence
    (returns a list).  Thermal averaging is an exact weighted sum over the
    truncated Fock distribution.
    """
    if params.carrier_fraction:
        raise ValueError("the closed-form propagator has no carrier term; use evolve_ms_numeric")
    rho0 = _spin_rho(spin_state)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0):
        raise ValueError("evolution time must be non-negative")
    out = [_evolve_analytic(rho0, motion, params, ti) for ti in times]
    return out[0] if np.ndim(t) == 0 else out


def ms_unitary(params: PulseParams, t, n: int = 0) -> np.ndarray:
    """Spin propagator at loop closure for Fock component ``n`` (motion factor dropped).

    Only meaningful when ``delta * t`` is a multiple of 2 pi, where the
    displacement vanishes.
    """
    d = 4
    S = spin_operator(d)
    g = params.couplings(n)[n]
    phi = g**2 * (t / params.delta - np.sin(params.delta * t) / params.delta**2)
    s, V = np.linalg.eigh(S)
    return V @ np.diag(np.exp(-1j * phi * np.round(s) ** 2)) @ V.conj().T


def _annihilation(n):
    return np.diag(np.sqrt(np.arange(1, n)), 1).astype(complex)


def evolve_ms_numeric(spin_state, motion: MotionState, params: PulseParams, t, rtol=1e-9, fock_headroom=20, method="DOP853"):
    """Brute-force oracle: integrate the spin (x) Fock Schrodinger equation.

    Every (spin eigencomponent, Fock component) pair is propagated as a
    column of one matrix ODE on a Fock space with ``fock_headroom`` extra
    levels above the motional cutoff, then the mode is traced out.  Time is
    rescaled to ``s = delta * t``.  ``carrier_fraction`` adds the
    off-resonant carrier ``c * Omega * S cos((omega_m + delta) t)``.
    """
    rho0 = _spin_rho(spin_state)
    d = rho0.dims[0]
    D = d * d
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0):
        raise ValueError("evolution time must be non-negative")
    p = motion.populations()
    g = params.couplings(len(p) - 1)
    nf = len(p) + fock_headroom

    lam, vecs = np.linalg.eigh(rho0.elements)
    spin_cols = [(lam[i], vecs[:, i]) for i in range(D) if lam[i] > 1e-14]
    columns, weights, gs = [], [], []
    for n, pn in enumerate(p):
        if pn <= 0:
            continue
        fock = np.zeros(nf, dtype=complex)
        fock[n] = 1.0
        for li, v in spin_cols:
            columns.append(np.kron(v, fock))
            weights.append(pn * li)
            gs.append(g[n])
    psi0 = np.stack(columns, axis=1).reshape(D, nf, -1)
    weights = np.array(weights)
    gs = np.array(gs) / params.delta
    K = psi0.shape[2]

    S = spin_operator(d)
    a = _annihilation(nf)
    ad = a.conj().T
    carrier = params.carrier_fraction * params.omega_rabi / params.delta
    nu = (params.omega_m + params.delta) / params.delta

    def rhs(s, y):
        psi = y.reshape(D, nf, K)
        A = a * np.exp(1j * s) + ad * np.exp(-1j * s)
        spun = np.tensordot(S, psi, axes=(1, 0))
        out = np.einsum("nm,imk->ink", A, spun) * gs
        if carrier:
            out = out + carrier * np.cos(nu * s) * spun
        return (-1j * out).reshape(-1)

    s_eval = params.delta * times
    order = np.argsort(s_eval)
    s_sorted = s_eval[order]
    results = [None] * len(times)
    if s_sorted[-1] == 0:
        ys = np.repeat(psi0.reshape(-1, 1), len(times), axis=1)
    else:
        sol = solve_ivp(rhs, (0.0, s_sorted[-1]), psi0.reshape(-1), method=method, t_eval=s_sorted,
                        rtol=rtol, atol=rtol * 1e-3)
        if not sol.success:
            raise RuntimeError(f"integration failed: {sol.message}")
        ys = sol.y
    for j, idx in enumerate(order):
        psi = ys[:, j].reshape(D, nf, K)
        rho = np.einsum("imk,jmk,k->ij", psi, psi.conj(), weights)
        rho = 0.5 * (rho + rho.conj().T)
        results[idx] = DensityMatrix(rho0.dims, rho / np.trace(rho).real)
    return results[0] if np.ndim(t) == 0 else results


@dataclass
class ScanResult:
    """Populations (or derived quantities) sampled over a swept parameter.

    ``estimates`` and ``errors`` map curve names to arrays aligned with
    ``grid``.  ``shots == 0`` marks exact expectation values.
    """

    parameter: str
    grid: np.ndarray
    estimates: dict
    errors: dict
    shots: int = 0
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if self.grid.ndim != 1 or len(self.grid) == 0:
            raise ValueError("scan grid must be a non-empty 1-d array")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("scan grid must be strictly increasing")
        self.estimates = {k: np.asarray(v, dtype=float) for k, v in self.estimates.items()}
        self.errors = {k: np.asarray(v, dtype=float) for k, v in self.errors.items()}
        for k, v in self.estimates.items():
            if v.shape != self.grid.shape:
                raise ValueError(f"curve {k!r} does not match the grid length")
            lo = -1.0 if k == "parity" else 0.0
            if np.any(v < lo - 1e-12) or np.any(v > 1 + 1e-12):
                raise ValueError(f"curve {k!r} leaves its allowed range")

    def __getitem__(self, key):
        return self.estimates[key]

    def columns(self):
        return list(self.estimates)


def _pair_populations(rho: DensityMatrix):
    d = rho.dims[0]
    p = np.real(np.diag(rho.elements)).reshape(d, d)
    p = np.clip(p, 0, 1)
    return p[0, 0], p[0, 1] + p[1, 0], p[1, 1]


def population_scan(params: PulseParams, tau_grid, motion: MotionState | None = None, d=4, workers=1) -> ScanResult:
    """Exact P00, P01+P10 and P11 versus MS pulse duration, starting from |00>.

    ``workers > 1`` evaluates grid points in a thread pool; results are
    collected in grid order so the output does not depend on scheduling.
    """
    motion = motion or MotionState()
    psi0 = QuditState((d, d), np.eye(d * d)[0])
    tau_grid = np.asarray(tau_grid, dtype=float)

    def point(tau):
        return _pair_populations(evolve_ms(psi0, motion, params, tau))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(point, tau_grid))
    else:
        rows = [point(tau) for tau in tau_grid]
    rows = np.array(rows)
    names = ("P00", "P01+P10", "P11")
    return ScanResult(
        "tau",
        tau_grid,
        {k: rows[:, i] for i, k in enumerate(names)},
        {k: np.zeros(len(tau_grid)) for k in names},
        shots=0,
        metadata={"nbar": motion.nbar, "delta": params.delta, "omega_rabi": params.omega_rabi, "eta": params.eta},
    )


def first_interior_minimum(grid, values):
    """Grid value of the first local minimum after the curve has started to rise."""
    values = np.asarray(values)
    for i in range(1, len(values) - 1):
        if values[i] <= values[i - 1] and values[i] < values[i + 1] and np.max(values[:i]) > values[i]:
            return grid[i]
    return None


def with_duration(params: PulseParams, tau) -> PulseParams:
    return replace(params, tau=tau)
