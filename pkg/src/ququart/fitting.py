"""Curve fits for Rabi flops and parity fringes.

Damped sine::

    y(x) = offset + amplitude * exp(-x / decay) * sin(2 pi frequency x + phase)

Parity fringe::

    P(phi) = A sin(2 (phi + phi0))

The damped sine is fitted by bounded nonlinear least squares started from
the periodogram peak of the mean-subtracted data, with three phase offsets
and the lowest residual kept.  The parity fringe is linear in
``(A cos 2 phi0, A sin 2 phi0)`` and is solved directly.

Uncertainties come in two flavours: analytic (covariance from the binomial
standard errors of the points) and a nonparametric bootstrap that redraws
the shots of every point.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

logger = logging.getLogger(__name__)

DAMPED_SINE_PARAMS = ("amplitude", "frequency", "phase", "decay", "offset")
PARITY_PARAMS = ("A", "phi0")
MAX_ITERATIONS = 200
# population swings below this are not resolvable by any realistic shot count
MIN_AMPLITUDE = 1e-6


@dataclass
class FitResult:
    """Fitted model parameters with 1-sigma uncertainties.

    ``errors`` are the analytic (covariance) uncertainties and
    ``bootstrap_errors`` the bootstrap ones, when computed.  A fit that did
    not converge keeps its numbers but has ``reliable == False``.
    """

    model: str
    params: dict
    errors: dict
    residual_norm: float
    converged: bool
    iterations: int = 0
    covariance: np.ndarray | None = None
    bootstrap_errors: dict | None = None
    bootstrap_samples: np.ndarray | None = field(default=None, repr=False)
    message: str = ""

    @property
    def reliable(self) -> bool:
        return self.converged

    def __getitem__(self, key):
        return self.params[key]

    def vector(self) -> np.ndarray:
        names = DAMPED_SINE_PARAMS if self.model == "damped_sine" else PARITY_PARAMS
        return np.array([self.params[k] for k in names])

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": {k: float(v) for k, v in self.params.items()},
            "errors": {k: float(v) for k, v in self.errors.items()},
            "bootstrap_errors": None if self.bootstrap_errors is None else {k: float(v) for k, v in self.bootstrap_errors.items()},
            "residual_norm": float(self.residual_norm),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
        }


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    bootstrap_stderr: float | None = None


def damped_sine(x, amplitude, frequency, phase, decay, offset):
    rate = 0.0 if not np.isfinite(decay) else 1.0 / decay
    return offset + amplitude * np.exp(-rate * x) * np.sin(2 * np.pi * frequency * x + phase)


def _model_rate(p, x):
    # internal parametrization uses the decay rate so that "no decay" is rate 0
    amp, freq, phase, rate, off = p
    return off + amp * np.exp(-rate * x) * np.sin(2 * np.pi * freq * x + phase)


def _jac_rate(p, x):
    amp, freq, phase, rate, off = p
    env = np.exp(-rate * x)
    arg = 2 * np.pi * freq * x + phase
    s, c = np.sin(arg), np.cos(arg)
    return np.stack([
        env * s,
        amp * env * c * 2 * np.pi * x,
        amp * env * c,
        -amp * x * env * s,
        np.ones_like(x),
    ], axis=1)


def _spectral_guess(x, y):
    """Frequency at the periodogram peak of the mean-subtracted data."""
    y = y - y.mean()
    n = len(x)
    span = x[-1] - x[0]
    grid = np.linspace(x[0], x[-1], n)
    yi = np.interp(grid, x, y)
    pad = 16 * n
    spec = np.abs(np.fft.rfft(yi, pad))
    freqs = np.fft.rfftfreq(pad, d=span / (n - 1))
    spec[0] = 0.0
    return float(freqs[np.argmax(spec)])


def _sigma(scan, curve):
    err = np.asarray(scan.errors.get(curve, np.zeros(len(scan.grid))), dtype=float)
    if scan.shots and np.all(err > 0):
        return err
    return None


def _fit_damped(x, y, sigma, starts):
    w = 1.0 if sigma is None else 1.0 / sigma

    def resid(p):
        return (_model_rate(p, x) - y) * w

    def jac(p):
        J = _jac_rate(p, x)
        return J * (w if np.ndim(w) == 0 else w[:, None])

    best = None
    for p0 in starts:
        try:
            r = least_squares(resid, p0, jac=jac, method="trf", max_nfev=MAX_ITERATIONS,
                              bounds=([-np.inf, 0, -np.inf, 0, -np.inf], np.inf), x_scale="jac")
        except ValueError:
            continue
        if best is None or r.cost < best.cost:
            best = r
    return best


def _normalize_sine(p):
    amp, freq, phase, rate, off = p
    if amp < 0:
        amp, phase = -amp, phase + np.pi
    phase = (phase + np.pi) % (2 * np.pi) - np.pi
    return np.array([amp, freq, phase, rate, off])


def _resample(scan, curve, rng):
    """Redraw the shots of every point (binomial resampling of the hit counts)."""
    n = scan.shots
    p = np.clip(scan.estimates[curve], 0, 1)
    return rng.binomial(n, p) / n


def fit_damped_sine(scan, curve: str | None = None, n_bootstrap: int = 200, seed: int = 0) -> FitResult:
    """Fit an exponentially damped sine to one curve of a scan."""
    curve = curve or scan.columns()[0]
    x = np.asarray(scan.grid, dtype=float)
    y = np.asarray(scan.estimates[curve], dtype=float)
    if len(x) < 8:
        raise ValueError("damped-sine fit needs at least 8 points")
    span = x[-1] - x[0]
    sigma = _sigma(scan, curve)

    f0 = _spectral_guess(x, y)
    if f0 * span < 1.0:
        logger.warning("data span %.3g covers less than one period of the guessed frequency %.3g", span, f0)
    amp0 = 0.5 * (y.max() - y.min())
    rate0 = 0.1 / span
    starts = [np.array([amp0, f0, ph, rate0, y.mean()]) for ph in (0.0, 2 * np.pi / 3, 4 * np.pi / 3)]
    res = _fit_damped(x, y, sigma, starts)
    if res is None:
        nan = {k: np.nan for k in DAMPED_SINE_PARAMS}
        return FitResult("damped_sine", nan, dict(nan), np.inf, False, message="no start converged")

    p = _normalize_sine(res.x)
    J = _jac_rate(p, x)
    if sigma is not None:
        J = J / sigma[:, None]
    resid = _model_rate(p, x) - y
    dof = max(len(x) - 5, 1)
    converged = bool(res.success and res.status > 0 and res.nfev < MAX_ITERATIONS)
    try:
        cov_rate = np.linalg.inv(J.T @ J)
        if sigma is None:
            cov_rate = cov_rate * (resid @ resid) / dof
        if not np.all(np.isfinite(cov_rate)) or np.any(np.diag(cov_rate) < 0):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        cov_rate = np.full((5, 5), np.inf)
        converged = False
    message = res.message
    if p[0] < MIN_AMPLITUDE or np.sqrt(cov_rate[0, 0]) > 10 * abs(p[0]):
        # an oscillation that cannot be told apart from a constant
        converged = False
        message = "amplitude not resolved"
    if p[1] * span < 0.5:
        # the first maximum would be an extrapolation beyond the data
        converged = False
        message = f"data cover only {p[1] * span:.2f} of a fitted period"

    # convert the rate to a decay time
    rate = p[3]
    decay = np.inf if rate <= 0 else 1.0 / rate
    T = np.eye(5)
    T[3, 3] = 0.0 if rate <= 0 else -1.0 / rate**2
    if np.all(np.isfinite(cov_rate)):
        cov = T @ cov_rate @ T.T
    else:
        cov = np.full((5, 5), np.inf)
    if rate <= 0:
        cov[3, 3] = np.inf
    values = dict(zip(DAMPED_SINE_PARAMS, [p[0], p[1], p[2], decay, p[4]]))
    errors = dict(zip(DAMPED_SINE_PARAMS, np.sqrt(np.abs(np.diag(cov)))))

    boot_err, samples = None, None
    if n_bootstrap and scan.shots:
        rng = np.random.default_rng(seed)
        rows = []
        for _ in range(n_bootstrap):
            yb = _resample(scan, curve, rng)
            rb = _fit_damped(x, yb, sigma, [p])
            if rb is not None:
                rows.append(_normalize_sine(rb.x))
        samples = np.array(rows)
        with np.errstate(divide="ignore"):
            dec = np.where(samples[:, 3] > 0, 1.0 / samples[:, 3], np.inf)
        cols = [samples[:, 0], samples[:, 1], np.unwrap(samples[:, 2]), dec, samples[:, 4]]
        boot_err = {k: float(np.std(c, ddof=1)) if np.all(np.isfinite(c)) else np.inf for k, c in zip(DAMPED_SINE_PARAMS, cols)}

    chi = resid if sigma is None else resid / sigma
    return FitResult("damped_sine", values, errors, float(np.linalg.norm(chi)), converged, int(res.nfev), cov,
                     boot_err, samples, message)


def first_maximum(params: dict, x_min: float = 0.0):
    """Position and value of the first local maximum of a damped sine after ``x_min``."""
    amp, freq, phase, decay, off = (params[k] for k in DAMPED_SINE_PARAMS)
    omega = 2 * np.pi * freq
    rate = 0.0 if not np.isfinite(decay) else 1.0 / decay
    if amp <= 0 or omega <= 0:
        raise ValueError("fitted model has no oscillation")
    # derivative zero where tan(omega x + phase) = omega / rate; maxima sit at psi + 2 pi m
    psi = np.arctan2(omega, rate)
    m = np.ceil((omega * x_min + phase - psi) / (2 * np.pi) - 1e-12)
    x = (psi + 2 * np.pi * m - phase) / omega
    return float(x), float(damped_sine(x, amp, freq, phase, decay, off))


def _sample_params(samples):
    dec = np.where(samples[:, 3] > 0, 1.0 / np.where(samples[:, 3] > 0, samples[:, 3], 1.0), np.inf)
    return [dict(zip(DAMPED_SINE_PARAMS, (r[0], r[1], r[2], dv, r[4]))) for r, dv in zip(samples, dec)]


def first_maximum_estimate(fit: FitResult) -> Estimate:
    if not fit.converged:
        raise ValueError("fit did not converge; its first maximum is not a usable estimate")
    _, value = first_maximum(fit.params)
    # delta-method error from a central-difference gradient
    base = fit.vector()
    grad = np.zeros(5)
    for i in range(5):
        if not np.isfinite(base[i]):
            continue
        h = 1e-6 * (abs(base[i]) if base[i] != 0 else 1.0)
        up, dn = base.copy(), base.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (first_maximum(dict(zip(DAMPED_SINE_PARAMS, up)))[1]
                   - first_maximum(dict(zip(DAMPED_SINE_PARAMS, dn)))[1]) / (2 * h)
    cov = np.nan_to_num(fit.covariance, nan=0.0, posinf=0.0, neginf=0.0)
    var = float(grad @ cov @ grad)
    boot = None
    if fit.bootstrap_samples is not None and len(fit.bootstrap_samples) > 1:
        vals = []
        for d in _sample_params(fit.bootstrap_samples):
            try:
                vals.append(first_maximum(d)[1])
            except ValueError:
                continue
        boot = float(np.std(vals, ddof=1)) if len(vals) > 1 else None
    return Estimate(value, float(np.sqrt(max(var, 0.0))), boot)


def parity_model(phi, A, phi0):
    return A * np.sin(2 * (np.asarray(phi) + phi0))


def _parity_linear(phi, y, sigma):
    X = np.stack([np.sin(2 * phi), np.cos(2 * phi)], axis=1)
    w = np.ones_like(y) if sigma is None else 1.0 / sigma
    Xw = X * w[:, None]
    coef, *_ = np.linalg.lstsq(Xw, y * w, rcond=None)
    return coef, X, Xw


def _parity_params(coef):
    a, b = coef
    A = float(np.hypot(a, b))
    phi0 = float(np.arctan2(b, a) / 2)
    return A, phi0


def fit_parity(scan, curve: str = "parity", n_bootstrap: int = 200, seed: int = 0) -> FitResult:
    """Fit ``A sin(2 (phi + phi0))`` to a parity scan.

    ``A >= 0`` and ``phi0`` lies in (-pi/2, pi/2].  The Bell-state coherence
    is ``|rho_{00,11}| = A / 2``.
    """
    phi = np.asarray(scan.grid, dtype=float)
    y = np.asarray(scan.estimates[curve], dtype=float)
    if len(phi) < 6:
        raise ValueError("parity fit needs at least 6 points")
    sigma = _sigma(scan, curve)
    coef, X, Xw = _parity_linear(phi, y, sigma)
    A, phi0 = _parity_params(coef)
    resid = X @ coef - y
    converged = np.linalg.matrix_rank(Xw) == 2
    cov = np.linalg.pinv(Xw.T @ Xw)
    if sigma is None:
        cov = cov * (resid @ resid) / max(len(y) - 2, 1)
    a, b = coef
    if A > 0:
        # gradients of A = hypot(a, b) and phi0 = atan2(b, a) / 2
        G = np.array([[a / A, b / A], [-b / (2 * A**2), a / (2 * A**2)]])
        pcov = G @ cov @ G.T
    else:
        pcov = np.diag([cov[0, 0] + cov[1, 1], np.inf])
    errors = {"A": float(np.sqrt(pcov[0, 0])), "phi0": float(np.sqrt(pcov[1, 1]))}

    boot_err, samples = None, None
    if n_bootstrap and scan.shots:
        rng = np.random.default_rng(seed)
        n = scan.shots
        q = np.clip((1 - y) / 2, 0, 1)  # fraction of shots with exactly one ion excited
        rows = []
        for _ in range(n_bootstrap):
            yb = 1 - 2 * rng.binomial(n, q) / n
            cb, *_ = _parity_linear(phi, yb, sigma)
            rows.append(_parity_params(cb))
        samples = np.array(rows)
        dphi = (samples[:, 1] - phi0 + np.pi / 2) % np.pi - np.pi / 2
        boot_err = {"A": float(np.std(samples[:, 0], ddof=1)), "phi0": float(np.std(dphi, ddof=1))}

    chi = resid if sigma is None else resid / sigma
    return FitResult("parity", {"A": A, "phi0": phi0}, errors, float(np.linalg.norm(chi)), bool(converged), 1,
                     pcov, boot_err, samples)


def bell_fidelity(p00: float, p11: float, A: float) -> float:
    """Bell-state fidelity ``(p00 + p11) / 2 + |A| / 2``.

    Rounding can push the value a hair above one; it is then clamped with a warning.
    """
    slack = 1e-9
    if not (0 <= p00 <= 1 and 0 <= p11 <= 1) or p00 + p11 > 1 + slack:
        raise ValueError("populations must lie in [0, 1] and sum to at most 1")
    if not abs(A) <= 1 + slack:
        raise ValueError("parity amplitude must lie in [-1, 1]")
    F = (p00 + p11) / 2 + abs(A) / 2
    if F > 1:
        warnings.warn(f"Bell fidelity estimate {F:.4f} exceeds 1 (unphysical); clamped", RuntimeWarning, stacklevel=2)
        F = 1.0
    return float(F)
