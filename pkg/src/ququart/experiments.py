"""Simulated benchmarking experiments.

* Rabi scan on ``|0> <-> |k>`` with a damped-sine fit; gate fidelity is the
  fitted population at the first maximum.
* MS duration scan: P00, P01+P10 and P11 versus bichromatic pulse length.
* Parity scan after the MS gate and a global ``R_01(phi, pi/2)`` analysis
  pulse, fitted with ``A sin(2 (phi + phi0))``.
* Bell fidelity ``(P00 + P11) / 2 + |A| / 2``.

Every stochastic step takes a master seed; scan point ``i`` draws from the
stream ``(seed, i)`` so points are independent of evaluation order.
"""

from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .core import DensityMatrix, QuditState, apply_unitary, as_density_matrix, basis_state
from .fitting import (
    Estimate,
    FitResult,
    bell_fidelity,
    first_maximum_estimate,
    fit_parity,
)
from .gates import Rotation, ms_matrix, rotation_matrix
from .ms import MotionState, PulseParams, ScanResult, evolve_ms, population_scan
from .noise import (
    NoiseModel,
    _superop_on_target,
    camera_readout,
    driven_superoperator,
    noisy_pulse,
    shelving_readout,
)

logger = logging.getLogger(__name__)

RABI_MAX_DURATION = 200e-6
DEFAULT_SHOTS = 300


def _binomial_error(hits, shots):
    # (hits + 1/2) / (shots + 1) keeps the error finite at 0 and 1
    p = (np.asarray(hits) + 0.5) / (shots + 1)
    return np.sqrt(p * (1 - p) / shots)


def _readout_noise(noise: NoiseModel, apply_spam: bool) -> NoiseModel:
    return noise if apply_spam else replace(noise, spam=(0.0, 0.0))


def rabi_scan(ion, k, tau_grid, shots=DEFAULT_SHOTS, noise=None, seed=0, omega_rabi=None, d=4, n_ions=2,
              apply_spam=True, max_duration=RABI_MAX_DURATION) -> ScanResult:
    """Population of ``|k>`` on ``ion`` after a resonant ``R_0k(0, omega * tau)`` pulse.

    The register starts in ``|0...0>``.  Dephasing acts during the pulse and
    crosstalk drives the neighbouring ion.  ``shots=0`` returns exact values.
    """
    if omega_rabi is None:
        raise ValueError("omega_rabi is required (no default Rabi frequency)")
    noise = noise or NoiseModel.noiseless()
    tau_grid = np.asarray(tau_grid, dtype=float)
    if np.any(tau_grid < 0) or np.any(tau_grid > max_duration * (1 + 1e-12)):
        raise ValueError(f"pulse durations must lie in [0, {max_duration:g}] s")
    rho0 = basis_state([d] * n_ions, [0] * n_ions).to_density_matrix()
    ro_noise = _readout_noise(noise, apply_spam)
    est, err, nb = [], [], []
    for i, tau in enumerate(tau_grid):
        rho = noisy_pulse(rho0, Rotation(ion, (0, k), 0.0, omega_rabi * tau), omega_rabi, noise)
        rec = shelving_readout(rho, k, shots, seed, ro_noise, ion, key=(i,))
        est.append(rec.estimate)
        err.append(0.0 if shots == 0 else _binomial_error(rec.hits, shots))
        if n_ions > 1:
            other = 1 if ion == 0 else ion - 1
            nb.append(shelving_readout(rho, k, 0, None, None, other).estimate)
    estimates = {f"P{k}": np.array(est)}
    errors = {f"P{k}": np.array(err)}
    if nb:
        estimates[f"neighbour_P{k}"] = np.array(nb)
        errors[f"neighbour_P{k}"] = np.zeros(len(nb))
    return ScanResult("tau", tau_grid, estimates, errors, shots, seed,
                      {"ion": ion, "level": k, "omega_rabi": omega_rabi})


def exact_rabi_population(k, tau, omega_rabi, noise, d=4):
    """Noise-model population of ``|k>`` after a pulse of length ``tau`` (single ion, no sampling)."""
    rho0 = basis_state([d], [0]).to_density_matrix()
    rho = noisy_pulse(rho0, Rotation(0, (0, k), 0.0, omega_rabi * tau), omega_rabi, noise)
    return float(np.real(rho.elements[k, k]))


def true_first_maximum(k, omega_rabi, noise, d=4):
    """Exact first-maximum population of the Rabi curve under ``noise``."""
    def f(t):
        return -exact_rabi_population(k, t, omega_rabi, noise, d)

    t_pi = np.pi / omega_rabi
    r = minimize_scalar(f, bounds=(0.5 * t_pi, 1.5 * t_pi), method="bounded", options={"xatol": 1e-12 * t_pi})
    return float(r.x), float(-r.fun)


def laser_rate_for_first_maximum(target, k, omega_rabi, d=4):
    """Laser dephasing rate giving a first-maximum population of ``target``."""
    if not 0.5 < target < 1:
        raise ValueError("target first-maximum population must lie in (0.5, 1)")

    def gap(rate):
        return true_first_maximum(k, omega_rabi, NoiseModel(laser_dephasing_rate=rate, crosstalk_fraction=0.0), d)[1] - target

    return brentq(gap, 0.0, 2 * omega_rabi, xtol=1e-12 * omega_rabi)


def rabi_fidelity(fit: FitResult) -> Estimate:
    """Fitted ``|k>`` population at the first maximum of the Rabi curve."""
    return first_maximum_estimate(fit)


def ms_scan(params: PulseParams, tau_grid, shots=DEFAULT_SHOTS, motion=None, noise=None, seed=0, d=4,
            apply_spam=True) -> ScanResult:
    """MS duration scan from ``|00>`` with finite-shot camera readout.

    ``shots=0`` returns the exact curves of :func:`population_scan`.
    """
    motion = motion or MotionState()
    if shots == 0:
        return population_scan(params, tau_grid, motion, d)
    noise = _readout_noise(noise or NoiseModel.noiseless(), apply_spam)
    psi0 = basis_state((d, d), (0, 0))
    tau_grid = np.asarray(tau_grid, dtype=float)
    counts = []
    for i, tau in enumerate(tau_grid):
        rec = camera_readout(evolve_ms(psi0, motion, params, tau), shots, seed, noise, key=(i,))
        bright = rec.outcomes.sum(axis=1)
        counts.append([(bright == 2).sum(), (bright == 1).sum(), (bright == 0).sum()])
    counts = np.array(counts)
    names = ("P00", "P01+P10", "P11")
    return ScanResult("tau", tau_grid, {n: counts[:, j] / shots for j, n in enumerate(names)},
                      {n: _binomial_error(counts[:, j], shots) for j, n in enumerate(names)}, shots, seed,
                      {"nbar": motion.nbar})


def bell_state(d=4) -> QuditState:
    """``(|00> - i|11>) / sqrt(2)``, the state ``XX(pi/4)`` makes from ``|00>``."""
    v = np.zeros(d * d, dtype=complex)
    v[0] = 1 / np.sqrt(2)
    v[d + 1] = -1j / np.sqrt(2)
    return QuditState((d, d), v)


def ideal_bell_preparation(d=4) -> QuditState:
    return apply_unitary(basis_state((d, d), (0, 0)), ms_matrix(np.pi / 4, d), [0, 1])


def synthetic_parity_state(A, phi0, d=4) -> DensityMatrix:
    """Two-ion state whose parity fringe is ``A sin(2 (phi + phi0))``.

    Populations are split evenly between |00> and |11> and the coherence is
    ``rho_{00,11} = (A / 2) exp(i (2 phi0 + pi / 2))``; the ideal Bell state
    is ``A = 1, phi0 = 0``.
    """
    if not 0 <= A <= 1:
        raise ValueError("A must lie in [0, 1]")
    n = d * d
    rho = np.zeros((n, n), dtype=complex)
    i00, i11 = 0, d + 1
    rho[i00, i00] = rho[i11, i11] = 0.5
    c = A / 2 * np.exp(1j * (2 * phi0 + np.pi / 2))
    rho[i00, i11] = c
    rho[i11, i00] = np.conj(c)
    return DensityMatrix((d, d), rho)


def analysis_pulse(state, phi, noise=None, omega_rabi=None) -> DensityMatrix:
    """Global ``R_01(phi, pi/2)`` on both ions (optionally with dephasing during the pulse)."""
    rho = as_density_matrix(state)
    d = rho.dims[0]
    if omega_rabi is None or noise is None:
        R = rotation_matrix(1, phi, np.pi / 2, d)
        for ion in range(len(rho.dims)):
            rho = apply_unitary(rho, R, [ion])
        return rho
    duration = (np.pi / 2) / omega_rabi
    L = driven_superoperator(d, (0, 1), phi, omega_rabi, noise, duration)
    for ion in range(len(rho.dims)):
        rho = _superop_on_target(rho, L, ion)
    return rho


def _check_phase_grid(phi_grid):
    phi_grid = np.asarray(phi_grid, dtype=float)
    step = np.median(np.diff(phi_grid)) if len(phi_grid) > 1 else 0.0
    # phases read from files are rounded, so allow a milliradian of slack
    if phi_grid[-1] - phi_grid[0] + step < np.pi - 1e-3:
        raise ValueError("phase grid must cover at least pi")
    return phi_grid


def parity_scan(phi_grid, shots=DEFAULT_SHOTS, noise=None, seed=0, state=None, params=None, motion=None,
                omega_rabi=None, apply_spam=True) -> ScanResult:
    """Parity ``1 - 2 (P01 + P10)`` versus analysis phase.

    The prepared state is ``state`` if given, else the MS evolution for
    ``params`` (at ``params.tau``, thermal ``motion``), else the ideal
    ``XX(pi/4)|00>``.  Each shot reads both ions with one camera detection.
    """
    phi_grid = _check_phase_grid(phi_grid)
    noise = noise or NoiseModel.noiseless()
    if state is None:
        if params is not None:
            state = evolve_ms(basis_state((4, 4), (0, 0)), motion or MotionState(), params, params.tau)
        else:
            state = ideal_bell_preparation()
    ro_noise = _readout_noise(noise, apply_spam)
    q, qerr = [], []
    for i, phi in enumerate(phi_grid):
        rho = analysis_pulse(state, phi, noise if omega_rabi else None, omega_rabi)
        rec = camera_readout(rho, shots, seed, ro_noise, key=(i,))
        if shots == 0:
            p = np.real(np.diag(rho.elements)).reshape(rho.dims)
            q.append(float(p[0, 1:].sum() + p[1:, 0].sum()))
            qerr.append(0.0)
        else:
            q.append(rec.hits / shots)
            qerr.append(float(_binomial_error(rec.hits, shots)))
    q = np.array(q)
    qerr = np.array(qerr)
    return ScanResult("phi", phi_grid, {"P01+P10": q, "parity": 1 - 2 * q}, {"P01+P10": qerr, "parity": 2 * qerr},
                      shots, seed)


def measured_pair_populations(state, shots=DEFAULT_SHOTS, noise=None, seed=0, key=(), apply_spam=True):
    """Estimates of P00 and P11 (with standard errors) from camera readout of ``state``."""
    noise = _readout_noise(noise or NoiseModel.noiseless(), apply_spam)
    rho = as_density_matrix(state)
    if shots == 0:
        p = np.real(np.diag(rho.elements)).reshape(rho.dims)
        return Estimate(float(p[0, 0]), 0.0), Estimate(float(p[1:, 1:].sum()), 0.0)
    rec = camera_readout(rho, shots, seed, noise, key=key)
    bright = rec.outcomes.sum(axis=1)
    n00, n11 = int((bright == 2).sum()), int((bright == 0).sum())
    return (Estimate(n00 / shots, float(_binomial_error(n00, shots))),
            Estimate(n11 / shots, float(_binomial_error(n11, shots))))


def bell_experiment(phi_grid=None, shots=DEFAULT_SHOTS, noise=None, seed=0, state=None, params=None, motion=None,
                    omega_rabi=None, apply_spam=True, n_bootstrap=200) -> dict:
    """Populations plus parity fringe combined into a Bell-fidelity estimate."""
    if phi_grid is None:
        phi_grid = np.linspace(0, np.pi, 20, endpoint=False)
    if state is None:
        if params is not None:
            state = evolve_ms(basis_state((4, 4), (0, 0)), motion or MotionState(), params, params.tau)
        else:
            state = ideal_bell_preparation()
    # the population run uses a stream disjoint from the parity points
    p00, p11 = measured_pair_populations(state, shots, noise, seed, key=(len(phi_grid) + 1,), apply_spam=apply_spam)
    scan = parity_scan(phi_grid, shots, noise, seed, state=state, omega_rabi=omega_rabi, apply_spam=apply_spam)
    fit = fit_parity(scan, n_bootstrap=n_bootstrap, seed=seed)
    F = bell_fidelity(p00.value, p11.value, np.clip(fit["A"], -1, 1))
    F_err = 0.5 * np.sqrt(p00.stderr**2 + p11.stderr**2 + fit.errors["A"] ** 2)
    return {"P00": p00, "P11": p11, "scan": scan, "fit": fit, "fidelity": Estimate(F, float(F_err)),
            "coherence": fit["A"] / 2}
