import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ququart.fitting import (
    bell_fidelity,
    damped_sine,
    first_maximum,
    first_maximum_estimate,
    fit_damped_sine,
    fit_parity,
    parity_model,
)
from ququart.ms import ScanResult

X = np.linspace(0, 100e-6, 41)
TRUE = dict(amplitude=0.45, frequency=25e3, phase=-np.pi / 2, decay=300e-6, offset=0.5)


def exact_scan(y, x=X, parameter="tau", curve="P1"):
    return ScanResult(parameter, x, {curve: y}, {curve: np.zeros_like(y)}, shots=0)


def sampled_scan(p, shots, seed, x=X, curve="P1"):
    rng = np.random.default_rng(seed)
    hits = rng.binomial(shots, np.clip(p, 0, 1))
    q = (hits + 0.5) / (shots + 1)
    return ScanResult("tau", x, {curve: hits / shots}, {curve: np.sqrt(q * (1 - q) / shots)}, shots=shots)


def test_noiseless_round_trip():
    fit = fit_damped_sine(exact_scan(damped_sine(X, **TRUE)), n_bootstrap=0)
    assert fit.converged
    for k, v in TRUE.items():
        assert fit[k] == pytest.approx(v, rel=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 0.5), st.floats(15e3, 40e3), st.floats(100e-6, 2e-3))
def test_round_trip_over_parameter_range(amp, freq, decay):
    p = dict(amplitude=amp, frequency=freq, phase=-np.pi / 2, decay=decay, offset=0.5)
    fit = fit_damped_sine(exact_scan(damped_sine(X, **p)), n_bootstrap=0)
    assert fit.converged
    assert fit["frequency"] == pytest.approx(freq, rel=1e-6)
    assert fit["amplitude"] == pytest.approx(amp, rel=1e-6)


def test_first_maximum_of_known_curve():
    # with no decay the first maximum of 0.5 - 0.5 cos(w t) is at t = pi / w
    p = dict(amplitude=0.5, frequency=25e3, phase=-np.pi / 2, decay=np.inf, offset=0.5)
    t, v = first_maximum(p)
    assert t == pytest.approx(1 / (2 * 25e3))
    assert v == pytest.approx(1.0)
    # with decay the maximum moves earlier than the undamped half period
    t2, v2 = first_maximum(TRUE)
    assert t2 < t and v2 < 0.95
    grid = np.linspace(0, 40e-6, 400_001)
    assert v2 == pytest.approx(damped_sine(grid, **TRUE).max(), abs=1e-10)


def test_constant_data_is_flagged():
    fit = fit_damped_sine(exact_scan(np.full_like(X, 0.3)), n_bootstrap=0)
    assert not fit.converged
    with pytest.raises(ValueError):
        first_maximum_estimate(fit)


def test_too_few_points():
    with pytest.raises(ValueError):
        fit_damped_sine(exact_scan(np.full(5, 0.3), x=np.arange(5.0)))


def test_errors_and_bootstrap_agree_roughly():
    fit = fit_damped_sine(sampled_scan(damped_sine(X, **TRUE), 300, 4), n_bootstrap=100, seed=1)
    est = first_maximum_estimate(fit)
    assert est.stderr > 0 and est.bootstrap_stderr > 0
    assert 0.5 < est.bootstrap_stderr / est.stderr < 2
    assert fit.bootstrap_samples.shape == (100, 5)


def test_fit_is_deterministic():
    scan = sampled_scan(damped_sine(X, **TRUE), 300, 9)
    a = fit_damped_sine(scan, n_bootstrap=20, seed=3)
    b = fit_damped_sine(scan, n_bootstrap=20, seed=3)
    assert a.to_dict() == b.to_dict()


def test_parity_fit_exact():
    phi = np.linspace(0, np.pi, 20, endpoint=False)
    fit = fit_parity(exact_scan(parity_model(phi, 0.62, 0.4), x=phi, parameter="phi", curve="parity"), n_bootstrap=0)
    assert fit["A"] == pytest.approx(0.62, abs=1e-12)
    assert fit["phi0"] == pytest.approx(0.4, abs=1e-12)


def test_parity_fit_with_shot_noise():
    phi = np.linspace(0, np.pi, 20, endpoint=False)
    q = (1 - parity_model(phi, 0.62, 0.4)) / 2
    rng = np.random.default_rng(0)
    hits = rng.binomial(300, q)
    par = 1 - 2 * hits / 300
    err = 2 * np.sqrt(q * (1 - q) / 300)
    scan = ScanResult("phi", phi, {"parity": par}, {"parity": err}, shots=300)
    fit = fit_parity(scan, n_bootstrap=0)
    assert abs(fit["A"] - 0.62) < 3 * fit.errors["A"] + 1e-3


def test_bell_fidelity_formula():
    assert bell_fidelity(0.5, 0.5, 1.0) == pytest.approx(1.0)
    assert bell_fidelity(0.45, 0.4, 0.7) == pytest.approx(0.425 + 0.35)
    with pytest.raises(ValueError):
        bell_fidelity(0.7, 0.5, 0.1)
    with pytest.raises(ValueError):
        bell_fidelity(0.5, 0.5, 1.2)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        F = bell_fidelity(0.5, 0.5, 1 + 1e-12)
    assert F == 1.0 and w
