import numpy as np
import pytest

from ququart.core import basis_state, fidelity
from ququart.experiments import (
    analysis_pulse,
    bell_experiment,
    bell_state,
    exact_rabi_population,
    ideal_bell_preparation,
    laser_rate_for_first_maximum,
    ms_scan,
    parity_scan,
    rabi_fidelity,
    rabi_scan,
    synthetic_parity_state,
    true_first_maximum,
)
from ququart.fitting import fit_damped_sine, fit_parity
from ququart.ms import MotionState, evolve_ms, params_for_duration
from ququart.noise import NoiseModel

OMEGA = 2 * np.pi * 25e3
PHIS = np.linspace(0, np.pi, 20, endpoint=False)


def test_ideal_preparation_is_bell_state():
    assert fidelity(ideal_bell_preparation(), bell_state()) == pytest.approx(1.0, abs=1e-14)


def test_parity_of_ideal_bell_is_sin_two_phi():
    scan = parity_scan(PHIS, 0)
    np.testing.assert_allclose(scan["parity"], np.sin(2 * PHIS), atol=1e-12)


@pytest.mark.parametrize("A,phi0", [(1.0, 0.0), (0.62, 0.4), (0.3, -1.1)])
def test_synthetic_state_parity(A, phi0):
    fit = fit_parity(parity_scan(PHIS, 0, state=synthetic_parity_state(A, phi0)), n_bootstrap=0)
    assert fit["A"] == pytest.approx(A, abs=1e-12)
    wrapped = (fit["phi0"] - phi0 + np.pi / 2) % np.pi - np.pi / 2
    assert wrapped == pytest.approx(0.0, abs=1e-12)


def test_phase_grid_must_cover_pi():
    with pytest.raises(ValueError):
        parity_scan(np.linspace(0, 1.0, 10), 0)


def test_analysis_pulse_with_noise_reduces_contrast():
    rho = analysis_pulse(bell_state(), 0.3, NoiseModel(laser_dephasing_rate=5e4), OMEGA)
    clean = analysis_pulse(bell_state(), 0.3)
    assert rho.purity() < clean.purity()


def test_rabi_scan_exact_mode_matches_single_ion_model():
    noise = NoiseModel(laser_dephasing_rate=3e3)
    grid = np.linspace(0, 80e-6, 9)
    scan = rabi_scan(0, 3, grid, 0, noise, 0, OMEGA)
    expected = [exact_rabi_population(3, t, OMEGA, noise) for t in grid]
    np.testing.assert_allclose(scan["P3"], expected, atol=1e-12)
    # crosstalk drives the neighbour by a tenth of the angle
    assert scan["neighbour_P3"][2] == pytest.approx(np.sin(0.1 * OMEGA * grid[2] / 2) ** 2, abs=1e-3)


def test_rabi_scan_limits():
    with pytest.raises(ValueError):
        rabi_scan(0, 1, [0, 300e-6], 10, None, 0, OMEGA)
    with pytest.raises(ValueError):
        rabi_scan(0, 1, [0, 1e-6], 10, None, 0, None)


def test_rabi_scan_is_reproducible():
    grid = np.linspace(0, 80e-6, 11)
    a = rabi_scan(1, 2, grid, 100, NoiseModel(), 5, OMEGA)
    b = rabi_scan(1, 2, grid, 100, NoiseModel(), 5, OMEGA)
    np.testing.assert_array_equal(a["P2"], b["P2"])


def test_laser_rate_calibration():
    rate = laser_rate_for_first_maximum(0.9, 1, OMEGA)
    _, p = true_first_maximum(1, OMEGA, NoiseModel(laser_dephasing_rate=rate))
    assert p == pytest.approx(0.9, abs=1e-9)
    with pytest.raises(ValueError):
        laser_rate_for_first_maximum(1.2, 1, OMEGA)


def test_rabi_fidelity_exact_curve():
    noise = NoiseModel(laser_dephasing_rate=4e3)
    scan = rabi_scan(0, 1, np.linspace(0, 100e-6, 41), 0, noise, 0, OMEGA)
    est = rabi_fidelity(fit_damped_sine(scan, "P1", n_bootstrap=0))
    assert est.value == pytest.approx(true_first_maximum(1, OMEGA, noise)[1], abs=1e-6)


def test_ms_scan_exact_and_sampled():
    params = params_for_duration(310e-6)
    grid = np.linspace(0, 2 * params.tau, 9)
    exact = ms_scan(params, grid, 0)
    sampled = ms_scan(params, grid, 2000, seed=1)
    for k in ("P00", "P01+P10", "P11"):
        assert np.all(np.abs(sampled[k] - exact[k]) < 5 * sampled.errors[k] + 1e-3)
    assert exact["P01+P10"][4] == pytest.approx(0.0, abs=1e-12)


def test_bell_experiment_thermal_gate():
    params = params_for_duration(310e-6)
    res = bell_experiment(PHIS, 0, params=params, motion=MotionState.thermal(0.079))
    rho = evolve_ms(basis_state((4, 4), (0, 0)), MotionState.thermal(0.079), params, params.tau)
    rho_F = fidelity(rho, bell_state())
    assert res["fidelity"].value == pytest.approx(rho_F, abs=1e-9)
    assert res["coherence"] == pytest.approx(res["fit"]["A"] / 2)
