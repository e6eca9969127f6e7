import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ququart.core import DensityMatrix, QuditState, basis_state, partial_trace
from ququart.gates import Rotation, rotation_matrix
from ququart.noise import (
    NoiseModel,
    ShotRecord,
    apply_dephasing,
    camera_readout,
    crosstalk_expand,
    driven_superoperator,
    estimate_populations,
    infinite_shot_records,
    noisy_pulse,
    sample_categorical,
    shelving_probabilities,
    shelving_readout,
)

OMEGA = 2 * np.pi * 25e3


def random_rho(d, seed, n=1):
    rng = np.random.default_rng(seed)
    m = d**n
    G = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    rho = G @ G.conj().T
    return DensityMatrix((d,) * n, rho / np.trace(rho).real)


def damped_rabi(t, omega, gamma):
    mu = np.sqrt(omega**2 - gamma**2 / 4)
    return 0.5 * (1 - np.exp(-gamma * t / 2) * (np.cos(mu * t) + gamma / (2 * mu) * np.sin(mu * t)))


def test_default_noise_model():
    n = NoiseModel()
    assert n.crosstalk_fraction == 0.10
    assert NoiseModel.noiseless().crosstalk_fraction == 0.0
    with pytest.raises(ValueError):
        NoiseModel(crosstalk_fraction=0.5)
    with pytest.raises(ValueError):
        NoiseModel(spam=(0.1, 1.2))
    with pytest.raises(ValueError):
        NoiseModel(laser_dephasing_rate=-1)


def test_field_noise_spares_clock_levels():
    n = NoiseModel.from_field_noise(0.01, 1e-3)
    rates = n.level_rates(4)
    assert rates[0] == rates[1] == 0
    assert rates[2] == pytest.approx(rates[3]) and rates[2] > 0


def test_coherence_decay_rates_structure():
    n = NoiseModel(dephasing_rate_per_level=(0, 1, 2, 3), laser_dephasing_rate=10)
    G = n.coherence_decay_rates(4)
    assert G[0, 1] == 11 and G[0, 3] == 13
    assert G[2, 3] == 5
    assert np.all(np.diag(G) == 0)
    np.testing.assert_array_equal(G, G.T)


def test_dephasing_keeps_populations_and_damps_coherences():
    rho = random_rho(4, 1)
    n = NoiseModel(dephasing_rate_per_level=(0, 0, 100, 100))
    out = apply_dephasing(rho, n, 1e-3)
    np.testing.assert_allclose(np.diag(out.elements), np.diag(rho.elements))
    assert out.elements[2, 3] == pytest.approx(rho.elements[2, 3] * np.exp(-0.2))
    assert out.elements[0, 1] == pytest.approx(rho.elements[0, 1])


def test_superoperator_without_noise_is_the_rotation():
    L = driven_superoperator(4, (0, 2), 0.3, OMEGA, NoiseModel.noiseless(), 7e-6)
    R = rotation_matrix(2, 0.3, OMEGA * 7e-6)
    # row-major vectorization: vec(R rho R^dag) = (R kron R^*) vec(rho)
    np.testing.assert_allclose(L, np.kron(R, R.conj()), atol=1e-12)


@pytest.mark.parametrize("gamma", [0.0, 2e3, 3e4])
def test_dephased_rabi_matches_closed_form(gamma):
    noise = NoiseModel(laser_dephasing_rate=gamma, crosstalk_fraction=0.0)
    rho0 = basis_state((4,), (0,))
    for t in np.linspace(0, 60e-6, 7):
        rho = noisy_pulse(rho0, Rotation(0, (0, 1), 0.0, OMEGA * t), OMEGA, noise)
        assert rho.elements[1, 1].real == pytest.approx(damped_rabi(t, OMEGA, gamma), abs=1e-12)


def test_crosstalk_rotates_neighbour():
    pulses = crosstalk_expand(Rotation(0, (0, 1), 0.2, np.pi), 0.1)
    assert pulses[1] == Rotation(1, (0, 1), 0.2, 0.1 * np.pi)
    assert crosstalk_expand(Rotation(1, (0, 1), 0, 1.0), 0.1)[1].ion == 0
    rho = noisy_pulse(basis_state((4, 4), (0, 0)), Rotation(0, (0, 1), 0, np.pi), OMEGA, NoiseModel())
    p_neighbour = partial_trace(rho, [1]).elements[1, 1].real
    assert p_neighbour == pytest.approx(np.sin(0.1 * np.pi / 2) ** 2, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_shelving_pattern_probabilities(seed, level):
    rho = random_rho(4, seed)
    p = np.real(np.diag(rho.elements))
    DD, DB, BB = shelving_probabilities(rho, level)
    assert DB == pytest.approx(p[level], abs=1e-12)
    assert BB == pytest.approx(p[0], abs=1e-12)
    assert DD == pytest.approx(1 - p[0] - p[level], abs=1e-12)


def test_transfer_error_leaves_population_dark():
    psi = basis_state((4,), (2,))
    probs = shelving_probabilities(psi, 2, noise=NoiseModel(transfer_error=0.1))
    assert probs[1] == pytest.approx(np.sin(np.pi * 1.1 / 2) ** 2)


def test_shelving_readout_exact_mode_and_determinism():
    psi = QuditState((4,), np.array([1, 0, 1, 0]) / np.sqrt(2))
    exact = shelving_readout(psi, 2, 0, None)
    assert exact.estimate == pytest.approx(0.5) and exact.stderr == 0
    a = shelving_readout(psi, 2, 1000, 42)
    b = shelving_readout(psi, 2, 1000, 42)
    np.testing.assert_array_equal(a.outcomes, b.outcomes)
    c = shelving_readout(psi, 2, 1000, 42, key=(1,))
    assert not np.array_equal(a.outcomes, c.outcomes)
    # a (dark, bright) pattern is the only hit; bright-first ions stay bright
    for row, hit in zip(a.outcomes, (~a.outcomes[:, 0]) & a.outcomes[:, 1]):
        if row[0]:
            assert row[1]
    assert a.hits == int(((~a.outcomes[:, 0]) & a.outcomes[:, 1]).sum())


def test_spam_flips_outcomes():
    rec = shelving_readout(basis_state((4,), (0,)), 0, 20_000, 1, NoiseModel(spam=(0.1, 0.0)))
    assert rec.estimate == pytest.approx(0.9, abs=0.01)


def test_sampling_independent_of_worker_count():
    probs = [0.1, 0.2, 0.3, 0.4]
    a = sample_categorical(probs, 30_000, 5, key=(3,), workers=1)
    b = sample_categorical(probs, 30_000, 5, key=(3,), workers=4)
    np.testing.assert_array_equal(a, b)


def test_camera_readout_of_bell_state():
    v = np.zeros(16, dtype=complex)
    v[0] = v[5] = 1 / np.sqrt(2)
    bell = QuditState((4, 4), v)
    assert camera_readout(bell, 0, None).exact == pytest.approx(0.0)
    rec = camera_readout(bell, 2000, 3)
    assert rec.hits == 0
    assert rec.outcomes.shape == (2000, 2)
    assert abs(rec.outcomes[:, 0].mean() - 0.5) < 0.05


def test_shot_record_round_trip():
    rec = shelving_readout(basis_state((4,), (1,)), 1, 50, 9)
    back = ShotRecord.from_dict(rec.to_dict())
    assert back.hits == rec.hits == 50
    np.testing.assert_array_equal(back.outcomes, rec.outcomes)
    assert rec.counts() == {"DB": 50}
    with pytest.raises(ValueError):
        ShotRecord("x", 1, 2, 0, np.zeros((2, 2)), hits=3)


def test_population_estimator_complement():
    rho = random_rho(4, 3)
    p = np.real(np.diag(rho.elements))
    est, err = estimate_populations(infinite_shot_records(rho, 4))
    np.testing.assert_allclose(est, p, atol=1e-12)
    assert np.all(err == 0)
    recs = {k: shelving_readout(rho, k, 500, 1, key=(k,)) for k in (1, 2, 3)}
    est, err = estimate_populations(recs, d=4)
    assert sum(est) == pytest.approx(1.0, abs=1e-15)
    assert err[0] == pytest.approx(np.sqrt(sum(e**2 for e in err[1:])))
    with pytest.raises(ValueError):
        estimate_populations({1: recs[1]}, d=4)
