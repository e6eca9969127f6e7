import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ququart.core import (
    DensityMatrix,
    DimensionError,
    QuditState,
    ValidationError,
    apply_unitary,
    basis_state,
    embed_operator,
    fidelity,
    flat_index,
    marginal_populations,
    partial_trace,
    populations,
    state_fidelity,
    tensor,
    unflatten_index,
)

dims_st = st.lists(st.integers(2, 6), min_size=1, max_size=3)


def random_state(dims, seed):
    rng = np.random.default_rng(seed)
    n = int(np.prod(dims))
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return QuditState(tuple(dims), v / np.linalg.norm(v))


def random_unitary(d, seed):
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_flat_index_is_row_major_with_first_qudit_most_significant():
    assert flat_index((4, 4), (1, 0)) == 4
    assert flat_index((4, 4), (0, 1)) == 1
    assert flat_index((2, 3), (1, 2)) == 5


@given(dims_st, st.data())
def test_index_round_trip(dims, data):
    levels = tuple(data.draw(st.integers(0, d - 1)) for d in dims)
    assert unflatten_index(dims, flat_index(dims, levels)) == levels


def test_dimension_limits():
    with pytest.raises(DimensionError):
        basis_state((7,), (0,))
    with pytest.raises(DimensionError):
        basis_state((1, 4), (0, 0))
    with pytest.raises(DimensionError):
        QuditState((4, 4), np.ones(15) / np.sqrt(15))


def test_validation_rejects_unnormalized_and_non_hermitian():
    with pytest.raises(ValidationError):
        QuditState((2,), [1, 1])
    with pytest.raises(ValidationError):
        DensityMatrix((2,), [[0.5, 0.1], [0.3, 0.5]])
    with pytest.raises(ValidationError):
        DensityMatrix((2,), [[1.5, 0], [0, -0.5]])


def test_states_are_immutable():
    s = basis_state((4,), (2,))
    with pytest.raises(ValueError):
        s.amplitudes[0] = 1


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(2, 5), min_size=2, max_size=3), st.integers(0, 10_000))
def test_apply_unitary_matches_kronecker(dims, seed):
    psi = random_state(dims, seed)
    target = seed % len(dims)
    U = random_unitary(dims[target], seed)
    full = embed_operator(dims, U, [target])
    ref = np.eye(1)
    for j, d in enumerate(dims):
        ref = np.kron(ref, U if j == target else np.eye(d))
    np.testing.assert_allclose(full, ref, atol=1e-13)
    out = apply_unitary(psi, U, [target])
    np.testing.assert_allclose(out.amplitudes, ref @ psi.amplitudes, atol=1e-12)
    rho = apply_unitary(psi.to_density_matrix(), U, [target])
    np.testing.assert_allclose(rho.elements, np.outer(out.amplitudes, out.amplitudes.conj()), atol=1e-12)


def test_two_qudit_operator_on_reversed_targets():
    dims = (3, 4)
    psi = random_state(dims, 3)
    U = random_unitary(12, 4)  # acts on (qudit 0, qudit 1) in that order
    direct = apply_unitary(psi, U, [0, 1]).amplitudes
    np.testing.assert_allclose(direct, U @ psi.amplitudes, atol=1e-12)
    # the same physical operator with targets listed the other way round
    V = U.reshape(3, 4, 3, 4).transpose(1, 0, 3, 2).reshape(12, 12)
    np.testing.assert_allclose(apply_unitary(psi, V, [1, 0]).amplitudes, direct, atol=1e-12)


def test_partial_trace_of_product_state():
    a, b = random_state((3,), 1), random_state((4,), 2)
    rho = tensor(a, b)
    np.testing.assert_allclose(partial_trace(rho, [0]).elements, a.to_density_matrix().elements, atol=1e-12)
    np.testing.assert_allclose(partial_trace(rho, [1]).elements, b.to_density_matrix().elements, atol=1e-12)
    with pytest.raises(ValueError):
        partial_trace(rho, [])


def test_populations_and_marginals():
    psi = QuditState((2, 4), np.array([0, 0, 0, 1, 0, 0, 0, 1]) / np.sqrt(2))
    p = populations(psi)
    assert p[3] == pytest.approx(0.5)
    np.testing.assert_allclose(marginal_populations(psi, 1), [0, 0, 0, 1])
    np.testing.assert_allclose(marginal_populations(psi, 0), [0.5, 0.5])


def test_fidelities_agree_for_pure_states():
    a, b = random_state((4,), 5), random_state((4,), 6)
    assert fidelity(a, b) == pytest.approx(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
    assert state_fidelity(a, b) == pytest.approx(fidelity(a, b), abs=1e-10)
    mixed = DensityMatrix.maximally_mixed((4,))
    assert state_fidelity(mixed, a) == pytest.approx(0.25, abs=1e-12)
    assert mixed.purity() == pytest.approx(0.25)
