import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcevocem.expfam import (
    DiagGaussian,
    DiagGaussianPotential,
    DimensionError,
    DomainError,
    FixedVarianceGaussian,
    SquaredNorm,
    bregman_divergence,
    log_likelihood,
    mean_to_natural,
    natural_to_mean,
)


def central_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def random_diag_natural(rng, d):
    mu = rng.uniform(-2, 2, d)
    s2 = rng.uniform(0.2, 3.0, d)
    return np.concatenate([mu / s2, -0.5 / s2])


# potential -> sampler of points in its natural domain
POTENTIALS = {
    "squared": (SquaredNorm(3), lambda rng: rng.normal(size=3)),
    "fixed_var": (FixedVarianceGaussian([0.5, 2.0, 1.0]), lambda rng: rng.normal(size=3) * 2),
    "diag_gauss": (DiagGaussianPotential(2), lambda rng: random_diag_natural(rng, 2)),
}


def test_squared_norm_divergence_is_squared_distance():
    assert bregman_divergence(SquaredNorm(2), [1, 2], [0, 0]) == pytest.approx(5.0)


@pytest.mark.parametrize("name", list(POTENTIALS))
def test_self_divergence_is_zero(name):
    pot, draw = POTENTIALS[name]
    x = draw(np.random.default_rng(0))
    assert bregman_divergence(pot, x, x) == pytest.approx(0.0, abs=1e-12)


def test_fixed_variance_conjugate_divergence_hand_value():
    dual = FixedVarianceGaussian([1.0, 1.0]).dual()
    d = bregman_divergence(dual, [0, 0], [3, 4])
    assert d == pytest.approx(12.5, rel=1e-12)

    # same number from the definition with a finite-difference gradient
    f = lambda e: 0.5 * float(e @ e)
    x, y = np.array([0.0, 0.0]), np.array([3.0, 4.0])
    fd = f(x) - f(y) - (x - y) @ central_grad(f, y)
    assert d == pytest.approx(fd, rel=1e-6)


def test_dimension_mismatch_raises():
    with pytest.raises(DimensionError):
        bregman_divergence(SquaredNorm(2), [1, 2, 3], [0, 0])


def test_out_of_domain_raises():
    pot = DiagGaussianPotential(1)
    with pytest.raises(DomainError):
        bregman_divergence(pot, [0.0, -1.0], [0.0, 0.5])
    with pytest.raises(DomainError):
        mean_to_natural(pot, [1.0, 0.5])  # eta2 < eta1^2: negative variance


def test_natural_to_mean_identity_for_unit_variance():
    pot = FixedVarianceGaussian.isotropic(4, 1.0)
    theta = np.array([0.3, -1.2, 2.0, 0.0])
    np.testing.assert_allclose(natural_to_mean(pot, theta), theta)


def test_natural_parameters_hand_value_d1():
    g = DiagGaussian([2.0], [4.0])
    np.testing.assert_allclose(g.natural(), [0.5, -0.125])


@pytest.mark.parametrize("name", list(POTENTIALS))
def test_coordinate_round_trip(name):
    pot, draw = POTENTIALS[name]
    rng = np.random.default_rng(1)
    for _ in range(50):
        theta = draw(rng)
        back = mean_to_natural(pot, natural_to_mean(pot, theta))
        np.testing.assert_allclose(back, theta, rtol=1e-8, atol=1e-8)


def test_diag_gaussian_natural_round_trip():
    rng = np.random.default_rng(2)
    for _ in range(100):
        g = DiagGaussian(rng.uniform(-5, 5, 3), rng.uniform(0.01, 10, 3))
        h = DiagGaussian.from_natural(g.natural())
        np.testing.assert_allclose(h.mean, g.mean, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(h.variance, g.variance, rtol=1e-10)
        k = DiagGaussian.from_mean_params(g.mean_params())
        np.testing.assert_allclose(k.variance, g.variance, rtol=1e-8)


def test_variance_floor():
    g = DiagGaussian([0.0, 0.0], [1e-12, 1.0])
    assert g.variance[0] == 1e-6
    with pytest.raises(DomainError):
        DiagGaussian([0.0], [0.0])


def test_full_potential_mean_block_matches_diag_gaussian():
    g = DiagGaussian([1.5, -0.5], [0.3, 2.0])
    pot = DiagGaussianPotential(2)
    np.testing.assert_allclose(natural_to_mean(pot, g.natural()), g.mean_params(), rtol=1e-12)


def test_fixed_variance_hessian_is_inverse_variance():
    pot = FixedVarianceGaussian([0.25, 4.0])
    np.testing.assert_allclose(pot.hess_psi_star(np.zeros(2)), [4.0, 0.25])


def test_log_likelihood_zero_at_origin_unit_variance():
    pot = FixedVarianceGaussian([1.0])
    assert log_likelihood(pot, [0.0], [0.0]) == 0.0
    assert pot.psi(np.zeros(1)) == 0.0


@pytest.mark.parametrize("name", list(POTENTIALS))
def test_log_likelihood_maximised_at_matched_moments(name):
    pot, draw = POTENTIALS[name]
    rng = np.random.default_rng(3)
    for _ in range(100):
        theta, other = draw(rng), draw(rng)
        x = pot.grad_psi(theta)
        assert log_likelihood(pot, theta, x) - log_likelihood(pot, other, x) >= -1e-12


def test_log_likelihood_ranking_matches_divergence_ranking():
    pot = DiagGaussianPotential(2)
    rng = np.random.default_rng(4)
    for _ in range(20):
        workers = [random_diag_natural(rng, 2) for _ in range(5)]
        x = pot.grad_psi(random_diag_natural(rng, 2))
        target = pot.grad_psi_star(x)
        ll = [log_likelihood(pot, t, x) for t in workers]
        neg_div = [-bregman_divergence(pot, t, target) for t in workers]
        assert np.argsort(ll).tolist() == np.argsort(neg_div).tolist()


def test_log_likelihood_dimension_mismatch():
    with pytest.raises(DimensionError):
        log_likelihood(SquaredNorm(2), [0.0, 0.0], [1.0])


# -- properties ---------------------------------------------------------------


@pytest.mark.parametrize("name", list(POTENTIALS))
def test_nonnegativity_1000_pairs(name):
    pot, draw = POTENTIALS[name]
    rng = np.random.default_rng(5)
    for _ in range(1000):
        x, y = draw(rng), draw(rng)
        d = bregman_divergence(pot, x, y)
        assert d >= 0
        if not np.allclose(x, y):
            assert d > 1e-9


@pytest.mark.parametrize("name", list(POTENTIALS))
def test_duality(name):
    pot, draw = POTENTIALS[name]
    dual = pot.dual()
    rng = np.random.default_rng(6)
    for _ in range(200):
        t, t2 = draw(rng), draw(rng)
        lhs = bregman_divergence(pot, t, t2)
        rhs = bregman_divergence(dual, pot.grad_psi(t2), pot.grad_psi(t))
        assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-8)


@pytest.mark.parametrize("name", list(POTENTIALS))
def test_gradients_match_finite_differences(name):
    pot, draw = POTENTIALS[name]
    rng = np.random.default_rng(7)
    for _ in range(20):
        theta = draw(rng)
        np.testing.assert_allclose(pot.grad_psi(theta), central_grad(pot.psi, theta), atol=1e-5, rtol=1e-5)
        eta = pot.grad_psi(theta)
        np.testing.assert_allclose(
            pot.grad_psi_star(eta), central_grad(pot.psi_star, eta), atol=1e-5, rtol=1e-5
        )


@pytest.mark.parametrize("name", list(POTENTIALS))
def test_conjugate_hessian_matches_finite_differences(name):
    pot, draw = POTENTIALS[name]
    rng = np.random.default_rng(8)
    for _ in range(20):
        eta = pot.grad_psi(draw(rng))
        h = pot.hess_psi_star(eta)
        h = np.diag(h) if h.ndim == 1 else h
        fd = np.column_stack(
            [central_grad(lambda e, i=i: pot.grad_psi_star(e)[i], eta) for i in range(pot.dim)]
        )
        np.testing.assert_allclose(h, fd, atol=1e-4, rtol=1e-4)


def test_fenchel_young_equality():
    pot = DiagGaussianPotential(3)
    rng = np.random.default_rng(9)
    for _ in range(50):
        theta = random_diag_natural(rng, 3)
        eta = pot.grad_psi(theta)
        assert pot.psi(theta) + pot.psi_star(eta) == pytest.approx(theta @ eta, rel=1e-10, abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
    st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
    st.lists(st.floats(1e-3, 1e3), min_size=3, max_size=3),
)
def test_fixed_variance_divergence_is_scaled_squared_distance(x, y, s2):
    pot = FixedVarianceGaussian(s2)
    x, y, s2 = map(np.asarray, (x, y, s2))
    expected = 0.5 * np.sum(s2 * (x - y) ** 2)
    assert bregman_divergence(pot, x, y) == pytest.approx(expected, rel=1e-8, abs=1e-6)
