"""Generator and divergence checks against closed forms and finite
differences.  Expected values are evaluated from the defining formulas
inside each test, never copied from the implementation."""

import numpy as np
import pytest

from bhlr.divergence import GeneratingFunction, make_generator
from bhlr.errors import ConfigError, DomainError, LengthMismatch

from conftest import ALL_KEYS, interior_points


# closed-form pointwise divergences, written straight from their textbook
# definitions; these are the independent oracle for the generic d(a, b)
def _d_closed(key, a, b):
    if key == "logistic":
        def xlx(t):
            return t * np.log(t) if t > 0 else 0.0
        return (-a * np.log(b) - (1 - a) * np.log(1 - b)
                + xlx(a) + xlx(1 - a))
    if key == "kl":
        return a * np.log(a / b) - (a - b)
    if key.startswith("beta"):
        be = float(key.split(":")[1])
        return (a ** (1 + be) / (be * (1 + be)) - a * b ** be / be
                + b ** (1 + be) / (1 + be))
    if key == "itakura-saito":
        return a / b - np.log(a / b) - 1.0
    if key == "inverse":
        return (a - b) ** 2 / (a * b * b)
    if key == "quadratic":
        return 0.5 * (a - b) ** 2
    if key == "exponential":
        return np.exp(a) - (a - b + 1.0) * np.exp(b)
    if key == "dual-logistic":
        return (np.log((1 + np.exp(a)) / (1 + np.exp(b)))
                - (a - b) * np.exp(b) / (1 + np.exp(b)))
    raise KeyError(key)


class TestPhiValues:
    def test_quadratic_at_two(self):
        g = make_generator("quadratic")
        assert g.phi(2.0) == (4.0 - 2.0) / 2.0

    def test_kl_at_one_without_offset(self):
        g = make_generator("kl", epsilon=0.0)
        assert g.phi(1.0) == pytest.approx(1.0 * np.log(1.0) - 1.0, abs=0)

    def test_logistic_boundary_convention(self):
        g = make_generator("logistic")
        assert g.phi(0.0) == 0.0
        assert g.phi(1.0) == 0.0

    def test_kl_offset_applies(self):
        g = make_generator("kl")   # default eps = 1e-4
        x = 0.5
        assert g.phi(x) == pytest.approx(x * np.log(x + 1e-4) - x, rel=1e-15)

    def test_kl_zero_is_finite(self):
        assert make_generator("kl", epsilon=0.0).phi(0.0) == 0.0


class TestDerivatives:
    def test_quadratic_closed_forms(self):
        g = make_generator("quadratic")
        assert g.phi_grad(3.0) == 3.0 - 0.5
        assert g.phi_hess(3.0) == 1.0

    def test_exponential_at_zero(self):
        g = make_generator("exponential")
        assert g.phi_grad(0.0) == 1.0
        assert g.phi_hess(0.0) == 1.0

    def test_beta_one_hessian_is_one(self, rng):
        g = make_generator("beta:1")
        x = rng.uniform(0.1, 5.0, size=20)
        np.testing.assert_allclose(g.phi_hess(x), 1.0, rtol=0, atol=0)

    @pytest.mark.parametrize("key", ALL_KEYS)
    def test_finite_difference_consistency(self, key, rng):
        g = make_generator(key)
        x = interior_points(g, rng, 50)
        h = 1e-5 * np.maximum(1.0, np.abs(x))
        grad_num = (g.phi(x + h) - g.phi(x - h)) / (2 * h)
        hess_num = (g.phi_grad(x + h) - g.phi_grad(x - h)) / (2 * h)
        np.testing.assert_allclose(g.phi_grad(x), grad_num, rtol=1e-6)
        np.testing.assert_allclose(g.phi_hess(x), hess_num, rtol=1e-6)

    @pytest.mark.parametrize("key", ALL_KEYS)
    def test_strict_convexity_on_samples(self, key, rng):
        g = make_generator(key)
        assert np.all(g.phi_hess(interior_points(g, rng, 200)) > 0)

    def test_kl_grad_at_zero_without_offset(self):
        with pytest.raises(DomainError):
            make_generator("kl", epsilon=0.0).phi_grad(0.0)


class TestPointwiseDivergence:
    def test_quadratic_example(self):
        assert make_generator("quadratic").d(3.0, 1.0) == pytest.approx(2.0, abs=1e-15)

    @pytest.mark.parametrize("key", ALL_KEYS)
    def test_identity_case(self, key):
        assert abs(make_generator(key).d(0.5, 0.5)) <= 1e-12

    def test_logistic_boundary_a(self):
        d = make_generator("logistic").d(1.0, 0.5)
        assert d == pytest.approx(-np.log(0.5), rel=1e-14)

    def test_beta_one_equals_quadratic(self, rng):
        gb = make_generator("beta:1")
        gq = make_generator("quadratic")
        a = rng.uniform(0.1, 10.0, size=200)
        b = rng.uniform(0.1, 10.0, size=200)
        # identical functions, evaluated through powers vs squares: equal up
        # to rounding of the O(10)-magnitude intermediates
        np.testing.assert_allclose(gb.d(a, b), gq.d(a, b), rtol=1e-12, atol=1e-12)
        assert gb.d(3.0, 1.0) == pytest.approx(2.0, rel=1e-14)

    @pytest.mark.parametrize("key", ALL_KEYS)
    def test_matches_closed_form_column(self, key, rng):
        g = make_generator(key, epsilon=0.0 if key == "kl" else None)
        lo = max(g.lo, -2.0) + 0.05
        hi = min(g.hi, 2.0) - 0.05
        for _ in range(50):
            a, b = rng.uniform(lo, hi, size=2)
            assert g.d(a, b) == pytest.approx(_d_closed(key, a, b),
                                              rel=1e-9, abs=1e-12)

    @pytest.mark.parametrize("key", ALL_KEYS)
    def test_non_negativity(self, key, rng):
        g = make_generator(key)
        a = interior_points(g, rng, 300)
        b = interior_points(g, rng, 300)
        assert np.all(g.d(a, b) >= 0.0)

    def test_affine_term_does_not_matter(self, rng):
        # the generator carries a linear term, yet d is the pure square
        g = make_generator("quadratic")
        a = rng.standard_normal(100)
        b = rng.standard_normal(100)
        np.testing.assert_allclose(g.d(a, b), 0.5 * (a - b) ** 2,
                                   rtol=1e-12, atol=1e-15)

    def test_beta_limit_is_kl(self, rng):
        gb = make_generator("beta:1e-4")
        gk = make_generator("kl", epsilon=0.0)
        a = rng.uniform(0.1, 10.0, size=200)
        b = rng.uniform(0.1, 10.0, size=200)
        np.testing.assert_allclose(gb.d(a, b), gk.d(a, b), rtol=1e-3)


class TestAggregateDivergence:
    def test_quadratic_pair(self):
        g = make_generator("quadratic")
        assert g.mean_divergence([3.0, 1.0], [1.0, 1.0]) == pytest.approx(1.0)

    @pytest.mark.parametrize("key", ALL_KEYS)
    def test_zero_at_equality(self, key, rng):
        g = make_generator(key)
        a = interior_points(g, rng, 20)
        assert g.mean_divergence(a, a) == 0.0

    def test_kl_single_entry(self):
        g = make_generator("kl", epsilon=0.0)
        assert g.mean_divergence([2.0], [1.0]) == pytest.approx(
            2.0 * np.log(2.0) - 1.0, rel=1e-14)

    def test_length_mismatch(self):
        g = make_generator("quadratic")
        with pytest.raises(LengthMismatch):
            g.mean_divergence([1.0, 2.0], [1.0])
        with pytest.raises(LengthMismatch):
            g.mean_divergence([], [])


class TestExpFamilyCoeffs:
    def test_quadratic_at_one(self):
        z1, z2 = make_generator("quadratic").exp_family_coeffs(1.0)
        assert z1 == 0.5
        assert z2 == pytest.approx(0.0 - 1.0 * 0.5)

    def test_kl_at_one(self):
        z1, z2 = make_generator("kl", epsilon=0.0).exp_family_coeffs(1.0)
        assert z1 == 0.0
        assert z2 == -1.0

    @pytest.mark.parametrize("key", ALL_KEYS)
    def test_definitional_identity(self, key, rng):
        g = make_generator(key)
        mu = interior_points(g, rng, 20)
        z1, z2 = g.exp_family_coeffs(mu)
        np.testing.assert_allclose(z2, g.phi(mu) - mu * z1, rtol=1e-12, atol=1e-12)


class TestDomainsAndParsing:
    def test_domains_match_table(self):
        expect = {
            "logistic": (0.0, 1.0), "kl": (0.0, np.inf), "beta:2": (0.0, np.inf),
            "itakura-saito": (0.0, np.inf), "inverse": (0.0, np.inf),
            "quadratic": (-np.inf, np.inf), "exponential": (-np.inf, np.inf),
            "dual-logistic": (-np.inf, np.inf),
        }
        for key, (lo, hi) in expect.items():
            g = make_generator(key)
            assert (g.lo, g.hi) == (lo, hi)
        assert make_generator("logistic").lo_closed
        assert make_generator("logistic").hi_closed
        assert make_generator("kl").lo_closed
        assert not make_generator("itakura-saito").lo_closed

    def test_out_of_domain_raises(self):
        with pytest.raises(DomainError):
            make_generator("logistic").phi(1.5)
        with pytest.raises(DomainError):
            make_generator("itakura-saito").phi(0.0)

    def test_tolerance_pulls_back_to_boundary(self):
        g = make_generator("logistic")
        assert g.phi(1.0 + 1e-12, tol=1e-9) == g.phi(1.0)
        with pytest.raises(DomainError):
            g.phi(1.0 + 1e-6, tol=1e-9)

    def test_key_parsing(self):
        assert make_generator("beta:0.5").beta == 0.5
        assert make_generator("kl").epsilon == 1e-4
        with pytest.raises(ConfigError):
            make_generator("nope")
        with pytest.raises(ConfigError):
            make_generator("beta")
        with pytest.raises(ConfigError):
            GeneratingFunction("beta", beta=-1.0)
        with pytest.raises(ConfigError):
            GeneratingFunction("quadratic", epsilon=0.1)
