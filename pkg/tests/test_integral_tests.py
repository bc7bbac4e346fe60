import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from levyfn import (
    AtInfinity,
    AtZeroPlus,
    Generic,
    PowerLaw,
    brownian_model,
    builtin_model,
    classify_boundary,
    constant_functional,
    explosion_test,
    extinction_test,
    improper_integral_verdict,
    stable_power_model,
    validate,
)
from levyfn.integral_tests import f_eval, laplace_density
from levyfn.errors import (
    NotApplicableError,
    PreconditionViolatedError,
    SignChangeError,
)


class TestVerdictEngine:
    def test_inverse_square_tail(self):
        v = improper_integral_verdict(lambda t: t**-2.0, AtInfinity(1.0))
        assert v.converges
        assert v.value == pytest.approx(1.0, rel=1e-6)

    def test_harmonic_tail_diverges(self):
        v = improper_integral_verdict(lambda t: 1.0 / t, AtInfinity(1.0))
        assert v.diverges
        assert v.value == math.inf

    def test_negative_integrand_at_zero(self):
        v = improper_integral_verdict(lambda s: 1.0 / (s - 1.0), AtZeroPlus(0.5))
        assert v.converges
        assert v.value == pytest.approx(math.log(0.5), abs=1e-9)

    def test_negative_divergence_sign(self):
        v = improper_integral_verdict(lambda s: -1.0 / s, AtZeroPlus(0.5))
        assert v.diverges
        assert v.value == -math.inf

    def test_exponential_early_stop(self):
        v = improper_integral_verdict(lambda t: math.exp(-t), AtInfinity(1.0))
        assert v.converges
        assert v.value == pytest.approx(math.exp(-1.0), rel=1e-9)

    def test_zero_integrand(self):
        v = improper_integral_verdict(lambda t: 0.0, AtInfinity(1.0))
        assert v.converges and v.value == 0.0

    def test_sign_change_raises(self):
        with pytest.raises(SignChangeError):
            improper_integral_verdict(math.sin, AtInfinity(1.0))

    def test_integrable_singularity_at_zero(self):
        v = improper_integral_verdict(lambda s: s**-0.5, AtZeroPlus(1.0))
        assert v.converges
        assert v.value == pytest.approx(2.0, rel=1e-6)

    def test_log_divergence_at_zero(self):
        v = improper_integral_verdict(lambda s: 1.0 / s, AtZeroPlus(1.0))
        assert v.diverges

    def test_boundary_zone_is_inconclusive(self):
        # local exponent -1.07: between the converge (<= -1.15) and
        # diverge (>= -1.05) thresholds
        v = improper_integral_verdict(lambda t: t**-1.07, AtInfinity(1.0))
        assert v.verdict == "inconclusive"
        assert v.value is None


class TestFunctionalSpecs:
    def test_power_law_requires_positive_theta(self):
        with pytest.raises(ValueError):
            PowerLaw(0.0)

    def test_laplace_density_of_power_law(self):
        # x^{-theta} = integral e^{-xz} z^{theta-1}/Gamma(theta) dz
        g = laplace_density(PowerLaw(1.5))
        from scipy.integrate import quad

        val, _ = quad(lambda z: math.exp(-2.0 * z) * g(z), 0.0, math.inf)
        assert val == pytest.approx(2.0**-1.5, rel=1e-8)

    def test_constant_functional(self):
        f = constant_functional(2.5)
        assert f_eval(f, 0.3) == 2.5
        assert f.decreasing and f.bounded_away_from_origin


class TestExtinction:
    @pytest.mark.parametrize("theta,want", [(1.0, "converges"), (1.5, "diverges")])
    def test_normalized_stable(self, theta, want):
        v = extinction_test(stable_power_model(1.5), PowerLaw(theta))
        assert v.verdict == want

    def test_pure_gaussian(self):
        m = validate(0.0, 1.0, __import__("levyfn").NoJumps())
        assert extinction_test(m, PowerLaw(0.5)).converges

    def test_analytic_shortcut_matches_engine(self):
        # a Generic wrapper of the same f bypasses the pure-power shortcut,
        # so this compares the doubling-panel engine with the exact integral
        m = stable_power_model(1.5)
        f = Generic(fn=lambda z: np.asarray(z, float) ** -1.0,
                    decreasing=True, bounded_away_from_origin=True)
        v_engine = extinction_test(m, f)
        v_exact = extinction_test(m, PowerLaw(1.0))
        assert v_engine.converges and v_exact.converges
        assert v_engine.diagnostics["route"] == "doubling_panels"
        assert v_exact.diagnostics["route"] == "analytic_power"
        assert v_engine.value == pytest.approx(v_exact.value, rel=1e-4)

    @pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
    def test_stable_benchmark(self, alpha):
        m = stable_power_model(alpha)
        for theta in (0.5, 1.0, alpha - 0.1, alpha, alpha + 0.5):
            v = extinction_test(m, PowerLaw(theta))
            assert v.converges == (theta < alpha), (alpha, theta, v.verdict)

    def test_unbounded_generic_rejected(self):
        f = Generic(fn=lambda z: z, decreasing=False, bounded_away_from_origin=False)
        with pytest.raises(PreconditionViolatedError):
            extinction_test(brownian_model(-1.0), f)

    @given(st.floats(0.2, 1.9), st.sampled_from(["stable15", "bmdrift", "bmup", "cpexp"]),
           st.floats(0.05, 20.0))
    def test_scaling_invariance(self, theta, name, kappa):
        # compare like with like: both sides through the panel engine (the
        # pure-power shortcut is trivially scale-free)
        model = builtin_model(name)

        def wrap(k):
            return Generic(fn=lambda z, kk=k: kk * np.asarray(z, float) ** (-theta),
                           decreasing=True, bounded_away_from_origin=True)

        base = extinction_test(model, wrap(1.0))
        scaled = extinction_test(model, wrap(kappa))
        assert scaled.verdict == base.verdict
        if base.converges:
            assert scaled.value == pytest.approx(kappa * base.value, rel=1e-6)

    @given(st.sampled_from(["stable15", "bmdrift", "bmup", "cpexp"]),
           st.floats(0.2, 1.8), st.floats(0.05, 0.8))
    def test_theta_monotonicity(self, name, theta, dec):
        model = builtin_model(name)
        hi = extinction_test(model, PowerLaw(theta))
        if hi.converges:
            lo = extinction_test(model, PowerLaw(max(theta - dec, 0.05)))
            assert lo.converges


class TestExplosion:
    def test_brownian_drift_values(self):
        m = brownian_model(-1.0)
        v = explosion_test(m, PowerLaw(2.0))
        assert v.converges
        assert v.value == pytest.approx(math.log(0.5), abs=1e-8)
        v = explosion_test(m, PowerLaw(1.0))
        assert v.diverges and v.value == -math.inf

    def test_not_applicable_without_root(self):
        with pytest.raises(NotApplicableError):
            explosion_test(stable_power_model(1.5), PowerLaw(1.0))

    def test_generic_needs_decreasing_flag(self):
        f = Generic(fn=lambda z: np.exp(np.asarray(z, float)), decreasing=False,
                    bounded_away_from_origin=False)
        with pytest.raises(PreconditionViolatedError):
            explosion_test(brownian_model(-1.0), f)

    def test_tail_route_on_generic(self):
        f = Generic(fn=lambda z: np.exp(-np.asarray(z, float)), decreasing=True,
                    bounded_away_from_origin=True)
        v = explosion_test(brownian_model(-1.0), f)
        assert v.diagnostics["route"] == "tail_integral"
        assert v.converges

    @pytest.mark.parametrize("name", ["bmdrift", "cpexp"])
    @pytest.mark.parametrize("theta", [1.5, 2.0, 3.0])
    def test_routes_agree(self, name, theta):
        model = builtin_model(name)
        a = explosion_test(model, PowerLaw(theta), route="tail_integral")
        b = explosion_test(model, PowerLaw(theta), route="laplace_zero")
        assert a.verdict == b.verdict == "converges"

    def test_route_disagreement_boundary(self):
        # theta = 1: tail integral of y^-1 is log-divergent, and so is the
        # Laplace route near 0
        m = builtin_model("cpexp")
        a = explosion_test(m, PowerLaw(1.0), route="tail_integral")
        b = explosion_test(m, PowerLaw(1.0), route="laplace_zero")
        assert a.diverges and b.diverges


class TestClassifyBoundary:
    def test_stable_theta_one(self):
        r = classify_boundary(stable_power_model(1.5), PowerLaw(1.0), 1.0)
        assert r.hit_prob == 1.0
        assert r.extinction_possible is True
        assert r.extinguishing_possible is False
        assert r.explosion_possible is False
        assert r.explosion_verdict is None

    def test_brownian_drift_theta_two(self):
        # theta = 2 sits exactly at the Gaussian exponent: the extinction
        # integral is log-divergent, so the hit branch only extinguishes,
        # while the surviving branch can explode
        r = classify_boundary(brownian_model(-1.0), PowerLaw(2.0), 1.0)
        assert r.hit_prob == pytest.approx(math.exp(-1.0), rel=1e-9)
        assert r.extinction_possible is False
        assert r.extinguishing_possible is True
        assert r.explosion_possible is True

    def test_brownian_drift_theta_one(self):
        r = classify_boundary(brownian_model(-1.0), PowerLaw(1.0), 1.0)
        assert r.extinction_possible is True
        assert r.explosion_possible is False

    def test_inconclusive_is_none_not_guess(self):
        r = classify_boundary(builtin_model("cpexp"), PowerLaw(1.9), 1.0)
        assert r.extinction_possible is None
        assert r.extinguishing_possible is None
        assert not r.decisive

    @given(st.sampled_from(["stable15", "bmdrift", "bmup", "cpexp"]),
           st.floats(0.3, 2.5), st.floats(0.1, 5.0))
    def test_invariants(self, name, theta, x):
        model = builtin_model(name)
        r = classify_boundary(model, PowerLaw(theta), x)
        assert r.hit_prob == pytest.approx(model.hit_probability(x))
        assert r.hit_prob + r.survival_prob == pytest.approx(1.0)
        if r.extinction_possible is not None:
            assert r.extinction_possible != r.extinguishing_possible
        if r.explosion_possible:
            assert model.phi_zero().value > 0.0

    def test_report_serializes(self):
        import json

        r = classify_boundary(brownian_model(-1.0), PowerLaw(1.0), 1.0)
        text = json.dumps(r.to_dict())
        assert "extinction_possible" in text
