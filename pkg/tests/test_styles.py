import numpy as np
import pytest
from scipy.integrate import quad

from storecycle import (
    ConsumerType,
    DomainError,
    PreferenceDrift,
    StyleVector,
    TraditionalStyle,
    TransformFunction,
    optimal_preference_style,
    score,
    transform_for_population,
    validate_population,
)


def make_type(a=(2.0,), b=(4.0,), lam=2.0, gamma=1.0, share=1.0):
    return ConsumerType(a=list(a), b=list(b), lam=lam, gamma=gamma, share=share)


class TestStyleVector:
    def test_concat_dimension(self):
        z = StyleVector([1.0, 2.0], [3.0])
        assert z.p == 2 and z.q == 1
        assert z.concat().tolist() == [1.0, 2.0, 3.0]

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(ValueError):
            StyleVector([], [1.0])
        with pytest.raises(ValueError):
            StyleVector([np.nan], [1.0])
        with pytest.raises(ValueError):
            StyleVector([1.0], [np.inf])


class TestTransformFunction:
    def test_positive_and_increasing_by_sampling(self):
        rng = np.random.default_rng(7)
        for phi in (
            TransformFunction.exponential(kappa=0.7, cap=3.0),
            TransformFunction.inverse_power(alpha=2.5, c_eps=0.4, cap=3.0),
        ):
            us = np.sort(rng.uniform(-40.0, phi.cap, size=200))
            vals = phi(us)
            assert np.all(vals > 0)
            assert np.all(np.diff(vals) > 0)
            assert np.all(phi.derivative(us) > 0)

    @pytest.mark.parametrize(
        "phi",
        [
            TransformFunction.exponential(kappa=1.3, cap=2.0),
            TransformFunction.inverse_power(alpha=3.0, c_eps=0.5, cap=2.0),
        ],
    )
    def test_integral_finite_matches_analytic(self, phi):
        # adaptive quadrature of the tail against the closed form
        val, _ = quad(lambda u: float(phi(u)), -np.inf, phi.cap, limit=400)
        assert val == pytest.approx(phi.integral_to_cap(), rel=1e-8)

    def test_domain_cap_enforced(self):
        phi = TransformFunction.exponential(cap=1.0)
        with pytest.raises(DomainError):
            phi(1.5)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            TransformFunction.exponential(kappa=0.0)
        with pytest.raises(ValueError):
            TransformFunction.inverse_power(alpha=1.0, c_eps=1.0, cap=1.0)
        with pytest.raises(ValueError):
            TransformFunction.inverse_power(alpha=2.0, c_eps=0.0, cap=1.0)


class TestPopulation:
    def test_shares_must_sum_to_one(self):
        good = [make_type(share=0.25), make_type(a=(1.0,), share=0.75)]
        validate_population(good)
        bad = [make_type(share=0.5), make_type(share=0.6)]
        with pytest.raises(ValueError):
            validate_population(bad)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            validate_population([make_type(share=0.5), make_type(a=(1.0, 2.0), share=0.5)])

    def test_parameter_positivity(self):
        with pytest.raises(ValueError):
            make_type(lam=0.0)
        with pytest.raises(ValueError):
            make_type(gamma=-1.0)
        with pytest.raises(ValueError):
            make_type(share=0.0)

    def test_transform_cap_covers_score_offsets(self):
        pop = [make_type(share=0.5), make_type(a=(5.0,), b=(1.0,), lam=0.5, share=0.5)]
        phi = transform_for_population(pop)
        assert phi.cap == max(c.score_offset for c in pop) + 1.0


class TestOptimalPreferenceStyle:
    def test_identity_case(self):
        c = ConsumerType(a=[0.0], b=[0.0], lam=1.0, gamma=1.0, share=1.0)
        trad = TraditionalStyle([0.0], [0.0])
        drift = PreferenceDrift([0.0])
        z = optimal_preference_style(c, trad, drift, 0.0)
        assert z.product.tolist() == [0.0] and z.storefront.tolist() == [0.0]

    def test_hand_evaluated(self):
        c = ConsumerType(a=[2.0], b=[4.0], lam=2.0, gamma=1.0, share=1.0)
        trad = TraditionalStyle([1.0], [1.0])
        drift = PreferenceDrift([0.5])
        z = optimal_preference_style(c, trad, drift, 2.0)
        assert z.product.tolist() == [3.0]  # 2/2 + 1 + 2*0.5
        assert z.storefront.tolist() == [3.0]  # 4/2 + 1

    def test_shift_is_linear_in_time(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            p, q = rng.integers(1, 4, size=2)
            c = ConsumerType(
                a=rng.normal(size=p), b=rng.normal(size=q),
                lam=rng.uniform(0.2, 3.0), gamma=1.0, share=1.0,
            )
            trad = TraditionalStyle(rng.normal(size=p), rng.normal(size=q))
            drift = PreferenceDrift(rng.normal(size=p))
            t = rng.uniform(-20, 20)
            z0 = optimal_preference_style(c, trad, drift, 0.0).concat()
            zt = optimal_preference_style(c, trad, drift, t).concat()
            np.testing.assert_allclose(zt - z0, t * drift.full(q), rtol=0, atol=1e-12)


class TestScore:
    def setup_method(self):
        self.c = make_type()
        self.trad = TraditionalStyle([0.0], [0.0])
        self.drift = PreferenceDrift([0.5])
        self.phi = transform_for_population([self.c])

    def test_maximum_at_preferred_style(self):
        zhat = optimal_preference_style(self.c, self.trad, self.drift, 1.5)
        peak = score(self.c, self.trad, self.drift, self.phi, zhat, 2.0, 1.5)
        assert peak == pytest.approx(
            float(self.phi(self.c.score_offset)) * np.exp(-self.c.gamma * 2.0)
        )
        rng = np.random.default_rng(11)
        for _ in range(200):
            z = StyleVector(rng.normal(scale=3.0, size=1), rng.normal(scale=3.0, size=1))
            assert score(self.c, self.trad, self.drift, self.phi, z, 2.0, 1.5) <= peak

    def test_unit_value_at_origin(self):
        c = ConsumerType(a=[0.0], b=[0.0], lam=1.0, gamma=1.0, share=1.0)
        trad = TraditionalStyle([0.0], [0.0])
        drift = PreferenceDrift([0.0])
        phi = TransformFunction.exponential(cap=1.0)
        z = StyleVector([0.0], [0.0])
        assert score(c, trad, drift, phi, z, 0.0, 0.0) == pytest.approx(1.0)

    def test_time_shift_invariance(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            z = StyleVector(rng.normal(size=1), rng.normal(size=1))
            theta = rng.uniform(0.1, 5.0)
            t = rng.uniform(-10, 10)
            shifted = StyleVector.from_concat(
                z.concat() - t * self.drift.full(1), z.p
            )
            s_t = score(self.c, self.trad, self.drift, self.phi, z, theta, t)
            s_0 = score(self.c, self.trad, self.drift, self.phi, shifted, theta, 0.0)
            assert s_t == pytest.approx(s_0, rel=1e-12)

    def test_decreasing_along_ray_from_peak(self):
        zhat = optimal_preference_style(self.c, self.trad, self.drift, 0.0)
        direction = np.array([0.6, 0.8])
        vals = [
            score(
                self.c, self.trad, self.drift, self.phi,
                StyleVector.from_concat(zhat.concat() + r * direction, 1), 1.0, 0.0,
            )
            for r in np.linspace(0.0, 4.0, 30)
        ]
        assert np.all(np.diff(vals) < 0)

    def test_decreasing_in_price(self):
        z = StyleVector([0.3], [0.4])
        thetas = np.linspace(0.1, 8.0, 40)
        vals = [
            score(self.c, self.trad, self.drift, self.phi, z, th, 0.0) for th in thetas
        ]
        assert np.all(np.diff(vals) < 0)

    def test_rejects_negative_price(self):
        z = StyleVector([0.0], [0.0])
        with pytest.raises(ValueError):
            score(self.c, self.trad, self.drift, self.phi, z, -1.0, 0.0)


class TestPreferenceDrift:
    def test_storefront_block_is_zero(self):
        d = PreferenceDrift([0.3, -0.2])
        full = d.full(3)
        assert full.tolist()[2:] == [0.0, 0.0, 0.0]
        assert d.norm == pytest.approx(np.hypot(0.3, 0.2))
