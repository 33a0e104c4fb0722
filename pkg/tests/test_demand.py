import numpy as np
import pytest

from storecycle import (
    ConsumerType,
    DomainError,
    PreferenceDrift,
    Segment,
    StyleSet,
    StyleVector,
    TraditionalStyle,
    optimal_density,
    optimal_preference_style,
    score,
    transform_for_population,
    utility,
)


def simple_market(m=1):
    if m == 1:
        pop = [ConsumerType(a=[2.0], b=[4.0], lam=2.0, gamma=1.0, share=1.0)]
    else:
        pop = [
            ConsumerType(a=[2.0], b=[4.0], lam=2.0, gamma=1.0, share=0.6),
            ConsumerType(a=[1.0], b=[3.0], lam=1.5, gamma=0.8, share=0.4),
        ]
    trad = TraditionalStyle([0.0], [0.0])
    drift = PreferenceDrift([0.5])
    phi = transform_for_population(pop)
    return pop, trad, drift, phi


def kwargs(trad, drift, phi):
    return {"trad": trad, "drift": drift, "phi": phi}


class TestPointSets:
    def test_single_point_uniform(self):
        pop, trad, drift, phi = simple_market()
        z = StyleVector([0.1], [0.2])
        styles = StyleSet.from_points([(z, 1.0, 2.5)])
        dens = optimal_density(pop, styles, 0.0, **kwargs(trad, drift, phi))
        # one atom of weight 2.5 integrating to 1 has density 1/2.5
        assert dens.value(0, z, 1.0) == pytest.approx(1.0 / 2.5)

    def test_two_point_proportionality(self):
        pop, trad, drift, phi = simple_market()
        c = pop[0]
        zhat = optimal_preference_style(c, trad, drift, 0.0)
        # second point placed so its score is exactly half the peak score
        d = np.sqrt(2.0 * np.log(2.0) / c.lam)
        z1 = zhat
        z2 = StyleVector(zhat.product + d, zhat.storefront)
        styles = StyleSet.from_points([(z1, 1.0, 1.0), (z2, 1.0, 1.0)])
        dens = optimal_density(pop, styles, 0.0, **kwargs(trad, drift, phi))
        p1 = dens.value(0, z1, 1.0)
        p2 = dens.value(0, z2, 1.0)
        assert p1 / (p1 + p2) == pytest.approx(2.0 / 3.0, rel=1e-12)
        assert p2 / (p1 + p2) == pytest.approx(1.0 / 3.0, rel=1e-12)

    def test_normalization_over_points(self):
        pop, trad, drift, phi = simple_market(m=2)
        rng = np.random.default_rng(5)
        pts = [
            (StyleVector(rng.normal(size=1), rng.normal(size=1)),
             rng.uniform(0.5, 3.0), rng.uniform(0.2, 2.0))
            for _ in range(12)
        ]
        styles = StyleSet.from_points(pts)
        dens = optimal_density(pop, styles, 1.0, **kwargs(trad, drift, phi))
        for j in range(2):
            total = sum(w * dens.value(j, z, price) for z, price, w in pts)
            assert total == pytest.approx(1.0, abs=1e-8)

    def test_uniform_score_scaling_leaves_density_unchanged(self):
        # shifting every price by the same amount rescales all scores by one
        # factor; the normalized optimizer cannot move
        pop, trad, drift, phi = simple_market()
        rng = np.random.default_rng(8)
        zs = [StyleVector(rng.normal(size=1), rng.normal(size=1)) for _ in range(6)]
        for shift in (0.0, 0.7):
            pts = [(z, 1.0 + shift, 1.0) for z in zs]
            dens = optimal_density(pop, StyleSet.from_points(pts), 0.0,
                                   **kwargs(trad, drift, phi))
            vals = np.array([dens.value(0, z, 1.0 + shift) for z in zs])
            if shift == 0.0:
                base = vals
        np.testing.assert_allclose(vals, base, rtol=1e-12)


class TestSegments:
    def make_segment_set(self, pop, trad, drift, t=0.0, length=8.0, price=1.2):
        c = pop[0]
        zhat = optimal_preference_style(c, trad, drift, t)
        q = c.b.size
        d_full = drift.full(q)
        base = StyleVector.from_concat(zhat.concat() + 0.3, zhat.p)
        return StyleSet.from_segments(
            [Segment(base=base, direction=-d_full, length=length, price=price)]
        )

    def test_normalization_against_dense_trapezoid(self):
        pop, trad, drift, phi = simple_market(m=2)
        styles = self.make_segment_set(pop, trad, drift)
        dens = optimal_density(pop, styles, 0.0, **kwargs(trad, drift, phi))
        seg = styles.segments[0]
        s = np.linspace(0.0, seg.length, 200_001)
        for j in range(2):
            rho = dens._values_on_segment(j, seg, s)
            assert np.all(rho >= 0)
            total = np.trapezoid(rho, s)
            assert total == pytest.approx(1.0, abs=1e-8)

    def test_proportional_to_score(self):
        pop, trad, drift, phi = simple_market()
        styles = self.make_segment_set(pop, trad, drift)
        dens = optimal_density(pop, styles, 0.0, **kwargs(trad, drift, phi))
        seg = styles.segments[0]
        rng = np.random.default_rng(17)
        for _ in range(25):
            s1, s2 = rng.uniform(0.0, seg.length, size=2)
            z1 = StyleVector.from_concat(seg.style_at(np.asarray(s1))[0], 1)
            z2 = StyleVector.from_concat(seg.style_at(np.asarray(s2))[0], 1)
            lhs = dens.value(0, z1, 1.2) / dens.value(0, z2, 1.2)
            rhs = score(pop[0], trad, drift, phi, z1, 1.2, 0.0) / score(
                pop[0], trad, drift, phi, z2, 1.2, 0.0
            )
            assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_levels_constant_along_equilibrium_drift(self):
        # the provided style set translates with the drift, so the
        # normalization constant cannot depend on the evaluation time
        pop, trad, drift, phi = simple_market(m=2)
        set0 = self.make_segment_set(pop, trad, drift, t=0.0)
        set5 = self.make_segment_set(pop, trad, drift, t=5.0)
        k0 = optimal_density(pop, set0, 0.0, **kwargs(trad, drift, phi)).levels
        k5 = optimal_density(pop, set5, 5.0, **kwargs(trad, drift, phi)).levels
        np.testing.assert_allclose(k0, k5, rtol=1e-10)


class _PerturbedPointDensity:
    """A competing normalized density on the same finite support."""

    def __init__(self, base, type_index, factors, points):
        self.base = base
        self.styles = base.styles
        self.population = base.population
        self.trad, self.drift, self.phi, self.t = base.trad, base.drift, base.phi, base.t
        total = sum(
            w * base.value(type_index, z, price) * f
            for (z, price, w), f in zip(points, factors)
        )
        self.factor_by_style = {id(z): f / total for (z, _, _), f in zip(points, factors)}
        self.type_index = type_index

    def value(self, j, z, price):
        return self.base.value(j, z, price) * self.factor_by_style[id(z)]


class TestUtility:
    def test_unit_density_gives_zero(self):
        pop, trad, drift, phi = simple_market()
        z = StyleVector([0.4], [0.1])
        styles = StyleSet.from_points([(z, 1.0, 1.0)])
        dens = optimal_density(pop, styles, 0.0, **kwargs(trad, drift, phi))
        # single atom with unit weight: density is identically 1, ln rho = 0
        assert dens.value(0, z, 1.0) == pytest.approx(1.0)
        assert utility(dens, 0) == pytest.approx(0.0, abs=1e-14)

    def test_optimal_density_beats_random_perturbations(self):
        pop, trad, drift, phi = simple_market()
        rng = np.random.default_rng(31)
        pts = [
            (StyleVector(rng.normal(size=1), rng.normal(size=1)),
             rng.uniform(0.5, 2.0), rng.uniform(0.5, 1.5))
            for _ in range(9)
        ]
        styles = StyleSet.from_points(pts)
        dens = optimal_density(pop, styles, 0.0, **kwargs(trad, drift, phi))
        u_star = utility(dens, 0)
        for _ in range(100):
            factors = np.exp(rng.normal(scale=0.4, size=len(pts)))
            rival = _PerturbedPointDensity(dens, 0, factors, pts)
            assert u_star >= utility(rival, 0) - 1e-10 * abs(u_star)

    def test_zero_density_raises(self):
        pop, trad, drift, phi = simple_market()
        pts = [
            (StyleVector([0.0], [0.0]), 1.0, 1.0),
            (StyleVector([1.0], [1.0]), 1.0, 1.0),
        ]
        styles = StyleSet.from_points(pts)
        dens = optimal_density(pop, styles, 0.0, **kwargs(trad, drift, phi))
        rival = _PerturbedPointDensity(dens, 0, np.array([1.0, 0.0]), pts)
        with pytest.raises(DomainError):
            utility(rival, 0)


class TestStyleSetValidation:
    def test_requires_exactly_one_representation(self):
        with pytest.raises(ValueError):
            StyleSet()
        seg = Segment(StyleVector([0.0], [0.0]), np.array([1.0, 0.0]), 1.0, 1.0)
        pt = (StyleVector([0.0], [0.0]), 1.0, 1.0)
        with pytest.raises(ValueError):
            StyleSet(segments=(seg,), points=(pt,))

    def test_rejects_bad_prices_and_weights(self):
        z = StyleVector([0.0], [0.0])
        with pytest.raises(ValueError):
            StyleSet.from_points([(z, -1.0, 1.0)])
        with pytest.raises(ValueError):
            StyleSet.from_points([(z, 1.0, 0.0)])
