import numpy as np
import pytest
from scipy.optimize import brentq

from storecycle import (
    ConsumerType,
    DominanceViolation,
    InvestmentConstraint,
    NeverOpens,
    PreferenceDrift,
    ShutdownRule,
    StyleVector,
    SupplyDecision,
    TraditionalStyle,
    cash_flow_density,
    lifespan,
    optimal_preference_style,
    score,
    solve_supply,
    transform_for_population,
)

TRAD = TraditionalStyle([0.0], [0.0])
DRIFT = PreferenceDrift([0.5])


def single_type(level=1.0, gamma=1.0):
    return [ConsumerType(a=[2.0], b=[4.0], lam=2.0, gamma=gamma, share=1.0, level=level)]


def salt_example(k10=2.0, k20=1.0):
    """Two types preferring 3g and 1g of salt, both wanting 5 lights.

    Densities match K_j0 * exp(1 - (x - xhat_j)^2 - (xi - 5)^2 - theta):
    lam = 2, gamma = 1, and the levels absorb exp(1 - C_j).
    """
    pop = [
        ConsumerType(a=[6.0], b=[10.0], lam=2.0, gamma=1.0, share=1 / 3,
                     level=k10 * np.exp(1.0 - 34.0)),
        ConsumerType(a=[2.0], b=[10.0], lam=2.0, gamma=1.0, share=2 / 3,
                     level=k20 * np.exp(1.0 - 26.0)),
    ]
    cons = InvestmentConstraint(20.0, weights=[5.0])  # 5 xi^2 <= 20 -> xi <= 2
    return pop, cons


class TestInvestmentConstraint:
    def test_cost_kinds(self):
        plain = InvestmentConstraint(4.0)
        weighted = InvestmentConstraint(4.0, weights=[2.0, 0.5])
        assert plain.cost(np.array([1.0, 1.5])) == pytest.approx(3.25)
        assert weighted.cost(np.array([1.0, 2.0])) == pytest.approx(4.0)

    def test_projection_plain(self):
        cons = InvestmentConstraint(4.0)
        inside = np.array([1.0, 1.0])
        np.testing.assert_allclose(cons.project(inside), inside)
        out = cons.project(np.array([3.0, 4.0]))
        assert cons.cost(out) == pytest.approx(4.0, rel=1e-12)
        np.testing.assert_allclose(out, np.array([3.0, 4.0]) * 2.0 / 5.0)

    def test_projection_weighted_is_closest_feasible(self):
        rng = np.random.default_rng(2)
        cons = InvestmentConstraint(2.0, weights=[3.0, 0.7, 1.4])
        for _ in range(30):
            y = rng.normal(scale=3.0, size=3)
            proj = cons.project(y)
            assert cons.cost(proj) <= 2.0 + 1e-9
            # no feasible random point may be closer than the projection
            for _ in range(50):
                cand = rng.normal(scale=2.0, size=3)
                if cons.cost(cand) <= 2.0:
                    assert np.linalg.norm(y - proj) <= np.linalg.norm(y - cand) + 1e-9

    def test_tightness_check(self):
        pop = single_type()
        InvestmentConstraint(1.0).check_tight(pop, TRAD, DRIFT)  # xi_hat = 2, cost 4 > 1
        with pytest.raises(ValueError):
            InvestmentConstraint(9.0).check_tight(pop, TRAD, DRIFT)


class TestSingleTypeSupply:
    def test_price_is_inverse_gamma_exactly(self):
        for gamma in (0.5, 1.0, 2.0):
            pop = single_type(gamma=gamma)
            phi = transform_for_population(pop)
            dec = solve_supply(pop, TRAD, DRIFT, phi, InvestmentConstraint(1.0), 0.0)
            assert dec.price == 1.0 / gamma

    def test_style_is_projection_of_preferred(self):
        pop = single_type()
        phi = transform_for_population(pop)
        cons = InvestmentConstraint(1.0)
        dec = solve_supply(pop, TRAD, DRIFT, phi, cons, 3.0)
        zhat = optimal_preference_style(pop[0], TRAD, DRIFT, 3.0)
        # product block matches exactly; storefront is the scaled projection
        np.testing.assert_array_equal(dec.style.product, zhat.product)
        expected_xi = zhat.storefront / np.linalg.norm(zhat.storefront)
        np.testing.assert_allclose(dec.style.storefront, expected_xi, rtol=1e-12)
        assert cons.cost(dec.style.storefront) == pytest.approx(1.0, abs=1e-8)

    def test_against_grid_oracle(self):
        # x* = xhat is analytic for one type; grid the remaining (xi, theta)
        pop = single_type()
        phi = transform_for_population(pop)
        cons = InvestmentConstraint(1.0)
        dec = solve_supply(pop, TRAD, DRIFT, phi, cons, 0.0)
        zhat = optimal_preference_style(pop[0], TRAD, DRIFT, 0.0)
        xis = np.linspace(-1.0, 1.0, 200)
        thetas = np.linspace(0.05, 5.0, 200)
        best, arg = -np.inf, None
        for xi in xis:
            z = StyleVector(zhat.product, [xi])
            for th in thetas:
                val = th * pop[0].share * pop[0].level * score(
                    pop[0], TRAD, DRIFT, phi, z, th, 0.0
                )
                if val > best:
                    best, arg = val, (xi, th)
        dxi = xis[1] - xis[0]
        dth = thetas[1] - thetas[0]
        assert abs(dec.style.storefront[0] - arg[0]) <= dxi
        assert abs(dec.price - arg[1]) <= dth
        assert dec.objective >= best - 1e-12


class TestOrderingRule:
    def test_paper_salt_example_tie_resolution(self):
        pop, cons = salt_example(k10=2.0, k20=1.0)
        phi = transform_for_population(pop)
        dec = solve_supply(pop, TRAD, DRIFT, phi, cons, 0.0)
        # exact tie: the rule favors the first type, hence the high-salt branch
        df = lambda x: -(x - 3.0) * np.exp(-((x - 3.0) ** 2)) - (x - 1.0) * np.exp(
            -((x - 1.0) ** 2)
        )
        high_branch = brentq(df, 2.5, 2.99, xtol=1e-14)
        assert dec.style.product[0] == pytest.approx(high_branch, abs=1e-6)
        assert abs(dec.style.product[0] - 2.97) < 0.05
        assert dec.style.storefront[0] == pytest.approx(2.0, abs=1e-9)
        assert dec.price == pytest.approx(1.0, abs=1e-7)

    def test_regimes_flip_with_level_ratio(self):
        phi = transform_for_population(salt_example()[0])
        low_pop, cons = salt_example(k10=1.5)
        low = solve_supply(low_pop, TRAD, DRIFT, phi, cons, 0.0)
        assert low.style.product[0] < 2.0  # low-salt branch
        high_pop, _ = salt_example(k10=2.5)
        high = solve_supply(high_pop, TRAD, DRIFT, phi, cons, 0.0)
        assert high.style.product[0] > 2.0

    def test_restart_seed_does_not_change_decision(self):
        pop, cons = salt_example()
        phi = transform_for_population(pop)
        decisions = [
            solve_supply(pop, TRAD, DRIFT, phi, cons, 0.0, restart_seed=s)
            for s in (0, 1, 99)
        ]
        for dec in decisions[1:]:
            np.testing.assert_allclose(
                dec.style.concat(), decisions[0].style.concat(), atol=1e-8
            )
            assert dec.price == pytest.approx(decisions[0].price, abs=1e-8)

    def test_type_order_controls_tie_breaking(self):
        # swapping which type comes first flips the selected branch
        pop, cons = salt_example()
        phi = transform_for_population(pop)
        swapped = [pop[1], pop[0]]
        dec = solve_supply(swapped, TRAD, DRIFT, phi, cons, 0.0)
        assert dec.style.product[0] < 2.0  # now the 1g-salt type leads


class TestDominanceFuzz:
    def test_unique_optimum_matches_grid_search(self):
        rng = np.random.default_rng(42)
        trials = 0
        for _ in range(12):
            lam1, lam2 = rng.uniform(0.5, 2.5, size=2)
            pop = [
                ConsumerType(a=[rng.uniform(1.0, 4.0)], b=[rng.uniform(2.0, 5.0)],
                             lam=lam1, gamma=rng.uniform(0.5, 1.5), share=0.8,
                             level=1.0),
                ConsumerType(a=[rng.uniform(-2.0, 1.0)], b=[rng.uniform(2.0, 5.0)],
                             lam=lam2, gamma=rng.uniform(0.5, 1.5), share=0.2,
                             level=rng.uniform(0.001, 0.05)),
            ]
            phi = transform_for_population(pop)
            cons = InvestmentConstraint(1.0)
            try:
                dec = solve_supply(pop, TRAD, DRIFT, phi, cons, 0.0)
            except DominanceViolation:
                continue
            trials += 1
            xs = np.linspace(-4.0, 6.0, 120)
            xis = np.linspace(-1.0, 1.0, 80)
            thetas = np.linspace(0.1, 4.0, 80)
            best, arg = -np.inf, None
            zh = [optimal_preference_style(c, TRAD, DRIFT, 0.0).concat() for c in pop]
            w = np.array([c.share * c.level * np.exp(c.score_offset) for c in pop])
            lams = np.array([c.lam for c in pop])
            gammas = np.array([c.gamma for c in pop])
            X, XI = np.meshgrid(xs, xis, indexing="ij")
            for th in thetas:
                vals = np.zeros_like(X)
                for j in range(2):
                    d2 = (X - zh[j][0]) ** 2 + (XI - zh[j][1]) ** 2
                    vals += w[j] * np.exp(-0.5 * lams[j] * d2 - gammas[j] * th)
                i = np.unravel_index(np.argmax(vals), vals.shape)
                if th * vals[i] > best:
                    best, arg = th * vals[i], (xs[i[0]], xis[i[1]], th)
            assert abs(dec.style.product[0] - arg[0]) <= xs[1] - xs[0]
            assert abs(dec.style.storefront[0] - arg[1]) <= xis[1] - xis[0]
            assert abs(dec.price - arg[2]) <= thetas[1] - thetas[0]
        assert trials >= 8  # the regime should hold for most draws

    def test_constraint_active_at_optimum(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            pop = [
                ConsumerType(a=[rng.uniform(0.5, 3.0)], b=[rng.uniform(2.0, 6.0)],
                             lam=rng.uniform(0.5, 2.0), gamma=1.0, share=0.85,
                             level=1.0),
                ConsumerType(a=[rng.uniform(-1.0, 1.0)], b=[rng.uniform(2.0, 6.0)],
                             lam=rng.uniform(0.5, 2.0), gamma=1.0, share=0.15,
                             level=0.01),
            ]
            phi = transform_for_population(pop)
            budget = 0.8 * min(float((c.b / c.lam) @ (c.b / c.lam)) for c in pop)
            cons = InvestmentConstraint(budget)
            cons.check_tight(pop, TRAD, DRIFT)
            dec = solve_supply(pop, TRAD, DRIFT, phi, cons, 0.0)
            assert cons.cost(dec.style.storefront) == pytest.approx(budget, abs=1e-8)


class TestCashFlowDensity:
    def test_matches_closed_form_at_preferred_style(self):
        pop = single_type(level=0.7)
        phi = transform_for_population(pop)
        zhat = optimal_preference_style(pop[0], TRAD, DRIFT, 2.0)
        dec = SupplyDecision(style=zhat, price=1.5, objective=0.0)
        val = cash_flow_density(dec, pop, TRAD, DRIFT, phi, 2.0)
        expected = 1.5 * 0.7 * float(phi(pop[0].score_offset)) * np.exp(-1.5)
        assert val == pytest.approx(expected, rel=1e-12)

    def test_equals_supply_objective_at_optimum(self):
        pop, cons = salt_example()
        phi = transform_for_population(pop)
        dec = solve_supply(pop, TRAD, DRIFT, phi, cons, 0.0)
        assert cash_flow_density(dec, pop, TRAD, DRIFT, phi, 0.0) == pytest.approx(
            dec.objective, rel=1e-12
        )

    def test_decays_with_time_for_fixed_decision(self):
        pop = single_type()
        phi = transform_for_population(pop)
        dec = solve_supply(pop, TRAD, DRIFT, phi, InvestmentConstraint(1.0), 0.0)
        vals = [cash_flow_density(dec, pop, TRAD, DRIFT, phi, t) for t in range(0, 30, 3)]
        assert np.all(np.diff(vals) < 0)


class TestLifespan:
    def test_zero_when_threshold_equals_opening_density(self):
        pop = single_type()
        phi = transform_for_population(pop)
        dec = solve_supply(pop, TRAD, DRIFT, phi, InvestmentConstraint(1.0), 0.0)
        d0 = cash_flow_density(dec, pop, TRAD, DRIFT, phi, 0.0)
        span = lifespan(dec, pop, TRAD, DRIFT, phi, ShutdownRule(d0))
        assert span == pytest.approx(0.0, abs=1e-6)

    def test_never_opens_below_threshold(self):
        pop = single_type()
        phi = transform_for_population(pop)
        dec = solve_supply(pop, TRAD, DRIFT, phi, InvestmentConstraint(1.0), 0.0)
        d0 = cash_flow_density(dec, pop, TRAD, DRIFT, phi, 0.0)
        with pytest.raises(NeverOpens):
            lifespan(dec, pop, TRAD, DRIFT, phi, ShutdownRule(2.0 * d0))

    def test_quadratic_root_closed_form(self):
        # a decision with a product-block offset has mu != 0; the lifespan
        # must solve mu*T - nu*T^2 = ln(r / density(0))
        pop = single_type(level=0.3)
        c = pop[0]
        phi = transform_for_population(pop)
        z = StyleVector([0.6], [1.0])  # product block off the preferred style
        dec = SupplyDecision(style=z, price=1.0, objective=0.0)
        zhat = optimal_preference_style(c, TRAD, DRIFT, 0.0)
        diff = z.concat() - zhat.concat()
        d = DRIFT.full(1)
        mu = c.lam * float(diff @ d)
        nu = 0.5 * c.lam * float(d @ d)
        d0 = cash_flow_density(dec, pop, TRAD, DRIFT, phi, 0.0)
        r = 0.37 * d0
        roots = np.roots([-nu, mu, -np.log(r / d0)])
        expected = max(float(t) for t in roots if np.isreal(t) and t > 0)
        span = lifespan(dec, pop, TRAD, DRIFT, phi, ShutdownRule(r))
        assert span == pytest.approx(expected, abs=1e-6)

    def test_infinite_without_drift(self):
        pop = single_type()
        phi = transform_for_population(pop)
        still = PreferenceDrift([0.0])
        dec = solve_supply(pop, TRAD, still, phi, InvestmentConstraint(1.0), 0.0)
        d0 = cash_flow_density(dec, pop, TRAD, still, phi, 0.0)
        span = lifespan(dec, pop, TRAD, still, phi, ShutdownRule(0.5 * d0))
        assert span == np.inf

    def test_independent_of_opening_time(self):
        pop = single_type(level=0.4)
        phi = transform_for_population(pop)
        cons = InvestmentConstraint(1.0)
        spans = []
        for t0 in (0.0, 7.0, 123.4):
            dec = solve_supply(pop, TRAD, DRIFT, phi, cons, t0)
            spans.append(
                lifespan(dec, pop, TRAD, DRIFT, phi, ShutdownRule(1e-3),
                         opening_time=t0)
            )
        assert spans[1] == pytest.approx(spans[0], abs=1e-6)
        assert spans[2] == pytest.approx(spans[0], abs=1e-6)
