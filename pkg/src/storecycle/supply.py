"""Store owner's problem: style and price under an investment constraint.

The owner maximizes the cash flow density theta * sum_j P_j * rho_jt(z|theta)
subject to the storefront cost g_I(xi) <= I.  The outer price search is a
golden section over theta; the inner style problem is solved by projected
gradient ascent with backtracking.  Ties across equal-cash-flow optima are
broken by the probability ordering rule: maximize the first type's purchase
density, then the second's, and so on; if the chain cannot single out one
decision, the inputs are outside the dominant-consumer regime and a
DominanceViolation is raised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DominanceViolation, NeverOpens, NonConvergence
from .styles import (
    ConsumerType,
    PreferenceDrift,
    StyleVector,
    TraditionalStyle,
    TransformFunction,
    optimal_preference_style,
    validate_population,
)

__all__ = [
    "InvestmentConstraint",
    "SupplyDecision",
    "ShutdownRule",
    "solve_supply",
    "cash_flow_density",
    "lifespan",
    "drift_coefficients",
]

_THETA_BOUNDS = (1e-3, 50.0)
_PG_TOL = 1e-10
_PG_MAX_ITER = 2000
_POLISH_ITER = 500
_RESTARTS = 8
_TIE_REL = 1e-9


@dataclass(frozen=True, eq=False)
class InvestmentConstraint:
    """Storefront budget set {xi : g_I(xi) <= budget}.

    g_I is ||xi||^2 when `weights` is None, else the weighted quadratic
    sum(weights * xi^2) with positive diagonal weights.
    """

    budget: float
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError("budget must be > 0")
        if self.weights is not None:
            w = np.atleast_1d(np.asarray(self.weights, dtype=float))
            if np.any(w <= 0):
                raise ValueError("weights must be positive")
            w.flags.writeable = False
            object.__setattr__(self, "weights", w)

    def cost(self, xi: np.ndarray) -> float:
        xi = np.asarray(xi, dtype=float)
        if self.weights is None:
            return float(xi @ xi)
        return float(np.sum(self.weights * xi * xi))

    def project(self, xi: np.ndarray) -> np.ndarray:
        """Euclidean projection onto {g_I(xi) <= budget}."""
        xi = np.asarray(xi, dtype=float)
        if self.cost(xi) <= self.budget:
            return xi.copy()
        if self.weights is None:
            return xi * np.sqrt(self.budget / (xi @ xi))
        w = self.weights
        # projection onto an ellipsoid boundary: xi_i / (1 + mu * w_i)
        def excess(mu):
            scaled = xi / (1.0 + mu * w)
            return np.sum(w * scaled * scaled) - self.budget

        hi = 1.0
        while excess(hi) > 0:
            hi *= 4.0
        mu = brentq(excess, 0.0, hi, xtol=1e-15, rtol=1e-15)
        return xi / (1.0 + mu * w)

    def check_tight(self, population, trad: TraditionalStyle, drift: PreferenceDrift) -> None:
        """Every type's preferred storefront must be outside the budget set."""
        for j, c in enumerate(population):
            xi_hat = c.b / c.lam + trad.xi_bar0
            if self.cost(xi_hat) <= self.budget:
                raise ValueError(
                    f"constraint is not tight for consumer type {j}: "
                    f"g_I(xi_hat)={self.cost(xi_hat):.6g} <= budget={self.budget:.6g}"
                )


@dataclass(frozen=True, eq=False)
class SupplyDecision:
    style: StyleVector
    price: float
    objective: float

    def __post_init__(self):
        if self.price <= 0:
            raise ValueError("price must be > 0")


@dataclass(frozen=True)
class ShutdownRule:
    """The store closes once the cash flow density drops below `threshold`."""

    threshold: float

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValueError("threshold must be > 0")


def _levels(population) -> np.ndarray:
    ks = []
    for j, c in enumerate(population):
        if c.level is None:
            raise ValueError(f"consumer type {j} has no purchase-probability level set")
        ks.append(c.level)
    return np.asarray(ks, dtype=float)


def _population_arrays(population, trad, drift, t):
    """Stacked zhat_{j,t}, lambda_j, C_j, gamma_j, P_j for fast evaluation."""
    zhats = np.stack(
        [optimal_preference_style(c, trad, drift, t).concat() for c in population]
    )
    lams = np.array([c.lam for c in population])
    offsets = np.array([c.score_offset for c in population])
    gammas = np.array([c.gamma for c in population])
    shares = np.array([c.share for c in population])
    return zhats, lams, offsets, gammas, shares


class _StyleProblem:
    """Inner problem at fixed theta: maximize sum_j w_j * phi(arg_j(z))."""

    def __init__(self, weights, zhats, lams, offsets, phi, constraint, p):
        self.w = weights
        self.zhats = zhats
        self.lams = lams
        self.offsets = offsets
        self.phi = phi
        self.constraint = constraint
        self.p = p

    def value(self, z: np.ndarray) -> float:
        diff = self.zhats - z[None, :]
        dist2 = np.einsum("ij,ij->i", diff, diff)
        return float(np.sum(self.w * self.phi.unchecked(self.offsets - 0.5 * self.lams * dist2)))

    def gradient(self, z: np.ndarray) -> np.ndarray:
        diff = z[None, :] - self.zhats
        args = self.offsets - 0.5 * self.lams * np.einsum("ij,ij->i", diff, diff)
        coef = self.w * self.phi.unchecked_derivative(args) * self.lams
        return -(coef[:, None] * diff).sum(axis=0)

    def project(self, z: np.ndarray) -> np.ndarray:
        out = z.copy()
        out[self.p :] = self.constraint.project(z[self.p :])
        return out

    def _curvature(self, z: np.ndarray) -> float:
        """Local Lipschitz estimate of the gradient along its own direction."""
        g = self.gradient(z)
        gn = np.linalg.norm(g)
        u = g / gn if gn > 0 else np.ones_like(z) / np.sqrt(z.size)
        eps = 1e-6 * (1.0 + np.linalg.norm(z))
        return float(np.linalg.norm(self.gradient(z + eps * u) - g) / eps)

    def solve(self, z0: np.ndarray) -> tuple[np.ndarray, float]:
        """Projected gradient ascent: Armijo phase, then fixed-step polish.

        The Armijo phase stops once value comparisons hit float resolution;
        the polish phase runs constant steps at the local curvature scale,
        which contracts toward the maximizer without value comparisons and
        reaches the 1e-10 gradient-mapping tolerance.
        """
        z = self.project(z0)
        val = self.value(z)
        step = 1.0
        for _ in range(_PG_MAX_ITER):
            g = self.gradient(z)
            if np.linalg.norm(self.project(z + g) - z) <= _PG_TOL * (1.0 + np.linalg.norm(z)):
                return z, val
            stalled = False
            while True:
                z_new = self.project(z + step * g)
                move = z_new - z
                val_new = self.value(z_new)
                if val_new >= val + 1e-4 * float(g @ move) or np.linalg.norm(move) < 1e-16:
                    break
                step *= 0.5
                if step < 1e-18:
                    stalled = True
                    break
            if stalled or np.linalg.norm(z_new - z) < 1e-13 * (1.0 + np.linalg.norm(z)):
                break
            z, val = z_new, val_new
            step *= 1.6

        L = max(self._curvature(z), 1e-12)
        step = 0.5 / L
        z_p = z
        for _ in range(_POLISH_ITER):
            g = self.gradient(z_p)
            z_t = self.project(z_p + step * g)
            if np.linalg.norm(z_t - z_p) <= _PG_TOL * (1.0 + np.linalg.norm(z_p)):
                z_p = z_t
                break
            z_p = z_t
        val_p = self.value(z_p)
        if val_p >= val - 1e-9 * abs(val):
            return z_p, val_p
        return z, val


def _golden_max(f, lo, hi, tol=1e-11, max_iter=200):
    """Golden-section maximization of a unimodal scalar function."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def solve_supply(
    population: list[ConsumerType],
    trad: TraditionalStyle,
    drift: PreferenceDrift,
    phi: TransformFunction,
    constraint: InvestmentConstraint,
    t: float,
    *,
    theta_bounds: tuple[float, float] = _THETA_BOUNDS,
    restart_seed: int = 0,
) -> SupplyDecision:
    """Maximize the cash flow density subject to the investment constraint.

    Runs the price/style search from each type's projected preference style
    plus 8 seeded random styles, then applies the probability ordering rule
    among equal-objective optima.
    """
    validate_population(population)
    levels = _levels(population)
    zhats, lams, offsets, gammas, shares = _population_arrays(population, trad, drift, t)
    p = population[0].a.size
    theta_lo, theta_hi = theta_bounds

    if len(population) == 1:
        # closed form: any transform is monotone, so the style is the
        # projection of zhat and theta maximizes theta*exp(-gamma*theta)
        theta_star = 1.0 / population[0].gamma
        if not (theta_lo <= theta_star <= theta_hi):
            raise NonConvergence(
                f"optimal price 1/gamma = {theta_star:.6g} outside theta_bounds {theta_bounds}"
            )
        z = np.concatenate([zhats[0, :p], constraint.project(zhats[0, p:])])
        style = StyleVector.from_concat(z, p)
        decision = SupplyDecision(style=style, price=theta_star, objective=1.0)
        obj = cash_flow_density(decision, population, trad, drift, phi, t)
        return SupplyDecision(style=style, price=theta_star, objective=obj)

    log_norm_cache: dict[float, float] = {}

    def style_problem(theta):
        # normalize per theta so the inner objective is O(1); rank in logs
        norm = float(np.max(shares * levels * phi(offsets) * np.exp(-gammas * theta)))
        log_norm_cache[theta] = np.log(norm)
        w = shares * levels * np.exp(-gammas * theta) / norm
        return _StyleProblem(w, zhats, lams, offsets, phi, constraint, p)

    def candidate_from(z0: np.ndarray) -> tuple[np.ndarray, float, float]:
        state = {"z": z0.copy()}

        def log_objective(theta):
            z_opt, val = style_problem(theta).solve(state["z"])
            state["z"] = z_opt
            if val <= 0.0:
                return -np.inf
            return np.log(theta) + np.log(val) + log_norm_cache[theta]

        theta_star, logval = _golden_max(log_objective, theta_lo, theta_hi)
        span = theta_hi - theta_lo
        if theta_star - theta_lo < 1e-6 * span or theta_hi - theta_star < 1e-6 * span:
            raise NonConvergence(
                f"price optimum {theta_star:.6g} sits on the search boundary "
                f"{theta_bounds}; widen theta_bounds"
            )
        return state["z"], theta_star, logval

    def is_new(z, th, cands):
        return not any(
            np.linalg.norm(z - z2) <= 1e-6 * (1.0 + np.linalg.norm(z2))
            and abs(th - th2) <= 1e-6 * (1.0 + th2)
            for z2, th2, _ in cands
        )

    # one 1-D price search per preference-style branch
    candidates = []
    for zh in zhats:
        z0 = np.concatenate([zh[:p], constraint.project(zh[p:])])
        cand = candidate_from(z0)
        if is_new(cand[0], cand[1], candidates):
            candidates.append(cand)

    # multi-modal detection: random restarts of the style problem at the
    # best price found; any distinct optimum gets its own price search
    best_z, best_theta, best_log = max(candidates, key=lambda c: c[2])
    rng = np.random.default_rng(restart_seed)
    spread = float(np.max(np.linalg.norm(zhats - zhats.mean(axis=0), axis=1))) + 1.0
    prob_best = style_problem(best_theta)
    for _ in range(_RESTARTS):
        mix = rng.dirichlet(np.ones(len(population)))
        z0 = mix @ zhats + rng.normal(scale=0.3 * spread, size=zhats.shape[1])
        z0 = np.concatenate([z0[:p], constraint.project(z0[p:])])
        z_loc, val_loc = prob_best.solve(z0)
        if val_loc <= 0.0 or not is_new(z_loc, best_theta, candidates):
            continue
        log_loc = np.log(best_theta) + np.log(val_loc) + log_norm_cache[best_theta]
        if log_loc >= best_log - _TIE_REL:
            cand = candidate_from(z_loc)
            if is_new(cand[0], cand[1], candidates):
                candidates.append(cand)

    best = max(logobj for _, _, logobj in candidates)
    # relative objective tie at 1e-9 is an absolute tie of ~1e-9 in logs
    survivors = [c for c in candidates if c[2] >= best - _TIE_REL]

    def distinct(cands):
        out = []
        for z, th, obj in cands:
            dup = any(
                np.linalg.norm(z - z2) <= 1e-6 * (1.0 + np.linalg.norm(z2))
                and abs(th - th2) <= 1e-6 * (1.0 + th2)
                for z2, th2, _ in out
            )
            if not dup:
                out.append((z, th, obj))
        return out

    survivors = distinct(survivors)
    if len(survivors) > 1:
        # probability ordering rule: lexicographic max of per-type densities
        for j in range(len(population)):
            vals = []
            for z, th, _ in survivors:
                dist2 = float(np.sum((z - zhats[j]) ** 2))
                f = phi(offsets[j] - 0.5 * lams[j] * dist2) * np.exp(-gammas[j] * th)
                vals.append(shares[j] * levels[j] * f)
            vmax = max(vals)
            survivors = [c for c, v in zip(survivors, vals) if v >= vmax * (1.0 - _TIE_REL)]
            if len(survivors) == 1:
                break
        survivors = distinct(survivors)
        if len(survivors) > 1:
            raise DominanceViolation(
                f"{len(survivors)} optima survive the ordering chain; "
                "inputs violate the dominant-consumer hypotheses"
            )
        # numerically identical survivors: pick deterministically
        survivors.sort(key=lambda c: (tuple(np.round(c[0], 12)), round(c[1], 12)))

    z_star, theta_star, _ = survivors[0]
    style = StyleVector.from_concat(z_star, p)
    decision = SupplyDecision(style=style, price=float(theta_star), objective=0.0)
    obj = cash_flow_density(decision, population, trad, drift, phi, t)
    return SupplyDecision(style=style, price=float(theta_star), objective=obj)


def cash_flow_density(
    decision: SupplyDecision,
    population: list[ConsumerType],
    trad: TraditionalStyle,
    drift: PreferenceDrift,
    phi: TransformFunction,
    t: float,
) -> float:
    """Evaluate theta * sum_j P_j * K_j * F_jt(z, theta)."""
    levels = _levels(population)
    zhats, lams, offsets, gammas, shares = _population_arrays(population, trad, drift, t)
    z = decision.style.concat()
    dist2 = np.sum((zhats - z[None, :]) ** 2, axis=1)
    f = phi(offsets - 0.5 * lams * dist2) * np.exp(-gammas * decision.price)
    return float(decision.price * np.sum(shares * levels * f))


def drift_coefficients(
    population: list[ConsumerType],
    trad: TraditionalStyle,
    drift: PreferenceDrift,
    decision: SupplyDecision,
    t0: float = 0.0,
):
    """Per-type coefficients of the drifting score argument.

    For a store that fixes (z, theta) at time t0, the scoring argument of type
    j at age tau is alpha_j + mu_j*tau - nu_j*tau^2 with

        alpha_j = C_j - lam_j/2 * ||z - zhat_{j,t0}||^2
        mu_j    = lam_j * <z - zhat_{j,t0}, d>
        nu_j    = lam_j/2 * ||d||^2

    Returns (weights, alpha, mu, nu) where weights_j = P_j K_j exp(-gamma_j theta).
    """
    levels = _levels(population)
    zhats, lams, offsets, gammas, shares = _population_arrays(population, trad, drift, t0)
    q = population[0].b.size
    d = drift.full(q)
    z = decision.style.concat()
    diff = z[None, :] - zhats
    alpha = offsets - 0.5 * lams * np.sum(diff * diff, axis=1)
    mu = lams * (diff @ d)
    nu = 0.5 * lams * float(d @ d) * np.ones_like(mu)
    weights = shares * levels * np.exp(-gammas * decision.price)
    return weights, alpha, mu, nu


def lifespan(
    decision_at_0: SupplyDecision,
    population: list[ConsumerType],
    trad: TraditionalStyle,
    drift: PreferenceDrift,
    phi: TransformFunction,
    rule: ShutdownRule,
    *,
    opening_time: float = 0.0,
    tol: float = 1e-6,
) -> float:
    """Largest age tau at which the cash flow density still meets the threshold.

    Returns inf when the drift is zero and the density never decays.
    """
    theta = decision_at_0.price
    weights, alpha, mu, nu = drift_coefficients(
        population, trad, drift, decision_at_0, t0=opening_time
    )

    def density(tau: np.ndarray) -> np.ndarray:
        args = alpha[:, None] + mu[:, None] * tau[None, :] - nu[:, None] * tau[None, :] ** 2
        return theta * np.sum(weights[:, None] * phi(args), axis=0)

    def density_at(tau: float) -> float:
        return float(density(np.array([tau]))[0])

    d0 = density_at(0.0)
    r = rule.threshold
    if d0 < r:
        raise NeverOpens(f"cash flow density {d0:.6g} below threshold {r:.6g} at opening")
    if drift.norm == 0.0:
        return float("inf")

    t_mono = float(max(0.0, np.max(mu / (2.0 * nu))))  # all components decay beyond this
    if density_at(t_mono) >= r:
        lo, hi = t_mono, max(t_mono, 1.0)
        for _ in range(300):
            if density_at(hi) < r:
                break
            lo, hi = hi, hi * 2.0
        else:
            raise NonConvergence("could not bracket the shutdown time")
    else:
        grid = np.linspace(0.0, t_mono, 4097)
        vals = density(grid)
        above = np.nonzero(vals >= r)[0]
        i = above[-1]
        lo, hi = float(grid[i]), float(grid[i + 1])

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if density_at(mid) >= r:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
