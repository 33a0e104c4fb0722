"""Nash equilibrium of the style market and the conversion-rate curve.

The equilibrium is a fixed point in the purchase-probability levels K_j:
each level must satisfy K_j * V_j(K) = 1, where V_j integrates the type's
score along the drift line of every store generation over the investment set.
Solved by damped Picard iteration with a backward-induction fallback.

With the exponential transform the per-type conversion rate collapses to
beta_j0 * exp(mu_j * t - nu_j * t^2); the curve utilities here evaluate it,
apply style-update slowdown, and classify its interior maxima.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DominanceViolation, FixedPointDivergence, NeverOpens, StoreCycleError
from .styles import (
    ConsumerType,
    PreferenceDrift,
    StyleVector,
    TraditionalStyle,
    TransformFunction,
    validate_population,
)
from .supply import (
    InvestmentConstraint,
    ShutdownRule,
    SupplyDecision,
    drift_coefficients,
    lifespan,
    solve_supply,
)

__all__ = [
    "InvestmentGrid",
    "EquilibriumSolution",
    "ConversionCurveParams",
    "StyleUpdatePolicy",
    "CurveShape",
    "MONOTONE",
    "SINGLE_PEAK",
    "MULTI_PEAK",
    "solve_equilibrium",
    "conversion_rate",
    "single_peak_check",
]

MONOTONE = "monotone"
SINGLE_PEAK = "single_peak"
MULTI_PEAK = "multi_peak"

_TIME_NODES = 128
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_TIME_NODES)


@dataclass(frozen=True, eq=False)
class InvestmentGrid:
    """Discretized investment set with shutdown thresholds r(I).

    `measure` carries the quadrature weight of each level for the outer
    integral over investments; `cost_weights` selects the storefront cost
    kind shared by all levels (None for the plain squared norm).
    """

    budgets: np.ndarray
    thresholds: np.ndarray
    measure: np.ndarray | None = None
    cost_weights: np.ndarray | None = None

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.budgets, dtype=float))
        r = np.atleast_1d(np.asarray(self.thresholds, dtype=float))
        if b.size != r.size:
            raise ValueError("budgets and thresholds must have equal length")
        if np.any(b <= 0) or np.any(r <= 0):
            raise ValueError("budgets and thresholds must be positive")
        m = (
            np.ones_like(b)
            if self.measure is None
            else np.atleast_1d(np.asarray(self.measure, dtype=float))
        )
        if m.size != b.size or np.any(m <= 0):
            raise ValueError("measure must be positive and match budgets")
        for arr, name in ((b, "budgets"), (r, "thresholds"), (m, "measure")):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "measure", m)

    def constraint(self, i: int) -> InvestmentConstraint:
        return InvestmentConstraint(float(self.budgets[i]), self.cost_weights)

    def __len__(self) -> int:
        return self.budgets.size


@dataclass(frozen=True)
class StyleUpdatePolicy:
    """Post-opening style chasing with budget S and efficiency g_S.

    Efficiency kinds: linear g(S) = slope*S, or saturating
    g(S) = cap*(1 - exp(-rate*S)).
    """

    budget: float
    kind: str = "linear"
    slope: float = 1.0
    cap: float = 1.0
    rate_const: float = 1.0

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.kind not in ("linear", "saturating"):
            raise ValueError(f"unknown efficiency kind {self.kind!r}")
        if self.kind == "linear" and self.slope <= 0:
            raise ValueError("slope must be > 0")
        if self.kind == "saturating" and (self.cap <= 0 or self.rate_const <= 0):
            raise ValueError("saturating efficiency needs cap > 0 and rate_const > 0")

    def rate(self) -> float:
        """Chasing speed g_S(S) afforded by the budget."""
        if self.kind == "linear":
            return self.slope * self.budget
        return self.cap * (1.0 - np.exp(-self.rate_const * self.budget))


@dataclass(frozen=True, eq=False)
class ConversionCurveParams:
    """Per-type parameters of beta_t = sum_j P_j beta0_j exp(mu_j t - nu_j t^2).

    nu_j must be positive wherever mu_j is nonzero (both vanish together only
    when the drift is zero).  `drift_norm` is needed to apply a style-update
    policy and may be omitted otherwise.
    """

    shares: np.ndarray
    beta0: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    drift_norm: float | None = None

    def __post_init__(self):
        for name in ("shares", "beta0", "mu", "nu"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        n = self.shares.size
        if any(getattr(self, k).size != n for k in ("beta0", "mu", "nu")):
            raise ValueError("per-type arrays must have equal length")
        if abs(self.shares.sum() - 1.0) > 1e-12 or np.any(self.shares <= 0):
            raise ValueError("shares must be positive and sum to 1")
        if np.any(self.beta0 <= 0) or np.any(self.beta0 >= 1):
            raise ValueError("beta0 entries must lie in (0, 1)")
        if np.any(self.nu < 0):
            raise ValueError("nu entries must be >= 0")
        if np.any((self.nu == 0) & (self.mu != 0)):
            raise ValueError("mu must vanish wherever nu is zero")
        b0 = self.initial_rate
        if not (0.0 < b0 < 1.0):
            raise ValueError(f"aggregate initial conversion rate {b0!r} outside (0, 1)")

    @property
    def initial_rate(self) -> float:
        """Aggregate conversion rate at t = 0."""
        return float(self.shares @ self.beta0)

    @staticmethod
    def single(beta0: float, nu: float, mu: float = 0.0) -> "ConversionCurveParams":
        return ConversionCurveParams(
            shares=np.array([1.0]),
            beta0=np.array([beta0]),
            mu=np.array([mu]),
            nu=np.array([nu]),
        )

    def slowdown(self, policy: "StyleUpdatePolicy | None") -> float:
        """Effective drift factor omega under a style-update policy."""
        if policy is None:
            return 1.0
        if self.drift_norm is None:
            raise ValueError("drift_norm is required to apply a style-update policy")
        if self.drift_norm == 0.0:
            return 0.0
        return max(0.0, 1.0 - policy.rate() / self.drift_norm)

    def effective(self, policy: "StyleUpdatePolicy | None") -> "ConversionCurveParams":
        """Fold a policy into the curve: mu -> omega*mu, nu -> omega^2*nu."""
        w = self.slowdown(policy)
        return ConversionCurveParams(
            shares=self.shares,
            beta0=self.beta0,
            mu=w * self.mu,
            nu=w * w * self.nu,
            drift_norm=self.drift_norm,
        )


def conversion_rate(params: ConversionCurveParams, t, policy: StyleUpdatePolicy | None = None):
    """Theoretical conversion rate at age(s) t, optionally with style updating."""
    t_in = np.asarray(t, dtype=float)
    ts = np.atleast_1d(t_in)
    if np.any(ts < 0):
        raise ValueError("t must be >= 0")
    w = params.slowdown(policy)
    args = w * params.mu[:, None] * ts[None, :] - w * w * params.nu[:, None] * ts[None, :] ** 2
    out = np.sum((params.shares * params.beta0)[:, None] * np.exp(args), axis=0)
    return float(out[0]) if t_in.ndim == 0 else out


@dataclass(frozen=True)
class CurveShape:
    """Classification of the conversion curve's interior maxima."""

    kind: str
    peak_times: tuple[float, ...] = ()


def single_peak_check(
    params: ConversionCurveParams,
    policy: StyleUpdatePolicy | None = None,
    grid_points: int = 10_000,
) -> CurveShape:
    """Count interior maxima via derivative sign changes plus root polishing."""
    eff = params.effective(policy)
    w = eff.shares * eff.beta0
    mu, nu = eff.mu, eff.nu

    if np.all(mu <= 0):
        return CurveShape(kind=MONOTONE)
    # every component decreases beyond its own mu/(2 nu); nu > 0 where mu > 0
    t_max = float(np.max(mu[mu > 0] / (2.0 * nu[mu > 0]))) * 1.02 + 1e-9

    def deriv(t):
        t = np.asarray(t, dtype=float)
        e = np.exp(mu[:, None] * t[None, ...] - nu[:, None] * t[None, ...] ** 2)
        return np.sum(w[:, None] * e * (mu[:, None] - 2.0 * nu[:, None] * t[None, ...]), axis=0)

    ts = np.linspace(0.0, t_max, grid_points)
    ds = deriv(ts)
    peaks = []
    pos = ds > 0
    for i in np.nonzero(pos[:-1] & ~pos[1:])[0]:
        peaks.append(brentq(lambda t: float(deriv(np.array([t]))[0]), ts[i], ts[i + 1], xtol=1e-12))
    if not peaks:
        return CurveShape(kind=MONOTONE)
    if len(peaks) == 1:
        return CurveShape(kind=SINGLE_PEAK, peak_times=(peaks[0],))
    return CurveShape(kind=MULTI_PEAK, peak_times=tuple(peaks))


@dataclass(frozen=True, eq=False)
class EquilibriumSolution:
    """Converged levels plus per-investment decisions and lifespans at t = 0."""

    levels: np.ndarray
    grid: InvestmentGrid
    decisions: tuple[SupplyDecision, ...]
    lifespans: np.ndarray
    residuals: np.ndarray
    population: tuple[ConsumerType, ...]
    trad: TraditionalStyle
    drift: PreferenceDrift
    phi: TransformFunction

    def __post_init__(self):
        if np.any(np.asarray(self.lifespans) <= 0):
            raise FixedPointDivergence("equilibrium produced a non-positive lifespan")

    @property
    def style_at_zero(self) -> dict[float, tuple[StyleVector, float]]:
        return {
            float(b): (dec.style, dec.price)
            for b, dec in zip(self.grid.budgets, self.decisions)
        }

    def curve_params(self, beta0, investment_index: int = 0) -> ConversionCurveParams:
        """Conversion-curve parameters for one investment level.

        beta0 supplies the per-type initial conversion rates, which are a
        property of the store itself and not pinned down by the equilibrium.
        """
        beta0 = np.atleast_1d(np.asarray(beta0, dtype=float))
        _, _, mu, nu = drift_coefficients(
            list(self.population), self.trad, self.drift, self.decisions[investment_index]
        )
        shares = np.array([c.share for c in self.population])
        return ConversionCurveParams(
            shares=shares, beta0=beta0, mu=mu, nu=nu, drift_norm=self.drift.norm
        )

    def to_dict(self) -> dict:
        pergen = []
        for i in range(len(self.grid)):
            _, _, mu, nu = drift_coefficients(
                list(self.population), self.trad, self.drift, self.decisions[i]
            )
            dec = self.decisions[i]
            pergen.append(
                {
                    "budget": float(self.grid.budgets[i]),
                    "style_product": dec.style.product.tolist(),
                    "style_storefront": dec.style.storefront.tolist(),
                    "price": dec.price,
                    "objective": dec.objective,
                    "lifespan": float(self.lifespans[i]),
                    "mu": mu.tolist(),
                    "nu": nu.tolist(),
                }
            )
        return {
            "levels": self.levels.tolist(),
            "residuals": self.residuals.tolist(),
            "investments": pergen,
        }


def _score_time_integral(phi, gammas, theta, alpha, mu, nu, horizon):
    """Per-type integral of F_j0(z - tau d, theta) over tau in [0, horizon]."""
    taus = 0.5 * horizon * (_GL_X + 1.0)
    args = alpha[:, None] + mu[:, None] * taus[None, :] - nu[:, None] * taus[None, :] ** 2
    vals = phi(args) * np.exp(-gammas * theta)[:, None]
    return 0.5 * horizon * (vals @ _GL_W)


def solve_equilibrium(
    population: list[ConsumerType],
    trad: TraditionalStyle,
    drift: PreferenceDrift,
    phi: TransformFunction,
    grid: InvestmentGrid,
    *,
    damping: float = 0.5,
    tol: float = 1e-6,
    max_iter: int = 500,
    theta_bounds: tuple[float, float] = (1e-3, 50.0),
    restart_seed: int = 0,
) -> EquilibriumSolution:
    """Find levels K with K_j * V_j(K) = 1 for all types.

    Damped Picard iteration K <- (1-a)K + a/V(K); if it stalls, falls back to
    backward-induction sweeps that solve one level at a time by bracketing.
    """
    validate_population(population)
    if drift.norm == 0.0:
        raise ValueError("equilibrium requires a nonzero preference drift")
    for i in range(len(grid)):
        grid.constraint(i).check_tight(population, trad, drift)
    gammas = np.array([c.gamma for c in population])
    m = len(population)

    def with_levels(K):
        return [c.with_level(float(k)) for c, k in zip(population, K)]

    def evaluate(K):
        """Supply decisions, lifespans, and V(K) at the given levels."""
        pop = with_levels(K)
        decisions, spans, V = [], [], np.zeros(m)
        for i in range(len(grid)):
            dec = solve_supply(
                pop, trad, drift, phi, grid.constraint(i), 0.0,
                theta_bounds=theta_bounds, restart_seed=restart_seed,
            )
            span = lifespan(
                dec, pop, trad, drift, phi, ShutdownRule(float(grid.thresholds[i]))
            )
            _, alpha, mu, nu = drift_coefficients(pop, trad, drift, dec)
            V += grid.measure[i] * _score_time_integral(
                phi, gammas, dec.price, alpha, mu, nu, span
            )
            decisions.append(dec)
            spans.append(span)
        return decisions, np.array(spans), V

    K = np.ones(m)
    best_resid = np.inf
    stall = 0
    try:
        for _ in range(max_iter):
            decisions, spans, V = evaluate(K)
            resid = np.abs(K * V - 1.0)
            worst = float(resid.max())
            if worst <= tol:
                return EquilibriumSolution(
                    levels=K.copy(), grid=grid, decisions=tuple(decisions),
                    lifespans=spans, residuals=resid,
                    population=tuple(with_levels(K)), trad=trad, drift=drift, phi=phi,
                )
            stall = stall + 1 if worst > 0.999 * best_resid else 0
            best_resid = min(best_resid, worst)
            if stall >= 25:
                break
            K = (1.0 - damping) * K + damping / V

        # backward induction: solve K_j given the others, last type first
        for _ in range(40):
            for j in reversed(range(m)):

                def excess(kj):
                    trial = K.copy()
                    trial[j] = kj
                    _, _, V = evaluate(trial)
                    return kj * V[j] - 1.0

                lo, hi = K[j] / 2.0, K[j] * 2.0
                for _ in range(80):
                    if excess(lo) < 0:
                        break
                    lo /= 2.0
                for _ in range(80):
                    if excess(hi) > 0:
                        break
                    hi *= 2.0
                K[j] = brentq(excess, lo, hi, xtol=1e-14, rtol=1e-12)
            decisions, spans, V = evaluate(K)
            resid = np.abs(K * V - 1.0)
            if float(resid.max()) <= tol:
                return EquilibriumSolution(
                    levels=K.copy(), grid=grid, decisions=tuple(decisions),
                    lifespans=spans, residuals=resid,
                    population=tuple(with_levels(K)), trad=trad, drift=drift, phi=phi,
                )
    except (NeverOpens, DominanceViolation) as exc:
        if isinstance(exc, DominanceViolation):
            raise
        raise FixedPointDivergence(
            f"iteration left the feasible region: {exc}"
        ) from exc

    raise FixedPointDivergence(
        f"levels did not reach residual {tol} within the iteration budget "
        f"(best {best_resid:.3g}); parameters are likely outside the "
        "dominant-consumer regime"
    )
