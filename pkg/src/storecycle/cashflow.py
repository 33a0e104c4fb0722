"""Full cash-flow model and life-cycle curve metrics.

Cash flow is the product of the potential-customer flow, the average customer
price, and the conversion rate.  The curve rises with visibility broadening
and decays with preference shifting; its peak and the point where it has
fallen 95% from the peak (the closing point) summarize the life cycle.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .equilibrium import (
    MULTI_PEAK,
    ConversionCurveParams,
    conversion_rate,
    single_peak_check,
)
from .errors import NoPeak
from .spatial import potential_customers_closed_form

__all__ = ["CashFlowParams", "CurveMetrics", "cash_flow", "curve_metrics", "parameter_sweep"]


@dataclass(frozen=True, eq=False)
class CashFlowParams:
    """Everything the closed-form curve needs.

    u_eff is the plain foot-traffic density u in the uncompetitive case, or
    the competing-equivalent density u' otherwise.  theta is the average
    customer price.
    """

    u_eff: float
    delta: float
    k: float
    theta: float
    curve: ConversionCurveParams

    def __post_init__(self):
        for name in ("u_eff", "delta", "k", "theta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class CurveMetrics:
    peak_time: float
    peak_value: float
    closing_time: float
    ramp_up: float
    theoretical_lifespan: float

    def to_dict(self) -> dict:
        return {
            "peak_time": self.peak_time,
            "peak_value": self.peak_value,
            "closing_time": self.closing_time,
            "ramp_up": self.ramp_up,
            "theoretical_lifespan": self.theoretical_lifespan,
        }


def cash_flow(params: CashFlowParams, t):
    """CF_t = N_t * theta * beta_t; zero at opening, nonnegative throughout."""
    t = np.asarray(t, dtype=float)
    n = potential_customers_closed_form(params.u_eff, params.delta, params.k, t)
    beta = conversion_rate(params.curve, t)
    out = np.asarray(n) * params.theta * np.asarray(beta)
    return out if out.shape else float(out)


def _decay_horizon(curve: ConversionCurveParams) -> float:
    """A time by which every conversion component is strictly decreasing."""
    with np.errstate(divide="ignore", invalid="ignore"):
        peaks = np.where(curve.nu > 0, np.maximum(curve.mu, 0.0) / (2.0 * curve.nu), 0.0)
    return float(np.max(peaks))


def curve_metrics(params: CashFlowParams, *, closing_tol: float = 1e-4) -> CurveMetrics:
    """Peak, closing point, and ramp-up of the cash-flow curve.

    The peak is found by golden section after classifying the conversion
    curve; multi-peak curves report the global maximum and the last 95%-drop
    crossing.  Raises NoPeak when the curve never decays.
    """
    curve = params.curve
    if np.all(curve.nu == 0.0) and np.all(curve.mu <= 0.0):
        if np.all(curve.mu == 0.0):
            raise NoPeak("conversion rate is constant; cash flow has no interior peak")

    shape = single_peak_check(curve)
    multi = shape.kind == MULTI_PEAK

    # bracket the decaying tail: march until cash flow falls below 5% of the best
    t_hi = max(_decay_horizon(curve), 10.0 / (params.delta * params.k), 1.0)
    best = float(np.max(cash_flow(params, np.linspace(0.0, t_hi, 2049))))
    for _ in range(200):
        if float(cash_flow(params, t_hi)) < 0.01 * best:
            break
        t_hi *= 2.0
        best = max(best, float(np.max(cash_flow(params, np.linspace(0.0, t_hi, 2049)))))
    else:
        raise NoPeak("cash flow never decays below 5% of its running maximum")

    ts = np.linspace(0.0, t_hi, 8193)
    cf = np.asarray(cash_flow(params, ts))
    i = int(np.argmax(cf))
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, ts.size - 1)]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = float(cash_flow(params, c)), float(cash_flow(params, d))
    while b - a > 1e-10 * (1.0 + abs(b)):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = float(cash_flow(params, c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = float(cash_flow(params, d))
    peak_time = 0.5 * (a + b)
    peak_value = float(cash_flow(params, peak_time))

    threshold = 0.05 * peak_value
    after = ts >= peak_time
    below = after & (cf <= threshold)
    if multi:
        # last crossing: the final grid point above the threshold
        above_idx = np.nonzero(after & (cf > threshold))[0]
        j = int(above_idx[-1])
    else:
        j = int(np.nonzero(below)[0][0]) - 1
    lo_t, hi_t = float(ts[j]), float(ts[min(j + 1, ts.size - 1)])
    while hi_t - lo_t > closing_tol:
        mid = 0.5 * (lo_t + hi_t)
        if float(cash_flow(params, mid)) > threshold:
            lo_t = mid
        else:
            hi_t = mid
    closing_time = 0.5 * (lo_t + hi_t)

    return CurveMetrics(
        peak_time=peak_time,
        peak_value=peak_value,
        closing_time=closing_time,
        ramp_up=float(round(peak_time)),
        theoretical_lifespan=closing_time,
    )


def _with_axis(base: CashFlowParams, axis: str, value: float) -> CashFlowParams:
    if axis == "u":
        return replace(base, u_eff=value)
    if axis == "k":
        return replace(base, k=value)
    if axis == "nu":
        curve = ConversionCurveParams(
            shares=base.curve.shares,
            beta0=base.curve.beta0,
            mu=base.curve.mu,
            nu=np.full_like(base.curve.nu, value),
            drift_norm=base.curve.drift_norm,
        )
        return replace(base, curve=curve)
    raise ValueError(f"unknown sweep axis {axis!r} (expected 'u', 'nu', or 'k')")


def parameter_sweep(
    base: CashFlowParams,
    axis: str,
    values,
    *,
    curve_points: int = 512,
) -> list[dict]:
    """Metrics and a sampled curve for each value along one parameter axis."""
    values = [float(v) for v in values]
    if any(v <= 0 for v in values):
        raise ValueError("sweep values must be positive")
    out = []
    for v in values:
        params = _with_axis(base, axis, v)
        metrics = curve_metrics(params)
        ts = np.linspace(0.0, 1.1 * metrics.closing_time, curve_points)
        out.append(
            {
                "value": v,
                "metrics": metrics,
                "t": ts,
                "cash_flow": np.asarray(cash_flow(params, ts)),
            }
        )
    return out
