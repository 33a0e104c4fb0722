"""Cobb-Douglas demand: optimal purchase probability densities over a style set.

Consumers maximize U_j(rho) = integral of F_j * ln(rho) subject to rho
integrating to one.  The maximizer is proportional to the scoring function,
so the only numerical work is the normalizing integral over the provided
style set.  Equilibrium style sets are unions of drift-line segments (one per
investment level), integrated by arc length.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import DomainError, QuadratureError
from .styles import (
    ConsumerType,
    PreferenceDrift,
    StyleVector,
    TraditionalStyle,
    TransformFunction,
    score,
    validate_population,
)

__all__ = ["Segment", "StyleSet", "PurchaseDensity", "optimal_density", "utility"]

_REL_TOL = 1e-10
_MAX_NODES = 8192


@dataclass(frozen=True, eq=False)
class Segment:
    """A one-parameter family of styles: base + s*direction for s in [0, length].

    `price` is either a constant or a callable mapping the offset s to a price.
    """

    base: StyleVector
    direction: np.ndarray
    length: float
    price: float | Callable[[float], float]

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            raise ValueError("direction must be nonzero")
        d = d / n
        d.flags.writeable = False
        object.__setattr__(self, "direction", d)
        if self.length <= 0:
            raise ValueError("length must be > 0")

    def style_at(self, s: float | np.ndarray) -> np.ndarray:
        """Concatenated style coordinates at offset(s) s."""
        s = np.asarray(s, dtype=float)
        return self.base.concat()[None, :] + s[..., None] * self.direction[None, :]

    def price_at(self, s: float | np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if callable(self.price):
            return np.vectorize(self.price)(s).astype(float)
        return np.full(s.shape, float(self.price))


@dataclass(frozen=True, eq=False)
class StyleSet:
    """Bounded set of styles on offer, either segments or weighted points."""

    segments: tuple[Segment, ...] = ()
    points: tuple[tuple[StyleVector, float, float], ...] = ()  # (style, price, weight)

    def __post_init__(self):
        if bool(self.segments) == bool(self.points):
            raise ValueError("provide either segments or points, not both or neither")
        for _, price, weight in self.points:
            if price <= 0:
                raise ValueError("prices must be > 0")
            if weight <= 0:
                raise ValueError("quadrature weights must be > 0")
        if self.points and not np.isfinite(sum(w for _, _, w in self.points)):
            raise ValueError("total quadrature weight must be finite")

    @staticmethod
    def from_segments(segments) -> "StyleSet":
        return StyleSet(segments=tuple(segments))

    @staticmethod
    def from_points(points) -> "StyleSet":
        return StyleSet(points=tuple(points))


def _segment_scores(
    seg: Segment,
    ctype: ConsumerType,
    trad: TraditionalStyle,
    drift: PreferenceDrift,
    phi: TransformFunction,
    t: float,
    s: np.ndarray,
) -> np.ndarray:
    """Vectorized F_jt along a segment at offsets s."""
    zhat = (
        np.concatenate(
            [ctype.a / ctype.lam + trad.x_bar0 + t * drift.c, ctype.b / ctype.lam + trad.xi_bar0]
        )
    )
    zs = seg.style_at(s)
    dist2 = np.sum((zs - zhat[None, :]) ** 2, axis=-1)
    args = ctype.score_offset - 0.5 * ctype.lam * dist2
    return phi(args) * np.exp(-ctype.gamma * seg.price_at(s))


@lru_cache(maxsize=None)
def _gauss_nodes(n: int):
    return np.polynomial.legendre.leggauss(n)


def _integrate_segment(f, length: float) -> float:
    """Adaptive composite Gauss-Legendre: double nodes until stable to 1e-10."""
    n = 64
    prev = None
    while n <= _MAX_NODES:
        x, w = _gauss_nodes(n)
        s = 0.5 * length * (x + 1.0)
        val = 0.5 * length * float(np.sum(w * f(s)))
        if prev is not None and abs(val - prev) <= _REL_TOL * max(abs(val), 1e-300):
            return val
        prev = val
        n *= 2
    raise QuadratureError("segment integral did not converge to relative tolerance 1e-10")


@dataclass(frozen=True, eq=False)
class PurchaseDensity:
    """Optimal purchase densities rho_j = K_j * F_j restricted to a style set."""

    levels: np.ndarray  # K_jt per type
    styles: StyleSet
    population: tuple[ConsumerType, ...]
    trad: TraditionalStyle
    drift: PreferenceDrift
    phi: TransformFunction
    t: float

    def value(self, type_index: int, z: StyleVector, price: float) -> float:
        """Density value K_j * F_jt(z, price) at a point of the support."""
        c = self.population[type_index]
        return float(self.levels[type_index]) * score(
            c, self.trad, self.drift, self.phi, z, price, self.t
        )

    def _values_on_segment(self, type_index: int, seg: Segment, s: np.ndarray) -> np.ndarray:
        c = self.population[type_index]
        return self.levels[type_index] * _segment_scores(
            seg, c, self.trad, self.drift, self.phi, self.t, s
        )


def optimal_density(
    population: list[ConsumerType],
    styles: StyleSet,
    t: float,
    *,
    trad: TraditionalStyle,
    drift: PreferenceDrift,
    phi: TransformFunction,
) -> PurchaseDensity:
    """Solve the consumers' problem: K_jt^-1 = integral of F_jt over the set."""
    validate_population(population)
    levels = np.empty(len(population))
    for j, c in enumerate(population):
        if styles.points:
            total = 0.0
            for z, price, weight in styles.points:
                total += weight * score(c, trad, drift, phi, z, price, t)
        else:
            total = 0.0
            for seg in styles.segments:
                total += _integrate_segment(
                    lambda s, seg=seg: _segment_scores(seg, c, trad, drift, phi, t, s),
                    seg.length,
                )
        if not np.isfinite(total) or total <= 0:
            raise QuadratureError("normalizing integral is not finite and positive")
        levels[j] = 1.0 / total
    levels.flags.writeable = False
    return PurchaseDensity(
        levels=levels,
        styles=styles,
        population=tuple(population),
        trad=trad,
        drift=drift,
        phi=phi,
        t=t,
    )


def utility(density, type_index: int, styles: StyleSet | None = None, t: float | None = None):
    """Cobb-Douglas log-utility of a (possibly perturbed) purchase density.

    `density` needs `value(j, z, price)`; anything quacking like a
    PurchaseDensity works, so competing densities can be scored too.  The
    style set and time default to the ones the density was built on.
    """
    base = density
    styles = styles if styles is not None else base.styles
    t = t if t is not None else base.t
    c = base.population[type_index]
    trad, drift, phi = base.trad, base.drift, base.phi

    if styles.points:
        total = 0.0
        for z, price, weight in styles.points:
            rho = density.value(type_index, z, price)
            if rho <= 0:
                raise DomainError("density must be strictly positive on the support")
            f = score(c, trad, drift, phi, z, price, t)
            total += weight * f * np.log(rho)
        return float(total)

    total = 0.0
    for seg in styles.segments:

        def integrand(s, seg=seg):
            f = _segment_scores(seg, c, trad, drift, phi, t, s)
            if hasattr(density, "_values_on_segment"):
                rho = density._values_on_segment(type_index, seg, s)
            else:
                rho = np.array(
                    [
                        density.value(
                            type_index,
                            StyleVector.from_concat(seg.style_at(si)[0], seg.base.p),
                            float(seg.price_at(np.asarray(si))),
                        )
                        for si in np.atleast_1d(s)
                    ]
                )
            if np.any(rho <= 0):
                raise DomainError("density must be strictly positive on the support")
            return f * np.log(rho)

        total += _integrate_segment(integrand, seg.length)
    return float(total)
