"""Style vectors, transform functions, consumer scoring, and preference drift.

A store's style is a point z = (x, xi) in R^(p+q): product attributes x plus
storefront attributes xi.  Each consumer type scores styles through a strictly
increasing positive transform of a linear-quadratic form, damped by price.
The traditional preference style drifts linearly in the product block only,
which makes every scoring function time-translation invariant.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError

__all__ = [
    "StyleVector",
    "TransformFunction",
    "ConsumerType",
    "PreferenceDrift",
    "TraditionalStyle",
    "validate_population",
    "transform_for_population",
    "optimal_preference_style",
    "score",
]


def _as_vector(v, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"{name} must be a 1-D vector with at least one entry")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class StyleVector:
    """A point z = (product, storefront) in the style space R^(p+q)."""

    product: np.ndarray
    storefront: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "product", _as_vector(self.product, "product"))
        object.__setattr__(self, "storefront", _as_vector(self.storefront, "storefront"))

    @property
    def p(self) -> int:
        return self.product.size

    @property
    def q(self) -> int:
        return self.storefront.size

    def concat(self) -> np.ndarray:
        """Concatenated coordinates of dimension p+q."""
        return np.concatenate([self.product, self.storefront])

    @staticmethod
    def from_concat(vec: np.ndarray, p: int) -> "StyleVector":
        vec = np.asarray(vec, dtype=float)
        return StyleVector(vec[:p], vec[p:])

    def shifted(self, delta: np.ndarray) -> "StyleVector":
        return StyleVector.from_concat(self.concat() + delta, self.p)

    def distance(self, other: "StyleVector") -> float:
        return float(np.linalg.norm(self.concat() - other.concat()))


@dataclass(frozen=True)
class TransformFunction:
    """Positive, strictly increasing, integrable transform on (-inf, cap].

    Two families are supported: exponential exp(kappa*u) with kappa > 0, and
    the inverse power (cap + c_eps - u)^(-alpha) with alpha > 1, c_eps > 0.
    """

    kind: str
    cap: float
    kappa: float = 1.0
    alpha: float = 2.0
    c_eps: float = 1.0

    def __post_init__(self):
        if self.kind not in ("exponential", "inverse_power"):
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if not np.isfinite(self.cap):
            raise ValueError("cap must be finite")
        if self.kind == "exponential" and self.kappa <= 0:
            raise ValueError("kappa must be > 0")
        if self.kind == "inverse_power" and (self.alpha <= 1 or self.c_eps <= 0):
            raise ValueError("inverse_power needs alpha > 1 and c_eps > 0")

    @staticmethod
    def exponential(kappa: float = 1.0, cap: float = 1e6) -> "TransformFunction":
        return TransformFunction(kind="exponential", cap=cap, kappa=kappa)

    @staticmethod
    def inverse_power(alpha: float, c_eps: float, cap: float) -> "TransformFunction":
        return TransformFunction(kind="inverse_power", cap=cap, alpha=alpha, c_eps=c_eps)

    def _check_domain(self, u):
        if np.any(np.asarray(u) > self.cap + 1e-12):
            raise DomainError(
                f"transform argument above domain cap {self.cap}; "
                "the cap is inconsistent with the scoring inputs"
            )

    def __call__(self, u):
        self._check_domain(u)
        return self.unchecked(np.asarray(u, dtype=float))

    def derivative(self, u):
        self._check_domain(u)
        return self.unchecked_derivative(np.asarray(u, dtype=float))

    def unchecked(self, u):
        """Transform value without the domain check, for internal hot loops
        whose arguments are in-domain by construction."""
        if self.kind == "exponential":
            return np.exp(self.kappa * u)
        return (self.cap + self.c_eps - u) ** (-self.alpha)

    def unchecked_derivative(self, u):
        if self.kind == "exponential":
            return self.kappa * np.exp(self.kappa * u)
        return self.alpha * (self.cap + self.c_eps - u) ** (-self.alpha - 1)

    def integral_to_cap(self) -> float:
        """Analytic value of the integral over (-inf, cap]."""
        if self.kind == "exponential":
            return float(np.exp(self.kappa * self.cap) / self.kappa)
        return float(self.c_eps ** (1.0 - self.alpha) / (self.alpha - 1.0))

    def with_cap(self, cap: float) -> "TransformFunction":
        return replace(self, cap=cap)


@dataclass(frozen=True, eq=False)
class ConsumerType:
    """One consumer segment and its preference parameters.

    `level` is the equilibrium purchase-probability level K_j; it is unknown
    until an equilibrium is solved and may be left as None before that.
    """

    a: np.ndarray
    b: np.ndarray
    lam: float
    gamma: float
    share: float
    level: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "a", _as_vector(self.a, "a"))
        object.__setattr__(self, "b", _as_vector(self.b, "b"))
        if self.lam <= 0:
            raise ValueError("lam must be > 0")
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if not (0.0 < self.share <= 1.0):
            raise ValueError("share must lie in (0, 1]")
        if self.level is not None and self.level <= 0:
            raise ValueError("level must be > 0 when set")

    @property
    def score_offset(self) -> float:
        """Peak value of the scoring argument: (a'a + b'b) / (2*lam)."""
        return float((self.a @ self.a + self.b @ self.b) / (2.0 * self.lam))

    def with_level(self, level: float) -> "ConsumerType":
        return replace(self, level=level)


def validate_population(population: list[ConsumerType]) -> None:
    """Check shared invariants of a consumer population."""
    if not population:
        raise ValueError("population must not be empty")
    p, q = population[0].a.size, population[0].b.size
    for c in population:
        if c.a.size != p or c.b.size != q:
            raise ValueError("all consumer types must share the dimensions (p, q)")
    total = sum(c.share for c in population)
    if abs(total - 1.0) > 1e-12:
        raise ValueError(f"population shares must sum to 1 (got {total!r})")


def transform_for_population(
    population: list[ConsumerType], kind: str = "exponential", **params
) -> TransformFunction:
    """Build a transform whose cap keeps every score argument in-domain.

    The scoring argument never exceeds max_j C_j, so cap = max_j C_j + 1.
    """
    cap = max(c.score_offset for c in population) + 1.0
    if kind == "exponential":
        return TransformFunction.exponential(kappa=params.get("kappa", 1.0), cap=cap)
    return TransformFunction.inverse_power(
        alpha=params.get("alpha", 2.0), c_eps=params.get("c_eps", 1.0), cap=cap
    )


@dataclass(frozen=True, eq=False)
class PreferenceDrift:
    """Linear drift rate of the traditional product style; storefront is static."""

    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c", _as_vector(self.c, "c"))

    def full(self, q: int) -> np.ndarray:
        """Full drift d = (c', 0')' of dimension p+q."""
        return np.concatenate([self.c, np.zeros(q)])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.c))


@dataclass(frozen=True, eq=False)
class TraditionalStyle:
    """Traditional preference style at time zero."""

    x_bar0: np.ndarray
    xi_bar0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_bar0", _as_vector(self.x_bar0, "x_bar0"))
        object.__setattr__(self, "xi_bar0", _as_vector(self.xi_bar0, "xi_bar0"))

    def at(self, drift: PreferenceDrift, t: float) -> tuple[np.ndarray, np.ndarray]:
        return self.x_bar0 + t * drift.c, self.xi_bar0


def optimal_preference_style(
    ctype: ConsumerType,
    trad: TraditionalStyle,
    drift: PreferenceDrift,
    t: float,
) -> StyleVector:
    """Unique maximizer of the scoring function over the whole style space."""
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    x_bar_t, xi_bar_t = trad.at(drift, t)
    return StyleVector(
        ctype.a / ctype.lam + x_bar_t,
        ctype.b / ctype.lam + xi_bar_t,
    )


def score(
    ctype: ConsumerType,
    trad: TraditionalStyle,
    drift: PreferenceDrift,
    phi: TransformFunction,
    z: StyleVector,
    theta: float,
    t: float,
) -> float:
    """Scoring value phi(C_j - lam/2 * ||z - zhat||^2) * exp(-gamma*theta)."""
    if theta < 0:
        raise ValueError("theta must be >= 0")
    zhat = optimal_preference_style(ctype, trad, drift, t)
    dist2 = float(np.sum((z.concat() - zhat.concat()) ** 2))
    arg = ctype.score_offset - 0.5 * ctype.lam * dist2
    return float(phi(arg)) * float(np.exp(-ctype.gamma * theta))
