"""Potential-customer flows around a store, with and without competition.

A store's attraction decays exponentially with distance and is visible only
inside a disk that grows at the visibility speed k.  Competing stores split
the local maximum attraction in proportion to their own attractions.  The
uncompetitive flow has a closed form; the competitive flow is estimated by
importance-sampled Monte Carlo, and the long-run competitive flow collapses
to the closed form evaluated at a competing-equivalent density u'.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import QuadratureError

__all__ = [
    "StoreSite",
    "SpatialScene",
    "MonteCarloConfig",
    "potential_customers_closed_form",
    "competitive_attraction",
    "potential_customers_mc",
    "equivalent_density",
]


@dataclass(frozen=True)
class StoreSite:
    """A store location (km), its opening time (days), and visibility speed."""

    x: float
    y: float
    opening_time: float = 0.0
    speed: float = 1.0

    def __post_init__(self):
        if self.speed <= 0:
            raise ValueError("visibility speed must be > 0")

    @property
    def location(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def radius(self, t: float) -> float:
        """Visibility radius at time t."""
        return max(0.0, self.speed * (t - self.opening_time))


@dataclass(frozen=True)
class SpatialScene:
    """A focal store, its competitors, and the shared attenuation and density."""

    focal: StoreSite
    competitors: tuple[StoreSite, ...]
    delta: float
    density: float

    def __post_init__(self):
        object.__setattr__(self, "competitors", tuple(self.competitors))
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.density <= 0:
            raise ValueError("density must be > 0")

    @property
    def sites(self) -> tuple[StoreSite, ...]:
        """All stores, focal first (index 0)."""
        return (self.focal, *self.competitors)

    def locations(self) -> np.ndarray:
        return np.array([[s.x, s.y] for s in self.sites])


@dataclass(frozen=True)
class MonteCarloConfig:
    """Sample count, seed, and truncation radius for flow estimation."""

    samples: int = 100_000
    seed: int = 0
    truncation_radius: float | None = None

    def __post_init__(self):
        if self.samples < 10_000:
            raise ValueError("at least 10^4 samples are required for accepted estimates")

    def radius(self, delta: float) -> float:
        # default keeps the neglected tail mass below 1e-6 of the total
        if self.truncation_radius is not None:
            return self.truncation_radius
        return np.log(1e6) / delta


def potential_customers_closed_form(u: float, delta: float, k: float, t) :
    """Uncompetitive flow 2*pi*u/delta^2 * (1 - (delta*k*t + 1)*exp(-delta*k*t))."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    a = delta * k * t
    out = 2.0 * np.pi * u / delta**2 * (1.0 - (a + 1.0) * np.exp(-a))
    return out if out.shape else float(out)


def _attractions(scene: SpatialScene, points: np.ndarray, t: float) -> np.ndarray:
    """q_jt at each point for every store; shape (n_points, n_stores)."""
    locs = scene.locations()
    diff = points[:, None, :] - locs[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    radii = np.array([s.radius(t) for s in scene.sites])
    return np.where(dist <= radii[None, :], np.exp(-scene.delta * dist), 0.0)


def competitive_attraction(scene: SpatialScene, point, t: float) -> np.ndarray:
    """Per-store competitive attraction at one point, focal first.

    The local maximum attraction is split across visible stores in proportion
    to their uncompetitive attractions; zero where no store is visible.
    """
    q = _attractions(scene, np.asarray(point, dtype=float)[None, :], t)[0]
    total = q.sum()
    if total == 0.0:
        return np.zeros_like(q)
    return q.max() * q / total


def potential_customers_mc(
    scene: SpatialScene, t: float, cfg: MonteCarloConfig
) -> tuple[float, float]:
    """Importance-sampled estimate of the focal store's flow and its standard error.

    Samples radius ~ Exp(delta) truncated to the truncation disk and a uniform
    angle, matching the integrand's dominant factor.  Deterministic per seed.
    """
    rng = np.random.default_rng(cfg.seed)
    delta = scene.delta
    R = cfg.radius(delta)
    mass = 1.0 - np.exp(-delta * R)

    n = cfg.samples
    u01 = rng.random(n)
    radii = -np.log1p(-u01 * mass) / delta
    angles = rng.random(n) * 2.0 * np.pi
    points = scene.focal.location[None, :] + np.column_stack(
        [radii * np.cos(angles), radii * np.sin(angles)]
    )

    q = _attractions(scene, points, t)
    total = q.sum(axis=1)
    qmax = q.max(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        q_tilde = np.where(total > 0.0, qmax * q[:, 0] / total, 0.0)

    # weight = u * q_tilde / pdf, with pdf = delta*exp(-delta r) / (2 pi r mass)
    weights = scene.density * q_tilde * 2.0 * np.pi * radii * mass * np.exp(delta * radii) / delta
    estimate = float(weights.mean())
    stderr = float(weights.std(ddof=1) / np.sqrt(n))
    return estimate, stderr


def equivalent_density(scene: SpatialScene, *, rel_tol: float = 1e-9) -> float:
    """Competing-equivalent foot traffic density u'.

    The uniform density that, competition-free, reproduces the long-run
    competitive flow of the focal store.  Equals u when there is no
    competition; never exceeds u.  The nearest-store distance in the
    integrand ranges over every store including the focal one, which is
    what the long-run limit of the competitive attraction requires (the
    Monte Carlo flow identity pins this down).
    """
    if not scene.competitors:
        return scene.density
    delta = scene.delta
    x0 = scene.focal.location
    rel = np.array([[s.x, s.y] for s in scene.competitors]) - x0[None, :]
    # the focal store participates in the nearest-store distance as site 0
    rho = np.concatenate([[0.0], np.linalg.norm(rel, axis=1)])
    alpha = np.concatenate([[0.0], np.arctan2(rel[:, 1], rel[:, 0])])
    # generous truncation: the quadrature is cheap and the tail carries the
    # extra (delta*R + 1) factor that a bare exp bound misses
    R = np.log(1e12) / delta + float(np.max(rho))
    gl_x, gl_w = np.polynomial.legendre.leggauss(32)
    n_sites = rho.size

    def ring(r):
        # the nearest-site switch angles satisfy A cos + B sin = C;
        # split the circle there so every arc is smooth for Gauss-Legendre
        edges = {0.0, 2.0 * np.pi}
        for i in range(n_sites):
            for j in range(i + 1, n_sites):
                a = 2.0 * r * (rho[j] * np.cos(alpha[j]) - rho[i] * np.cos(alpha[i]))
                b = 2.0 * r * (rho[j] * np.sin(alpha[j]) - rho[i] * np.sin(alpha[i]))
                c = rho[j] ** 2 - rho[i] ** 2
                s = np.hypot(a, b)
                if s > 0 and abs(c) <= s:
                    base = np.arctan2(b, a)
                    off = np.arccos(np.clip(c / s, -1.0, 1.0))
                    for ang in (base + off, base - off):
                        edges.add(float(ang % (2.0 * np.pi)))
        edges = np.array(sorted(edges))
        widths = np.diff(edges)
        keep = widths > 1e-14
        lo = edges[:-1][keep]
        w = widths[keep]
        ang = lo[:, None] + 0.5 * w[:, None] * (gl_x[None, :] + 1.0)
        wt = 0.5 * w[:, None] * gl_w[None, :]
        x = r * np.cos(ang)
        y = r * np.sin(ang)
        d_comp = np.sqrt(
            (x[None, :, :] - rel[:, 0, None, None]) ** 2
            + (y[None, :, :] - rel[:, 1, None, None]) ** 2
        )
        denom = np.exp(-delta * r) + np.sum(np.exp(-delta * d_comp), axis=0)
        d_nearest = np.minimum(d_comp.min(axis=0), r)
        vals = np.exp(-delta * (r + d_nearest)) / denom
        return float(np.sum(wt * vals)) * r

    # ring is smooth except at finitely many tangency radii; QUADPACK's
    # roundoff heuristic fires early there, so judge by the achieved error
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        total, abserr = integrate.quad(ring, 0.0, R, epsabs=0.0, epsrel=rel_tol, limit=400)
    if not np.isfinite(total) or total <= 0 or abserr > 1e-7 * total:
        raise QuadratureError("equivalent-density integral did not reach its tolerance")
    return scene.density * delta**2 / (2.0 * np.pi) * total
