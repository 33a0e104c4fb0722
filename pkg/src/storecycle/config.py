"""Scenario configuration: one YAML document drives every command.

Sections (all optional unless a command needs them):

  seed                  integer; falls back to env STORECYCLE_SEED, then 0
  transform             {kind: exponential|inverse_power, kappa|alpha+c_eps}
  population            list of {a, b, lambda, gamma, share}
  traditional_style     {product: [...], storefront: [...]}
  drift                 product drift rate vector c
  constraint            {kind: quadratic_norm} or {kind: weighted_quadratic, weights}
  investments           list of {budget, threshold, weight}
  scene                 {delta, u, focal: {x, y, opening_time, speed}, competitors}
  curve                 {theta, types: [{share, beta0, mu, nu}], drift_norm}
  style_update          {budget, efficiency: {kind: linear|saturating, ...}}
  run                   {mc_samples, theta_bounds, equilibrium_tol, damping}

Validation reports the failing field by path.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .equilibrium import ConversionCurveParams, InvestmentGrid, StyleUpdatePolicy
from .errors import ConfigError
from .spatial import SpatialScene, StoreSite, equivalent_density
from .styles import (
    ConsumerType,
    PreferenceDrift,
    TraditionalStyle,
    TransformFunction,
    transform_for_population,
    validate_population,
)

__all__ = ["ScenarioConfig", "load_config", "load_scene"]


def _ctx(path: str, exc: Exception) -> ConfigError:
    return ConfigError(f"{path}: {exc}")


def _require(mapping, key, path):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ConfigError(f"{path}.{key}: required field is missing")
    return mapping[key]


def _number(value, path) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _vector(value, path) -> list[float]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{path}: expected a non-empty list of numbers")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _parse_site(doc, path) -> StoreSite:
    try:
        return StoreSite(
            x=_number(_require(doc, "x", path), f"{path}.x"),
            y=_number(_require(doc, "y", path), f"{path}.y"),
            opening_time=_number(doc.get("opening_time", 0.0), f"{path}.opening_time"),
            speed=_number(_require(doc, "speed", path), f"{path}.speed"),
        )
    except ValueError as exc:
        raise _ctx(path, exc)


def _parse_scene(doc, path) -> SpatialScene:
    comps = doc.get("competitors", [])
    if not isinstance(comps, list):
        raise ConfigError(f"{path}.competitors: expected a list")
    try:
        return SpatialScene(
            focal=_parse_site(_require(doc, "focal", path), f"{path}.focal"),
            competitors=tuple(
                _parse_site(c, f"{path}.competitors[{i}]") for i, c in enumerate(comps)
            ),
            delta=_number(_require(doc, "delta", path), f"{path}.delta"),
            density=_number(_require(doc, "u", path), f"{path}.u"),
        )
    except ValueError as exc:
        raise _ctx(path, exc)


@dataclass
class ScenarioConfig:
    """Validated scenario; sections a command does not need stay None."""

    seed: int = 0
    transform_doc: dict = field(default_factory=lambda: {"kind": "exponential", "kappa": 1.0})
    population: list[ConsumerType] | None = None
    trad: TraditionalStyle | None = None
    drift: PreferenceDrift | None = None
    cost_weights: np.ndarray | None = None
    investments: InvestmentGrid | None = None
    scene: SpatialScene | None = None
    curve: ConversionCurveParams | None = None
    theta: float | None = None
    policy: StyleUpdatePolicy | None = None
    mc_samples: int = 200_000
    theta_bounds: tuple[float, float] = (1e-3, 50.0)
    equilibrium_tol: float = 1e-6
    damping: float = 0.5

    def transform(self) -> TransformFunction:
        kind = self.transform_doc.get("kind", "exponential")
        if self.population is not None:
            return transform_for_population(
                self.population,
                kind=kind,
                **{k: v for k, v in self.transform_doc.items() if k != "kind"},
            )
        if kind == "exponential":
            return TransformFunction.exponential(kappa=self.transform_doc.get("kappa", 1.0))
        return TransformFunction.inverse_power(
            alpha=self.transform_doc.get("alpha", 2.0),
            c_eps=self.transform_doc.get("c_eps", 1.0),
            cap=self.transform_doc.get("cap", 1e6),
        )

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigError(f"config is missing required section(s): {', '.join(missing)}")

    def effective_density(self) -> float:
        """u' of the scene when competitors exist, the plain u otherwise."""
        self.require("scene")
        return equivalent_density(self.scene)


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file")
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(doc)


def parse_config(doc: dict) -> ScenarioConfig:
    cfg = ScenarioConfig()
    cfg.seed = int(doc.get("seed", os.environ.get("STORECYCLE_SEED", 0)))

    if "transform" in doc:
        tdoc = doc["transform"]
        if not isinstance(tdoc, dict) or tdoc.get("kind") not in ("exponential", "inverse_power"):
            raise ConfigError("transform.kind: must be 'exponential' or 'inverse_power'")
        cfg.transform_doc = tdoc

    if "population" in doc:
        pop = []
        for i, entry in enumerate(doc["population"]):
            path = f"population[{i}]"
            try:
                pop.append(
                    ConsumerType(
                        a=_vector(_require(entry, "a", path), f"{path}.a"),
                        b=_vector(_require(entry, "b", path), f"{path}.b"),
                        lam=_number(_require(entry, "lambda", path), f"{path}.lambda"),
                        gamma=_number(_require(entry, "gamma", path), f"{path}.gamma"),
                        share=_number(_require(entry, "share", path), f"{path}.share"),
                    )
                )
            except ValueError as exc:
                raise _ctx(path, exc)
        try:
            validate_population(pop)
        except ValueError as exc:
            raise _ctx("population", exc)
        cfg.population = pop

    if "traditional_style" in doc:
        tdoc = doc["traditional_style"]
        try:
            cfg.trad = TraditionalStyle(
                x_bar0=_vector(_require(tdoc, "product", "traditional_style"),
                               "traditional_style.product"),
                xi_bar0=_vector(_require(tdoc, "storefront", "traditional_style"),
                                "traditional_style.storefront"),
            )
        except ValueError as exc:
            raise _ctx("traditional_style", exc)

    if "drift" in doc:
        try:
            cfg.drift = PreferenceDrift(c=_vector(doc["drift"], "drift"))
        except ValueError as exc:
            raise _ctx("drift", exc)

    if "constraint" in doc:
        cdoc = doc["constraint"]
        kind = cdoc.get("kind", "quadratic_norm")
        if kind == "weighted_quadratic":
            cfg.cost_weights = np.asarray(
                _vector(_require(cdoc, "weights", "constraint"), "constraint.weights")
            )
        elif kind != "quadratic_norm":
            raise ConfigError(
                "constraint.kind: must be 'quadratic_norm' or 'weighted_quadratic'"
            )

    if "investments" in doc:
        budgets, thresholds, measure = [], [], []
        for i, entry in enumerate(doc["investments"]):
            path = f"investments[{i}]"
            budgets.append(_number(_require(entry, "budget", path), f"{path}.budget"))
            thresholds.append(_number(_require(entry, "threshold", path), f"{path}.threshold"))
            measure.append(_number(entry.get("weight", 1.0), f"{path}.weight"))
        try:
            cfg.investments = InvestmentGrid(
                budgets=np.array(budgets),
                thresholds=np.array(thresholds),
                measure=np.array(measure),
                cost_weights=cfg.cost_weights,
            )
        except ValueError as exc:
            raise _ctx("investments", exc)

    if "scene" in doc:
        cfg.scene = _parse_scene(doc["scene"], "scene")

    if "curve" in doc:
        cdoc = doc["curve"]
        cfg.theta = _number(_require(cdoc, "theta", "curve"), "curve.theta")
        types = _require(cdoc, "types", "curve")
        shares, beta0, mu, nu = [], [], [], []
        for i, entry in enumerate(types):
            path = f"curve.types[{i}]"
            shares.append(_number(_require(entry, "share", path), f"{path}.share"))
            beta0.append(_number(_require(entry, "beta0", path), f"{path}.beta0"))
            mu.append(_number(entry.get("mu", 0.0), f"{path}.mu"))
            nu.append(_number(_require(entry, "nu", path), f"{path}.nu"))
        drift_norm = cdoc.get("drift_norm")
        if drift_norm is None and cfg.drift is not None:
            drift_norm = cfg.drift.norm
        try:
            cfg.curve = ConversionCurveParams(
                shares=np.array(shares), beta0=np.array(beta0),
                mu=np.array(mu), nu=np.array(nu),
                drift_norm=None if drift_norm is None else float(drift_norm),
            )
        except ValueError as exc:
            raise _ctx("curve", exc)

    if "style_update" in doc:
        sdoc = doc["style_update"]
        edoc = sdoc.get("efficiency", {"kind": "linear", "slope": 1.0})
        kind = edoc.get("kind", "linear")
        try:
            cfg.policy = StyleUpdatePolicy(
                budget=_number(_require(sdoc, "budget", "style_update"), "style_update.budget"),
                kind=kind,
                slope=_number(edoc.get("slope", 1.0), "style_update.efficiency.slope"),
                cap=_number(edoc.get("cap", 1.0), "style_update.efficiency.cap"),
                rate_const=_number(edoc.get("rate", 1.0), "style_update.efficiency.rate"),
            )
        except ValueError as exc:
            raise _ctx("style_update", exc)

    if "run" in doc:
        rdoc = doc["run"]
        cfg.mc_samples = int(rdoc.get("mc_samples", cfg.mc_samples))
        if "theta_bounds" in rdoc:
            lo, hi = rdoc["theta_bounds"]
            cfg.theta_bounds = (float(lo), float(hi))
        cfg.equilibrium_tol = float(rdoc.get("equilibrium_tol", cfg.equilibrium_tol))
        cfg.damping = float(rdoc.get("damping", cfg.damping))

    return cfg


def load_scene(path: str) -> SpatialScene:
    """Load a scene document: either a bare scene or a config with a scene section."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file")
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    if "scene" in doc:
        return _parse_scene(doc["scene"], "scene")
    return _parse_scene(doc, "scene")
