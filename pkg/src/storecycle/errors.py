"""Exception types shared across the toolkit."""


class StoreCycleError(Exception):
    """Base class for all toolkit errors."""


class DomainError(StoreCycleError):
    """An input left the mathematical domain of an operation."""


class QuadratureError(StoreCycleError):
    """A numerical integral failed to converge to its target tolerance."""


class NonConvergence(StoreCycleError):
    """An iterative solver hit its iteration cap without converging."""


class DominanceViolation(StoreCycleError):
    """Multiple global optima survived the full probability-ordering chain.

    Signals inputs outside the dominant-consumer regime, not a solver bug.
    """


class NeverOpens(StoreCycleError):
    """Cash-flow density is below the shutdown threshold already at opening."""


class FixedPointDivergence(StoreCycleError):
    """The equilibrium level iteration failed to reach its residual target."""


class InsufficientData(StoreCycleError):
    """Too few observations to ingest a cash-flow series."""


class UnfillableGap(StoreCycleError):
    """A missing day has no same-weekday neighbor within the fallback window."""


class OptimizerDivergence(StoreCycleError):
    """Every least-squares start failed to produce a finite optimum."""


class RankDeficient(StoreCycleError):
    """The Jacobian does not have full column rank."""


class NoPeak(StoreCycleError):
    """The cash-flow curve never attains an interior maximum."""


class ConfigError(StoreCycleError):
    """A scenario document failed validation; message names the field."""
