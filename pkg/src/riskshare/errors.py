"""Exception hierarchy shared by all riskshare modules."""


class RiskShareError(Exception):
    """Base class for all package errors."""


class ArbitrageDetected(RiskShareError):
    """No strictly positive martingale measure exists for the market."""


class CompleteMarket(RiskShareError):
    """The martingale-measure set is a singleton; every claim is replicable."""


class DomainError(RiskShareError):
    """Argument outside the domain of a utility or curve operation."""


class NonPositiveMarginal(RiskShareError):
    """Marginal-utility inversion requested at a non-positive level."""


class InfeasibleWealth(RiskShareError):
    """Initial wealth too small to keep terminal wealth in the utility domain."""


class OutOfRange(RiskShareError):
    """Target value outside the range of the (strictly monotone) function."""


class NonConvergence(RiskShareError):
    """Iterative solver exhausted its iteration budget."""


class NoOverlap(RiskShareError):
    """Seller and buyer price ranges do not intersect; no transaction price exists."""


class WrongUtilityKind(RiskShareError):
    """Operation requires a specific utility family."""


class NonMonotonePsi(RiskShareError):
    """Supplied loss transform is not strictly increasing/convex on the probed grid."""


class LogDomain(RiskShareError):
    """Logarithm argument non-positive (risk level below the admissible set)."""


class StepUnderflow(RiskShareError):
    """Simulation time step collapsed to zero."""


class GridTooCoarse(RiskShareError):
    """Lattice/PDE grid too coarse for a valid discretization."""


class EmptyFeasibleGrid(RiskShareError):
    """Brute-force grid contains no feasible point."""


class ConfigError(RiskShareError):
    """Invalid run configuration."""
