"""Exception hierarchy shared by all modules."""


class AnharmonicError(Exception):
    """Base class for library errors."""


class Inadmissible(AnharmonicError, ValueError):
    """Input lies outside the admissible domain (energy/momentum or action cone)."""


class CircularBoundary(Inadmissible):
    """Turning points coincide: the orbit is circular."""


class QuadratureFailure(AnharmonicError):
    pass


class NoConvergence(AnharmonicError):
    pass


class FitFailure(AnharmonicError):
    pass


class DegenerateMap(AnharmonicError):
    """No derivative order up to the requested maximum bounds the frequency map away from zero."""


class DegenerateFit(AnharmonicError):
    pass


class FlowDivergence(AnharmonicError):
    pass


class NonPeriodicity(AnharmonicError):
    pass


class GridTooCoarse(AnharmonicError):
    pass


class BoundaryLeak(AnharmonicError):
    pass


class ConvergenceFailure(AnharmonicError):
    pass


class WindowTooSmall(AnharmonicError):
    pass


class MatchingAmbiguity(AnharmonicError):
    pass


class HighDispersion(AnharmonicError):
    pass


class ConfigError(AnharmonicError, ValueError):
    pass
