class AggminError(Exception):
    """Base class for every error raised by aggmin."""


class ConfigError(AggminError):
    """Experiment configuration is missing, malformed or inconsistent."""


class NumericalError(AggminError):
    """A numerical procedure could not produce a trustworthy result."""


class SupportOverflow(NumericalError):
    """Rescaling pushed more than the tolerated mass past the outer radius."""

    def __init__(self, lam: float, lost: float, mass: float):
        self.lam = lam
        self.lost = lost
        self.mass = mass
        super().__init__(f'rescale by lambda={lam:g} loses mass {lost:.3e} of {mass:.3e} past the grid')


class CFLViolation(NumericalError):
    """An explicit step was rejected; the caller should retry with a smaller step."""


class CFLCollapse(NumericalError):
    """The time step was halved below its floor without an admissible step."""


class LineSearchStall(NumericalError):
    """Backtracking exhausted its halvings without decreasing the energy."""


class NonFiniteError(NumericalError):
    """An energy or profile value became NaN or infinite."""
