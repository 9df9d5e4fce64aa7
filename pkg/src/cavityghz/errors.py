"""Exception types shared across the package."""


class CavityGhzError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(CavityGhzError):
    """One or more parameter invariants are violated.

    Carries the full list of violations so a caller can report every
    problem at once instead of failing on the first one.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ConfigurationError(CavityGhzError):
    """A lookup or setting refers to something that does not exist."""


class TruncationError(CavityGhzError):
    """A generator tried to create more photons than the Fock cutoff allows."""


class DimensionError(CavityGhzError):
    """Operands live on incompatible spaces."""


class IntegrationError(CavityGhzError):
    """The fixed-step solver needs more steps to stay within tolerance."""


class ScheduleError(CavityGhzError):
    """A pulse schedule violates the assumptions of its construction."""


class UndefinedAngleError(ScheduleError):
    """Mixing angle requested at a point where both Rabi frequencies vanish."""


class MethodMismatchError(CavityGhzError):
    """Fidelity requested against the target state of the other method.

    The two schedules end on different superpositions (they differ by the
    relative phase of the final component), so matching method and target
    is enforced rather than silently producing a misleading number.
    """
