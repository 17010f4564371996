"""Exception types raised across the package."""


class RtsocError(Exception):
    """Base class for all package errors."""


class DomainError(RtsocError, ValueError):
    """A model function was called outside its mathematical domain."""


class SpecError(RtsocError, ValueError):
    """A unit or SoC description violates its invariants.

    ``problems`` holds every violation found, not just the first one.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class InsufficientDataError(RtsocError, ValueError):
    pass


class GpValidityError(RtsocError, ValueError):
    pass


class ReductionError(RtsocError, ValueError):
    pass


class CertificateError(RtsocError, ValueError):
    pass


class ScenarioError(RtsocError, ValueError):
    """Scenario file could not be parsed or validated."""

    def __init__(self, problems, path=None):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        self.path = path
        prefix = f"{path}: " if path else ""
        super().__init__(prefix + "; ".join(self.problems))
