"""Exception types raised across the package."""


class SlmIonError(Exception):
    """Base class for all package errors."""


class DomainError(SlmIonError, ValueError):
    """A parameter lies outside the domain of the operation."""


class ExtentError(SlmIonError, ValueError):
    """The sampling grid does not cover the ion chain plus its margin."""


class UndersamplingError(SlmIonError, ValueError):
    """A feature is narrower than the grid can resolve."""


class GeometryError(SlmIonError, ValueError):
    """Grids, masks or image stacks do not fit together."""


class ResolutionError(SlmIonError, ValueError):
    """A requested grating needs a period shorter than two SLM pixels."""


class ScenarioError(SlmIonError):
    """A scenario file failed to parse or validate.

    ``errors`` lists every violation found, not just the first one.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
