"""Exception hierarchy shared by the planners, abstractions and codecs."""


class BamdpError(Exception):
    """Base class for every domain error raised by this package."""


class ValidationError(BamdpError, ValueError):
    """A model, belief or file violates a structural invariant."""


class ProblemFileError(BamdpError):
    """A problem or cover file could not be parsed."""


class ImpossibleObservation(BamdpError):
    """A transition tuple has zero predictive probability under the belief."""


class SpaceExplosion(BamdpError):
    """Hyperstate enumeration exceeded the configured cap."""


class InconsistentSpace(BamdpError):
    """A successor hyperstate is missing from the space being solved."""


class IncompletePolicy(BamdpError):
    """A policy has no action for a hyperstate it was asked about."""


class ValueLookupError(BamdpError, KeyError):
    """A value table has no entry for the queried hyperstate."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class NotDirac(BamdpError):
    """A belief that was expected to be a point mass is not."""


class InfoHorizonViolated(BamdpError):
    """The supplied information horizon is smaller than the true one."""

    def __init__(self, message, hyperstate=None):
        super().__init__(message)
        self.hyperstate = hyperstate


class InfiniteInformationHorizon(BamdpError):
    """The ground BAMDP does not resolve its uncertainty within the horizon."""


class AbstractHorizonInfinite(BamdpError):
    """The abstract BAMDP does not reach a simplex vertex within the horizon."""


class CoverTooFine(BamdpError):
    """The requested cover needs a lattice finer than the cap allows."""


class EmptyCell(BamdpError):
    """A cover cell has no representative beliefs under the chosen weighting."""
