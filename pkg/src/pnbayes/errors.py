"""Shared exception types.

Every error raised by the library derives from :class:`PnbayesError` so
callers (and the CLI) can map failures to a small set of outcomes.
"""


class PnbayesError(Exception):
    """Base class for all library errors."""


class TypeMismatch(PnbayesError):
    """Arities of composed objects do not line up."""


class InvalidArity(PnbayesError):
    """An object was built with inconsistent or negative arities."""


class NotEnabled(PnbayesError):
    """A transition was fired from a marking that does not enable it."""


class DegenerateStep(PnbayesError):
    """A step whose weight support contains no transition at all."""


class InconsistentEvidence(PnbayesError):
    """All probability mass was ruled out by the observations."""


class TooLarge(PnbayesError):
    """A resource guard refused an exponentially sized computation."""


class MissingPlace(PnbayesError):
    """A place name is not part of the net under consideration."""


class BadOrder(PnbayesError):
    """An elimination order does not cover the internal wires exactly."""


class ValidationError(PnbayesError):
    """A net, graph or trace failed structural validation."""
