"""Typed errors raised by the jet calculus and normal-form pipelines.

Domain errors (everything below ``JetError``) signal that an input lies
outside an operation's stated hypotheses; they carry enough context to be
surfaced verbatim in CLI reports.
"""


class JetError(Exception):
    """Base class for all domain errors of this package."""


class SpaceMismatch(JetError):
    """Operands live on different variable spaces or truncation orders."""


class NonOriginPreserving(JetError):
    """A map used for substitution has a nonzero constant term."""


class SingularLinearPart(JetError):
    """A map's Jacobian at the origin is not invertible."""


class DegenerateDirection(JetError):
    """Implicit solving attempted along a direction with vanishing derivative."""


class SingularAtOrigin(JetError):
    """A vector field to be rectified vanishes at the origin."""


class DegenerateForm(JetError):
    """A 2-form fails the rank condition required by the operation."""


class NotClosed(JetError):
    """A form expected to be closed has nonzero exterior derivative."""


class TransversalityFailure(JetError):
    """A transversality hypothesis (bracket or wedge nonvanishing) fails."""


class PivotFailure(JetError):
    """No admissible relabeling restores the pairing conditions."""


class GenericityViolation(JetError):
    """The input lies outside the open set where the normal form is valid."""


class NotGlancing(JetError):
    """The pair does not satisfy the simple-tangency (S1) conditions."""


class ParseError(JetError):
    """A job file or serialized value is malformed."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class CertificationError(JetError):
    """An internal residual that must vanish at certified order did not."""
