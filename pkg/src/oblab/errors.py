"""Shared exception types.

Every error raised by the lab derives from ObLabError so the game harness
can count component failures as attack failures without masking real bugs
(plain TypeError/ValueError still propagate).
"""


class ObLabError(Exception):
    pass


class MalformedProgram(ObLabError):
    """Program failed validation; the message names the violated invariant."""


class WidthMismatch(ObLabError):
    pass


class ParseError(ObLabError):
    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedParameter(ObLabError):
    pass


class SchemaError(ObLabError):
    """Candidate bytes do not parse under the asset's candidate schema."""


class MalformedCandidate(SchemaError):
    pass


class TemplateMismatch(ObLabError):
    """A code-reading attacker did not find the program shape it targets."""


class BudgetExceeded(ObLabError):
    pass


class OverheadExceeded(ObLabError):
    pass


class ClassMismatch(ObLabError):
    pass


class EvasivenessViolated(ObLabError):
    pass


class ResampleLimitExceeded(ObLabError):
    pass


class NotMonotone(ObLabError):
    pass


class UnknownId(ObLabError):
    pass


class FlavourUnsupported(ObLabError):
    pass


class MissingSecret(ObLabError):
    pass


class SecrecyViolation(ObLabError):
    """Public challenge files contained the setter's secret bytes."""


class InsufficientData(ObLabError):
    pass
