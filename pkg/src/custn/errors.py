"""Exception hierarchy.

Row-level validation problems derive from :class:`ValidationError` and carry
the offending field name and the 1-based line number in the source file
(``None`` when the record did not come from a file).
"""

from __future__ import annotations


class CustNError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(CustNError):
    kind = "ValidationError"

    def __init__(self, field: str, row: int | None = None, detail: str = ""):
        self.field = field
        self.row = row
        self.detail = detail
        where = f"row {row}" if row is not None else "record"
        msg = f"{self.kind}: field {field!r} at {where}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class MissingField(ValidationError):
    kind = "MissingField"


class NonPositiveRank(ValidationError):
    kind = "NonPositiveRank"


class NegativeTimestamp(ValidationError):
    kind = "NegativeTimestamp"


class EmptyKey(ValidationError):
    kind = "EmptyKey"


class MalformedValue(ValidationError):
    """A field is present but cannot be parsed (non-integer rank, bad date, unknown kind)."""

    kind = "MalformedValue"


class FormatMismatch(CustNError):
    """The file does not match its declared format (bad header, non-object JSON line)."""


class MixedSessionIdPresence(CustNError):
    def __init__(self, customer_id: str):
        self.customer_id = customer_id
        super().__init__(
            f"customer {customer_id!r} has events both with and without session_id"
        )


class EmptyInput(CustNError, ValueError):
    pass


class EmptyPopulation(CustNError):
    pass


class MissingProfile(CustNError):
    def __init__(self, customer_id: str):
        self.customer_id = customer_id
        super().__init__(f"no CustomerN profile for customer {customer_id!r}")


class NonPositiveCutoff(CustNError, ValueError):
    pass


class EmptyRelevanceSet(CustNError, ValueError):
    pass


class InvalidSpec(CustNError, ValueError):
    pass


class InvalidLength(CustNError, ValueError):
    pass
