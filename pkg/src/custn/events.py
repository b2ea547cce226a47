"""Core immutable record types and row validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Mapping

from .errors import (
    EmptyKey,
    MalformedValue,
    MissingField,
    NegativeTimestamp,
    NonPositiveRank,
)

IMPRESSION_FIELDS = ("customer_id", "session_id", "timestamp", "item_id", "rank")
INTERACTION_FIELDS = ("customer_id", "timestamp", "item_id", "kind")


class InteractionKind(str, Enum):
    CLICK = "click"
    CONVERSION = "conversion"


@dataclass(frozen=True, slots=True)
class ImpressionEvent:
    customer_id: str
    session_id: str | None
    timestamp: int
    item_id: str
    rank: int


@dataclass(frozen=True, slots=True)
class InteractionEvent:
    customer_id: str
    timestamp: int
    item_id: str
    kind: InteractionKind


@dataclass(frozen=True, slots=True)
class Session:
    customer_id: str
    session_key: str
    start_ts: int
    end_ts: int
    max_rank: int
    impression_count: int = 1


@dataclass(frozen=True, slots=True)
class CustomerProfile:
    customer_id: str
    customer_n: int
    session_count: int
    session_max_ranks: tuple[int, ...]
    rank_mean: float
    rank_stddev: float
    rank_cv: float
    fallback_used: bool

    @property
    def rank_variance(self) -> float:
        return self.rank_stddev * self.rank_stddev


@dataclass(frozen=True, slots=True)
class RankedList:
    customer_id: str
    items: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.items)) != len(self.items):
            raise ValueError(f"ranked list for {self.customer_id!r} has duplicate items")


@dataclass(frozen=True, slots=True)
class RelevanceSet:
    customer_id: str
    relevant_items: frozenset[str] = field(default_factory=frozenset)


def parse_timestamp(value: Any, fieldname: str = "timestamp", row: int | None = None) -> int:
    """Return epoch milliseconds (UTC) for an integer or an RFC 3339 string.

    Naive date strings are taken as UTC.
    """
    if value is None or value == "":
        raise MissingField(fieldname, row)
    if isinstance(value, bool):
        raise MalformedValue(fieldname, row, "boolean timestamp")
    if isinstance(value, int):
        ts = value
    elif isinstance(value, float):
        if not value.is_integer():
            raise MalformedValue(fieldname, row, f"non-integer epoch ms {value!r}")
        ts = int(value)
    else:
        text = str(value).strip()
        try:
            ts = int(text)
        except ValueError:
            if text.endswith(("Z", "z")):
                text = text[:-1] + "+00:00"
            try:
                dt = datetime.fromisoformat(text)
            except ValueError:
                raise MalformedValue(fieldname, row, f"unparseable timestamp {value!r}") from None
            if dt.tzinfo is None:
                dt = dt.replace(tzinfo=timezone.utc)
            delta = dt - datetime(1970, 1, 1, tzinfo=timezone.utc)
            ts = (delta.days * 86_400 + delta.seconds) * 1000 + delta.microseconds // 1000
    if ts < 0:
        raise NegativeTimestamp(fieldname, row, str(ts))
    return ts


def _key(record: Mapping[str, Any], name: str, row: int | None) -> str:
    value = record.get(name)
    if value is None:
        raise MissingField(name, row)
    value = str(value)
    if not value.strip():
        raise EmptyKey(name, row)
    return value


def validate_impression(record: Mapping[str, Any], row: int | None = None) -> ImpressionEvent:
    """Build an :class:`ImpressionEvent` from a raw field map or raise a ValidationError."""
    customer_id = _key(record, "customer_id", row)
    item_id = _key(record, "item_id", row)
    timestamp = parse_timestamp(record.get("timestamp"), "timestamp", row)

    raw_rank = record.get("rank")
    if raw_rank is None or raw_rank == "":
        raise MissingField("rank", row)
    if isinstance(raw_rank, bool):
        raise MalformedValue("rank", row, "boolean rank")
    try:
        rank = int(raw_rank)
    except (TypeError, ValueError):
        raise MalformedValue("rank", row, f"non-integer rank {raw_rank!r}") from None
    if isinstance(raw_rank, float) and not raw_rank.is_integer():
        raise MalformedValue("rank", row, f"non-integer rank {raw_rank!r}")
    if rank < 1:
        raise NonPositiveRank("rank", row, str(rank))

    session_id = record.get("session_id")
    if session_id is not None:
        session_id = str(session_id)
        if not session_id.strip():
            session_id = None
    return ImpressionEvent(customer_id, session_id, timestamp, item_id, rank)


def validate_interaction(record: Mapping[str, Any], row: int | None = None) -> InteractionEvent:
    customer_id = _key(record, "customer_id", row)
    item_id = _key(record, "item_id", row)
    timestamp = parse_timestamp(record.get("timestamp"), "timestamp", row)
    raw_kind = record.get("kind")
    if raw_kind is None or raw_kind == "":
        raise MissingField("kind", row)
    try:
        kind = InteractionKind(str(raw_kind).strip().lower())
    except ValueError:
        raise MalformedValue("kind", row, f"unknown interaction kind {raw_kind!r}") from None
    return InteractionEvent(customer_id, timestamp, item_id, kind)
