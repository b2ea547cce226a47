"""Log readers, sessionization and the global-timeline split."""

from __future__ import annotations

import csv
import gzip
import io
import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, TypeVar

from .errors import FormatMismatch, MixedSessionIdPresence, ValidationError
from .events import (
    ImpressionEvent,
    InteractionEvent,
    InteractionKind,
    RankedList,
    RelevanceSet,
    Session,
    validate_impression,
    validate_interaction,
)

log = logging.getLogger(__name__)

MS_PER_DAY = 86_400_000
DEFAULT_GAP_MS = 30 * 60 * 1000
DEFAULT_WINDOW_DAYS = 90
DEFAULT_RELEVANT_KINDS = frozenset({InteractionKind.CLICK, InteractionKind.CONVERSION})

T = TypeVar("T")


@dataclass
class IngestReport:
    """Row counts and collected row errors for one file."""

    path: str = ""
    rows: int = 0
    accepted: int = 0
    duplicates_dropped: int = 0
    errors: list[ValidationError] = field(default_factory=list)

    def tally(self) -> dict[str, int]:
        return dict(sorted(Counter(e.kind for e in self.errors).items()))

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "rows": self.rows,
            "accepted": self.accepted,
            "duplicates_dropped": self.duplicates_dropped,
            "errors": len(self.errors),
            "error_kinds": self.tally(),
        }


@dataclass(frozen=True)
class TimelineSplit:
    """A single global cutoff with a trailing history window of ``history_window_days``."""

    cutoff_ts: int
    history_window_days: int = DEFAULT_WINDOW_DAYS

    def __post_init__(self):
        if self.history_window_days < 1:
            raise ValueError("history_window_days must be >= 1")
        if self.cutoff_ts < 0:
            raise ValueError("cutoff_ts must be >= 0")

    @property
    def window_start(self) -> int:
        return self.cutoff_ts - self.history_window_days * MS_PER_DAY


def _open_text(path: Path):
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, encoding="utf-8", newline="")


def infer_format(path: str | Path) -> str:
    suffixes = [s.lower() for s in Path(path).suffixes if s.lower() != ".gz"]
    if suffixes and suffixes[-1] in (".jsonl", ".ndjson"):
        return "jsonl"
    return "csv"


def _iter_rows(path: Path, fmt: str, required: tuple[str, ...]) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, record)``; header is line 1 for CSV."""
    if fmt == "csv":
        with _open_text(path) as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                return
            missing = [c for c in required if c not in reader.fieldnames]
            if missing:
                raise FormatMismatch(f"{path}: CSV header lacks columns {missing}")
            for record in reader:
                yield reader.line_num, record
    elif fmt == "jsonl":
        with _open_text(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FormatMismatch(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
                if not isinstance(record, dict):
                    raise FormatMismatch(f"{path}:{lineno}: expected a JSON object")
                yield lineno, record
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _read(
    path: str | Path,
    fmt: str | None,
    required: tuple[str, ...],
    validate: Callable[[dict, int], T],
    strict: bool,
    dedup: bool,
    report: IngestReport | None,
) -> Iterator[T]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    fmt = fmt or infer_format(path)
    if report is None:
        report = IngestReport()
    report.path = str(path)

    def stream():
        seen = set() if dedup else None
        for lineno, record in _iter_rows(path, fmt, required):
            report.rows += 1
            try:
                event = validate(record, lineno)
            except ValidationError as err:
                if strict:
                    raise
                report.errors.append(err)
                continue
            if seen is not None:
                if event in seen:
                    report.duplicates_dropped += 1
                    continue
                seen.add(event)
            report.accepted += 1
            yield event

    return stream()


def read_impressions(
    path: str | Path,
    format: str | None = None,
    *,
    strict: bool = False,
    dedup: bool = False,
    report: IngestReport | None = None,
) -> Iterator[ImpressionEvent]:
    """Stream validated impressions from a CSV or JSONL file, in file order.

    In lenient mode (the default) malformed rows are skipped and recorded on
    ``report``; with ``strict=True`` the first bad row raises.  ``dedup`` drops
    exact repeats of an already accepted event.
    """
    return _read(path, format, ("customer_id", "timestamp", "item_id", "rank"),
                 validate_impression, strict, dedup, report)


def read_interactions(
    path: str | Path,
    format: str | None = None,
    *,
    strict: bool = False,
    dedup: bool = False,
    report: IngestReport | None = None,
) -> Iterator[InteractionEvent]:
    return _read(path, format, ("customer_id", "timestamp", "item_id", "kind"),
                 validate_interaction, strict, dedup, report)


def read_ranked_lists(path: str | Path) -> dict[str, RankedList]:
    """Read ``customer_id,rank,item_id`` rows into one RankedList per customer."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    rows: dict[str, list[tuple[int, str]]] = defaultdict(list)
    for lineno, record in _iter_rows(path, infer_format(path), ("customer_id", "rank", "item_id")):
        try:
            rank = int(record["rank"])
        except (TypeError, ValueError):
            raise FormatMismatch(f"{path}:{lineno}: bad rank {record.get('rank')!r}") from None
        rows[str(record["customer_id"])].append((rank, str(record["item_id"])))
    out = {}
    for customer_id, pairs in rows.items():
        pairs.sort()
        try:
            out[customer_id] = RankedList(customer_id, tuple(item for _, item in pairs))
        except ValueError as exc:
            raise FormatMismatch(f"{path}: {exc}") from None
    return out


def read_segments(path: str | Path) -> dict[str, str]:
    """Read a ``customer_id,segment`` label map."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    return {
        str(r["customer_id"]): str(r["segment"])
        for _, r in _iter_rows(path, infer_format(path), ("customer_id", "segment"))
    }


def sessionize(events: Iterable[ImpressionEvent], gap_ms: int = DEFAULT_GAP_MS) -> list[Session]:
    """Group impressions into sessions.

    Events carrying a session_id are grouped by ``(customer_id, session_id)``.
    Otherwise each customer's events are ordered by time and a new session
    starts wherever consecutive timestamps differ by more than ``gap_ms``.
    The result is ordered by customer, then start time.
    """
    if gap_ms <= 0:
        raise ValueError("gap_ms must be positive")

    with_id: dict[str, dict[str, list]] = defaultdict(dict)
    without_id: dict[str, list[tuple[int, int]]] = defaultdict(list)
    for ev in events:
        if ev.session_id is None:
            without_id[ev.customer_id].append((ev.timestamp, ev.rank))
        else:
            acc = with_id[ev.customer_id].get(ev.session_id)
            if acc is None:
                with_id[ev.customer_id][ev.session_id] = [ev.timestamp, ev.timestamp, ev.rank, 1]
            else:
                if ev.timestamp < acc[0]:
                    acc[0] = ev.timestamp
                if ev.timestamp > acc[1]:
                    acc[1] = ev.timestamp
                if ev.rank > acc[2]:
                    acc[2] = ev.rank
                acc[3] += 1

    for customer_id in sorted(with_id.keys() & without_id.keys()):
        raise MixedSessionIdPresence(customer_id)

    sessions: list[Session] = []
    for customer_id, groups in with_id.items():
        for sid, (start, end, max_rank, count) in groups.items():
            sessions.append(Session(customer_id, sid, start, end, max_rank, count))

    for customer_id, pairs in without_id.items():
        pairs.sort()
        ordinal = 0
        start = prev = pairs[0][0]
        max_rank = 0
        count = 0
        for ts, rank in pairs:
            if ts - prev > gap_ms:
                ordinal += 1
                sessions.append(Session(customer_id, f"{customer_id}#{ordinal}", start, prev, max_rank, count))
                start, max_rank, count = ts, 0, 0
            if rank > max_rank:
                max_rank = rank
            count += 1
            prev = ts
        ordinal += 1
        sessions.append(Session(customer_id, f"{customer_id}#{ordinal}", start, prev, max_rank, count))

    sessions.sort(key=lambda s: (s.customer_id, s.start_ts, s.session_key))
    return sessions


def split_timeline(sessions: Iterable[Session], split: TimelineSplit) -> tuple[list[Session], int]:
    """Keep the sessions that start inside ``[cutoff - X days, cutoff)``.

    Returns the history sessions and the evaluation start (the cutoff itself).
    """
    lo, hi = split.window_start, split.cutoff_ts
    history = [s for s in sessions if lo <= s.start_ts < hi]
    # leakage guard
    assert all(s.start_ts < hi for s in history)
    return history, hi


def derive_relevance(
    interactions: Iterable[InteractionEvent],
    evaluation_start: int,
    kinds: Iterable[InteractionKind | str] = DEFAULT_RELEVANT_KINDS,
) -> dict[str, RelevanceSet]:
    """Distinct items each customer interacted with (of the given kinds) from ``evaluation_start`` on."""
    wanted = {InteractionKind(k) for k in kinds}
    items: dict[str, set[str]] = defaultdict(set)
    for ev in interactions:
        if ev.timestamp >= evaluation_start and ev.kind in wanted:
            items[ev.customer_id].add(ev.item_id)
    return {c: RelevanceSet(c, frozenset(s)) for c, s in items.items()}
