"""File formats for profiles, aggregate reports and cohort tables.

Every writer goes through :func:`atomic_write`, which writes a temporary file
next to the target and renames it into place.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .cohort import BucketedSeries, Histogram
from .errors import FormatMismatch
from .events import CustomerProfile
from .metrics import AggregateReport

PROFILE_COLUMNS = (
    "customer_id", "customer_n", "session_count", "rank_mean", "rank_stddev",
    "rank_cv", "fallback_used", "session_max_ranks",
)


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def _profile_row(p: CustomerProfile) -> tuple:
    return (
        p.customer_id, p.customer_n, p.session_count, _fmt(p.rank_mean), _fmt(p.rank_stddev),
        _fmt(p.rank_cv), "true" if p.fallback_used else "false",
        " ".join(str(r) for r in p.session_max_ranks),
    )


def _profile_dict(p: CustomerProfile) -> dict:
    return {
        "customer_id": p.customer_id,
        "customer_n": p.customer_n,
        "session_count": p.session_count,
        "rank_mean": p.rank_mean,
        "rank_stddev": p.rank_stddev,
        "rank_cv": p.rank_cv,
        "fallback_used": p.fallback_used,
        "session_max_ranks": list(p.session_max_ranks),
    }


def write_profiles(profiles: Mapping[str, CustomerProfile], path: str | Path, fmt: str = "csv") -> None:
    ordered = [profiles[c] for c in sorted(profiles)]
    if fmt == "json":
        atomic_write(path, json_text([_profile_dict(p) for p in ordered]))
    else:
        atomic_write(path, csv_text(PROFILE_COLUMNS, (_profile_row(p) for p in ordered)))


def _profile_from_record(rec: Mapping, where: str) -> CustomerProfile:
    try:
        ranks = rec.get("session_max_ranks", "")
        if isinstance(ranks, str):
            ranks = [int(x) for x in ranks.split()]
        fallback = rec["fallback_used"]
        if isinstance(fallback, str):
            fallback = fallback.strip().lower() in ("true", "1", "yes")
        return CustomerProfile(
            customer_id=str(rec["customer_id"]),
            customer_n=int(rec["customer_n"]),
            session_count=int(rec["session_count"]),
            session_max_ranks=tuple(int(r) for r in ranks),
            rank_mean=float(rec["rank_mean"]),
            rank_stddev=float(rec["rank_stddev"]),
            rank_cv=float(rec["rank_cv"]),
            fallback_used=bool(fallback),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatMismatch(f"{where}: bad profile record ({exc})") from None


def read_profiles(path: str | Path) -> dict[str, CustomerProfile]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        try:
            records = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatMismatch(f"{path}: invalid JSON ({exc.msg})") from None
        pairs = [(f"{path}[{i}]", r) for i, r in enumerate(records)]
    else:
        reader = csv.DictReader(io.StringIO(text))
        pairs = [(f"{path}:{i + 2}", r) for i, r in enumerate(reader)]
    profiles = {}
    for where, rec in pairs:
        p = _profile_from_record(rec, where)
        profiles[p.customer_id] = p
    return profiles


def write_segment_n(segment_n: Mapping[str, int], path: str | Path, fmt: str = "csv") -> None:
    if fmt == "json":
        atomic_write(path, json_text(dict(sorted(segment_n.items()))))
    else:
        atomic_write(path, csv_text(("segment", "segment_n"), sorted(segment_n.items())))


def read_segment_n(path: str | Path) -> dict[str, int]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        return {str(k): int(v) for k, v in json.loads(text).items()}
    return {r["segment"]: int(r["segment_n"]) for r in csv.DictReader(io.StringIO(text))}


REPORT_COLUMNS = ("customer_id", "metric", "mode", "cutoff_used", "value", "relevant_count")


def write_report(report: AggregateReport, json_path: str | Path, csv_path: str | Path) -> None:
    atomic_write(json_path, json_text(report.to_dict()))
    rows = (
        (r.customer_id, r.metric.value, report.mode.value, r.cutoff_used, _fmt(r.value), r.relevant_count)
        for r in report.per_customer
    )
    atomic_write(csv_path, csv_text(REPORT_COLUMNS, rows))


def read_report(path: str | Path) -> AggregateReport:
    try:
        return AggregateReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatMismatch(f"{path}: not an aggregate report ({exc})") from None


def histogram_csv(hist: Histogram) -> str:
    edges = hist.bucket_edges
    rows = ((_fmt(edges[b]), _fmt(edges[b + 1]), c) for b, c in enumerate(hist.counts))
    return csv_text(("bucket_lo", "bucket_hi", "count"), rows)


def series_csv(series: BucketedSeries) -> str:
    header = ["bucket_lo", "bucket_hi", "count", "q1", "median", "q3"]
    if series.aux_label:
        header += [f"{series.aux_label}_q1", f"{series.aux_label}_median", f"{series.aux_label}_q3"]
    rows = []
    for b in series.buckets:
        row = [_fmt(b.lo), _fmt(b.hi), b.count, _fmt(b.q1), _fmt(b.median), _fmt(b.q3)]
        if series.aux_label:
            row += [_fmt(v) for v in (b.aux or (None, None, None))]
        rows.append(row)
    return csv_text(header, rows)
