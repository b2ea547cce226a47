"""Top-N accuracy metrics at static, per-customer and per-segment cutoffs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Collection, Mapping, Sequence

from .customer_n import UNSEGMENTED
from .errors import EmptyPopulation, EmptyRelevanceSet, MissingProfile, NonPositiveCutoff
from .events import CustomerProfile, RankedList, RelevanceSet


class MetricKind(str, Enum):
    RECALL = "recall"
    PRECISION = "precision"
    HIT_RATE = "hit_rate"
    NDCG = "ndcg"
    MRR = "mrr"


class EvalMode(str, Enum):
    STATIC_N = "static_n"
    CUSTOMER_N = "customer_n"
    SEGMENT_N = "segment_n"


@dataclass(frozen=True, slots=True)
class PerCustomerResult:
    customer_id: str
    metric: MetricKind
    cutoff_used: int
    value: float
    relevant_count: int


@dataclass(frozen=True)
class AggregateReport:
    metric: MetricKind
    mode: EvalMode
    mean_value: float
    customer_count: int
    per_customer: tuple[PerCustomerResult, ...]
    config: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric.value,
            "mode": self.mode.value,
            "mean_value": self.mean_value,
            "customer_count": self.customer_count,
            "config": self.config,
            "per_customer": [
                {
                    "customer_id": r.customer_id,
                    "cutoff_used": r.cutoff_used,
                    "value": r.value,
                    "relevant_count": r.relevant_count,
                }
                for r in self.per_customer
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "AggregateReport":
        metric = MetricKind(data["metric"])
        rows = tuple(
            PerCustomerResult(r["customer_id"], metric, int(r["cutoff_used"]), float(r["value"]),
                              int(r["relevant_count"]))
            for r in data["per_customer"]
        )
        return cls(metric, EvalMode(data["mode"]), float(data["mean_value"]),
                   int(data["customer_count"]), rows, dict(data.get("config", {})))


def _ideal_dcg(count: int) -> float:
    return sum(1.0 / math.log2(p + 1) for p in range(1, count + 1))


def _score(kind: MetricKind, items: Sequence[str], relevant: Collection[str], n: int) -> float:
    k = min(n, len(items))
    if kind is MetricKind.RECALL:
        return sum(1 for it in items[:k] if it in relevant) / len(relevant)
    if kind is MetricKind.PRECISION:
        return sum(1 for it in items[:k] if it in relevant) / n
    if kind is MetricKind.HIT_RATE:
        return 1.0 if any(it in relevant for it in items[:k]) else 0.0
    if kind is MetricKind.MRR:
        for pos, it in enumerate(items[:k], start=1):
            if it in relevant:
                return 1.0 / pos
        return 0.0
    if kind is MetricKind.NDCG:
        dcg = sum(1.0 / math.log2(pos + 1) for pos, it in enumerate(items[:k], start=1) if it in relevant)
        return dcg / _ideal_dcg(min(n, len(relevant)))
    raise ValueError(f"unknown metric {kind!r}")


def metric_at(kind: MetricKind | str, ranked: RankedList, relevant: RelevanceSet, n: int) -> float:
    """Value of ``kind`` for one ranked list cut at ``n``.

    The effective cutoff is ``min(n, len(ranked.items))``.  Precision still
    divides by ``n``, so a short list is penalized.  NDCG uses binary gains.
    """
    if n < 1:
        raise NonPositiveCutoff(f"cutoff must be >= 1, got {n}")
    if not relevant.relevant_items:
        raise EmptyRelevanceSet(f"customer {relevant.customer_id!r} has no relevant items")
    return _score(MetricKind(kind), ranked.items, relevant.relevant_items, n)


def evaluate(
    kind: MetricKind | str,
    lists: Mapping[str, RankedList],
    relevance: Mapping[str, RelevanceSet],
    *,
    mode: EvalMode | str = EvalMode.CUSTOMER_N,
    profiles: Mapping[str, CustomerProfile] | None = None,
    static_n: int | None = None,
    segment_n: Mapping[str, int] | None = None,
    segment_key: Mapping[str, str] | None = None,
    include_fallback: bool = True,
    empty_relevance_as_zero: bool = False,
) -> AggregateReport:
    """Average a metric over customers, each cut at its own N.

    The evaluated population is every customer with a ranked list and a
    non-empty relevance set, restricted to profiled customers in
    ``customer_n`` mode.  With ``include_fallback=False`` customers whose
    profile used the fallback N are left out, and a missing profile raises
    :class:`MissingProfile`.  ``empty_relevance_as_zero`` scores customers
    with a list but no relevant items as 0 instead of dropping them.
    """
    kind = MetricKind(kind)
    mode = EvalMode(mode)

    if mode is EvalMode.STATIC_N:
        if static_n is None:
            raise ValueError("static_n mode needs static_n")
        if static_n < 1:
            raise NonPositiveCutoff(f"cutoff must be >= 1, got {static_n}")
    elif mode is EvalMode.CUSTOMER_N:
        if profiles is None:
            raise ValueError("customer_n mode needs profiles")
    elif segment_n is None:
        raise ValueError("segment_n mode needs segment_n")

    rows = []
    for customer_id in sorted(lists):
        rel = relevance.get(customer_id)
        has_rel = rel is not None and bool(rel.relevant_items)
        if not has_rel and not empty_relevance_as_zero:
            continue

        if mode is EvalMode.STATIC_N:
            cutoff = static_n
        elif mode is EvalMode.CUSTOMER_N:
            prof = profiles.get(customer_id)
            if prof is None:
                if not include_fallback:
                    raise MissingProfile(customer_id)
                continue
            if prof.fallback_used and not include_fallback:
                continue
            cutoff = prof.customer_n
        else:
            seg = (segment_key or {}).get(customer_id, UNSEGMENTED)
            if seg not in segment_n:
                continue
            cutoff = segment_n[seg]

        if has_rel:
            value = _score(kind, lists[customer_id].items, rel.relevant_items, cutoff)
            count = len(rel.relevant_items)
        else:
            value, count = 0.0, 0
        rows.append(PerCustomerResult(customer_id, kind, cutoff, value, count))

    if not rows:
        raise EmptyPopulation(f"no evaluable customers for {kind.value} in {mode.value} mode")
    mean = math.fsum(r.value for r in rows) / len(rows)
    config = {
        "static_n": static_n,
        "include_fallback": include_fallback,
        "empty_relevance_as_zero": empty_relevance_as_zero,
    }
    return AggregateReport(kind, mode, mean, len(rows), tuple(rows), config)
