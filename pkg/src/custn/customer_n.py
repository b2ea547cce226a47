"""Personalized cutoffs: the median of each customer's per-session max rank."""

from __future__ import annotations

import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import EmptyInput
from .events import CustomerProfile, Session

UNSEGMENTED = "__unsegmented__"


class MedianMode(str, Enum):
    LOWER = "lower"
    UPPER = "upper"
    INTERPOLATE_CEIL = "interpolate_ceil"


@dataclass(frozen=True)
class CustomerNConfig:
    min_sessions: int = 3
    fallback_n: int = 10
    median_mode: MedianMode = MedianMode.INTERPOLATE_CEIL
    segment_key: Mapping[str, str] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.min_sessions < 1:
            raise ValueError("min_sessions must be >= 1")
        if self.fallback_n < 1:
            raise ValueError("fallback_n must be >= 1")
        object.__setattr__(self, "median_mode", MedianMode(self.median_mode))


def median_rank(values: Sequence[int], mode: MedianMode | str = MedianMode.INTERPOLATE_CEIL) -> int:
    """Integer median of positive ranks.

    Odd lengths take the middle element.  For even lengths ``lower`` and
    ``upper`` pick one of the two middle elements and ``interpolate_ceil``
    rounds their midpoint up.
    """
    if not values:
        raise EmptyInput("median of an empty list")
    mode = MedianMode(mode)
    v = sorted(values)
    p = len(v)
    if p % 2:
        return v[p // 2]
    lo, hi = v[p // 2 - 1], v[p // 2]
    if mode is MedianMode.LOWER:
        return lo
    if mode is MedianMode.UPPER:
        return hi
    return (lo + hi + 1) // 2


def dispersion(values: Sequence[int]) -> tuple[float, float, float]:
    """Mean, population stddev and coefficient of variation."""
    mean = statistics.fmean(values)
    stddev = statistics.pstdev(values) if len(values) > 1 else 0.0
    cv = stddev / mean if mean > 0 else 0.0
    return mean, stddev, cv


def _ranks_by_customer(history: Iterable[Session]) -> dict[str, list[int]]:
    ordered = sorted(history, key=lambda s: (s.customer_id, s.start_ts, s.session_key))
    ranks: dict[str, list[int]] = defaultdict(list)
    for s in ordered:
        ranks[s.customer_id].append(s.max_rank)
    return ranks


def profile_from_ranks(customer_id: str, ranks: Sequence[int], config: CustomerNConfig) -> CustomerProfile:
    fallback = len(ranks) < config.min_sessions
    n = config.fallback_n if fallback else median_rank(ranks, config.median_mode)
    mean, stddev, cv = dispersion(ranks)
    return CustomerProfile(
        customer_id=customer_id,
        customer_n=n,
        session_count=len(ranks),
        session_max_ranks=tuple(ranks),
        rank_mean=mean,
        rank_stddev=stddev,
        rank_cv=cv,
        fallback_used=fallback,
    )


def compute_profiles(history: Iterable[Session], config: CustomerNConfig | None = None) -> dict[str, CustomerProfile]:
    """One profile per customer with at least one history session.

    Customers below ``config.min_sessions`` get ``fallback_n`` as their
    cutoff and ``fallback_used=True``; dispersion statistics are still
    computed from whatever sessions they have.
    """
    config = config or CustomerNConfig()
    return {
        c: profile_from_ranks(c, ranks, config)
        for c, ranks in sorted(_ranks_by_customer(history).items())
    }


def compute_segment_n(history: Iterable[Session], config: CustomerNConfig) -> dict[str, int]:
    """Median of the pooled session max ranks of every segment.

    Customers missing from ``config.segment_key`` are pooled under
    ``__unsegmented__``.
    """
    segment_key = config.segment_key or {}
    pooled: dict[str, list[int]] = defaultdict(list)
    for s in history:
        pooled[segment_key.get(s.customer_id, UNSEGMENTED)].append(s.max_rank)
    return {seg: median_rank(ranks, config.median_mode) for seg, ranks in sorted(pooled.items())}
