"""CustomerN variability analyses on a normalized cutoff axis.

Every analysis divides CustomerN by the population maximum, so the x axis
lives in (0, 1].  Buckets are equal-width and closed on the right:
bucket ``b`` of ``B`` holds ``b/B < x <= (b+1)/B``.  Bucket membership is
computed with integer arithmetic on the raw cutoffs, so it never depends on
float rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .errors import EmptyPopulation
from .events import CustomerProfile

DEFAULT_BUCKETS = 20


@dataclass(frozen=True)
class Histogram:
    bucket_edges: tuple[float, ...]
    counts: tuple[int, ...]
    max_customer_n: int
    population: int


@dataclass(frozen=True)
class Bucket:
    lo: float
    hi: float
    count: int
    q1: float | None = None
    median: float | None = None
    q3: float | None = None
    # parallel quartiles of an auxiliary quantity (raw variance for dispersion)
    aux: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class BucketedSeries:
    bucket_edges: tuple[float, ...]
    buckets: tuple[Bucket, ...]
    max_customer_n: int
    population: int
    y_label: str
    aux_label: str | None = None
    meta: dict = field(default_factory=dict)

    def nonempty(self) -> list[Bucket]:
        return [b for b in self.buckets if b.count]


def nearest_rank(sorted_values: Sequence[float], pct: int) -> float:
    """Nearest-rank percentile: the ``ceil(pct/100 * n)``-th smallest value."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("percentile of an empty list")
    rank = max(1, -(-pct * n // 100))
    return sorted_values[rank - 1]


def quartiles(values: Sequence[float]) -> tuple[float, float, float]:
    v = sorted(values)
    return nearest_rank(v, 25), nearest_rank(v, 50), nearest_rank(v, 75)


def _edges(bucket_count: int) -> tuple[float, ...]:
    if bucket_count < 1:
        raise ValueError("bucket_count must be >= 1")
    return tuple(b / bucket_count for b in range(bucket_count + 1))


def bucket_index(customer_n: int, max_n: int, bucket_count: int) -> int:
    return max(0, -(-customer_n * bucket_count // max_n) - 1)


def _population(profiles: Mapping[str, CustomerProfile], include_fallback: bool) -> list[CustomerProfile]:
    pop = [p for _, p in sorted(profiles.items()) if include_fallback or not p.fallback_used]
    if not pop:
        raise EmptyPopulation("no profiles to analyze")
    return pop


def normalize_customer_n(profiles: Mapping[str, CustomerProfile]) -> dict[str, float]:
    """CustomerN divided by the population maximum; the maximum maps to 1.0."""
    if not profiles:
        raise EmptyPopulation("no profiles to normalize")
    max_n = max(p.customer_n for p in profiles.values())
    return {c: p.customer_n / max_n for c, p in sorted(profiles.items())}


def n_distribution(
    profiles: Mapping[str, CustomerProfile],
    bucket_count: int = DEFAULT_BUCKETS,
    *,
    include_fallback: bool = False,
) -> Histogram:
    pop = _population(profiles, include_fallback)
    max_n = max(p.customer_n for p in pop)
    counts = [0] * bucket_count
    for p in pop:
        counts[bucket_index(p.customer_n, max_n, bucket_count)] += 1
    return Histogram(_edges(bucket_count), tuple(counts), max_n, len(pop))


def _bucketed(
    pop: list[CustomerProfile],
    max_n: int,
    bucket_count: int,
    y: Callable[[CustomerProfile], float],
    aux: Callable[[CustomerProfile], float] | None,
) -> list[Bucket]:
    edges = _edges(bucket_count)
    ys: list[list[float]] = [[] for _ in range(bucket_count)]
    auxs: list[list[float]] = [[] for _ in range(bucket_count)]
    for p in pop:
        b = bucket_index(p.customer_n, max_n, bucket_count)
        ys[b].append(y(p))
        if aux is not None:
            auxs[b].append(aux(p))
    out = []
    for b in range(bucket_count):
        if not ys[b]:
            out.append(Bucket(edges[b], edges[b + 1], 0))
            continue
        q1, med, q3 = quartiles(ys[b])
        out.append(Bucket(edges[b], edges[b + 1], len(ys[b]), q1, med, q3,
                          quartiles(auxs[b]) if aux is not None else None))
    return out


def dispersion_vs_median(
    profiles: Mapping[str, CustomerProfile],
    bucket_count: int = DEFAULT_BUCKETS,
    *,
    include_fallback: bool = False,
) -> BucketedSeries:
    """Within-customer stddev of session max ranks against normalized CustomerN.

    The y value is the population stddev divided by the same maximum
    CustomerN as the x axis; raw variance is carried alongside as ``aux``.
    Only customers with two or more sessions are analyzed, but the
    normalization constant is taken over the whole analyzed population
    (before the session-count filter) so all analyses share one x axis.
    """
    base = _population(profiles, include_fallback)
    max_n = max(p.customer_n for p in base)
    pop = [p for p in base if p.session_count >= 2]
    if not pop:
        raise EmptyPopulation("no customers with two or more sessions")
    buckets = _bucketed(pop, max_n, bucket_count, lambda p: p.rank_stddev / max_n, lambda p: p.rank_variance)
    return BucketedSeries(
        _edges(bucket_count), tuple(buckets), max_n, len(pop),
        y_label="rank_stddev / max_customer_n", aux_label="rank_variance",
        meta={"excluded_single_session": len(base) - len(pop)},
    )


def cv_vs_median(
    profiles: Mapping[str, CustomerProfile],
    bucket_count: int = DEFAULT_BUCKETS,
    *,
    include_fallback: bool = False,
) -> BucketedSeries:
    """Coefficient of variation (unnormalized) against normalized CustomerN."""
    base = _population(profiles, include_fallback)
    max_n = max(p.customer_n for p in base)
    pop = [p for p in base if p.session_count >= 2 and p.rank_mean > 0]
    if not pop:
        raise EmptyPopulation("no customers with two or more sessions")
    buckets = _bucketed(pop, max_n, bucket_count, lambda p: p.rank_cv, None)
    return BucketedSeries(
        _edges(bucket_count), tuple(buckets), max_n, len(pop), y_label="rank_cv",
        meta={"excluded_single_session": len(base) - len(pop)},
    )
