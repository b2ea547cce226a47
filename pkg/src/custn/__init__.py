"""Offline evaluation of ranked recommendations at personalized cutoffs.

Each customer's cutoff (CustomerN) is the median of the deepest rank they
reached per session over a trailing history window.
"""

__version__ = "0.1.0"

from .cohort import BucketedSeries, Histogram, cv_vs_median, dispersion_vs_median, n_distribution, normalize_customer_n
from .customer_n import CustomerNConfig, MedianMode, compute_profiles, compute_segment_n, median_rank
from .events import (
    CustomerProfile,
    ImpressionEvent,
    InteractionEvent,
    InteractionKind,
    RankedList,
    RelevanceSet,
    Session,
    validate_impression,
    validate_interaction,
)
from .ingest import (
    TimelineSplit,
    derive_relevance,
    read_impressions,
    read_interactions,
    sessionize,
    split_timeline,
)
from .metrics import AggregateReport, EvalMode, MetricKind, PerCustomerResult, evaluate, metric_at
from .synthgen import PopulationSpec, generate, recommend
