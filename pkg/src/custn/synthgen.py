"""Seeded synthetic populations with heterogeneous scroll depth.

All randomness comes from numpy's PCG64 bit generator (``numpy.random.PCG64``)
seeded with the population's 64-bit seed, consumed in a fixed order, so identical
specs produce byte-identical files on any platform.

Each customer gets an integer base depth.  Session max depths are
``round(base + e)`` clamped to ``[1, max_depth]`` where ``e`` is zero-mean
normal noise with stddev ``within_customer_noise * (base + noise_offset)``.
With ``noise_offset = 0`` the spread is proportional to depth.
"""

from __future__ import annotations

import csv
import json
import math
import zlib
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidLength, InvalidSpec
from .events import RankedList, RelevanceSet
from .ingest import MS_PER_DAY

RNG_ALGORITHM = "numpy.random.PCG64"
SLOT_MS = 2 * 3_600_000
STEP_MS = 1000
DEFAULT_CUTOFF_TS = 1_700_000_000_000

IMPRESSIONS_FILE = "impressions.csv"
INTERACTIONS_FILE = "interactions.csv"
SEGMENTS_FILE = "segments.csv"
POPULATION_FILE = "population.json"


@dataclass(frozen=True)
class PopulationSpec:
    customer_count: int = 1000
    sessions_per_customer: tuple[int, int] = (3, 12)
    depth_model: str = "lognormal"
    min_depth: int = 1
    max_depth: int = 100
    depth_log_mu: float = 2.5
    depth_log_sigma: float = 0.7
    within_customer_noise: float = 0.3
    noise_offset: float = 0.0
    catalog_size: int = 5000
    relevant_per_customer: tuple[int, int] = (1, 5)
    click_fraction: float = 0.05
    seed: int = 0
    cutoff_ts: int = DEFAULT_CUTOFF_TS
    history_days: int = 90
    emit_session_ids: bool = True
    segment_count: int = 3

    def __post_init__(self):
        for name in ("sessions_per_customer", "relevant_per_customer"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        def bad(msg):
            raise InvalidSpec(msg)

        if self.customer_count < 1:
            bad("customer_count must be >= 1")
        for name in ("sessions_per_customer", "relevant_per_customer"):
            rng = getattr(self, name)
            if len(rng) != 2 or rng[0] < 1 or rng[0] > rng[1]:
                bad(f"{name} must be a non-empty range [lo, hi] with lo >= 1")
        if self.depth_model not in ("uniform", "lognormal"):
            bad(f"unknown depth_model {self.depth_model!r}")
        if not 1 <= self.min_depth <= self.max_depth:
            bad("need 1 <= min_depth <= max_depth")
        if self.max_depth * STEP_MS > SLOT_MS // 4:
            bad(f"max_depth above {SLOT_MS // 4 // STEP_MS} would overlap sessions")
        if self.within_customer_noise < 0 or self.noise_offset < 0:
            bad("noise parameters must be non-negative")
        if self.catalog_size < 1:
            bad("catalog_size must be >= 1")
        if self.relevant_per_customer[1] > self.catalog_size:
            bad("relevant_per_customer exceeds catalog_size")
        if not 0 <= self.click_fraction <= 1:
            bad("click_fraction must be in [0, 1]")
        if not 0 <= self.seed < 2**64:
            bad("seed must be a 64-bit unsigned integer")
        if self.history_days < 1:
            bad("history_days must be >= 1")
        if self.sessions_per_customer[1] > self.history_days * MS_PER_DAY // SLOT_MS:
            bad("too many sessions for the history span")
        if self.cutoff_ts < self.history_days * MS_PER_DAY:
            bad("cutoff_ts too early for history_days")
        if self.segment_count < 1:
            bad("segment_count must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sessions_per_customer"] = list(self.sessions_per_customer)
        d["relevant_per_customer"] = list(self.relevant_per_customer)
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> "PopulationSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidSpec(f"unknown spec fields {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from None


@dataclass
class GeneratedPopulation:
    out_dir: Path
    spec: PopulationSpec
    base_depths: dict[str, int]
    relevance: dict[str, RelevanceSet]
    segments: dict[str, str]
    catalog: list[str]
    impression_count: int

    @property
    def impressions_path(self) -> Path:
        return self.out_dir / IMPRESSIONS_FILE

    @property
    def interactions_path(self) -> Path:
        return self.out_dir / INTERACTIONS_FILE

    @property
    def segments_path(self) -> Path:
        return self.out_dir / SEGMENTS_FILE


def _ids(prefix: str, count: int) -> list[str]:
    width = len(str(count - 1))
    return [f"{prefix}{k:0{width}d}" for k in range(count)]


def catalog_for(spec: PopulationSpec) -> list[str]:
    return _ids("i", spec.catalog_size)


def _base_depth(rng: np.random.Generator, spec: PopulationSpec) -> int:
    if spec.depth_model == "uniform":
        d = int(rng.integers(spec.min_depth, spec.max_depth + 1))
    else:
        d = int(round(math.exp(rng.normal(spec.depth_log_mu, spec.depth_log_sigma))))
    return min(max(d, spec.min_depth), spec.max_depth)


def generate(spec: PopulationSpec, out_dir: str | Path) -> GeneratedPopulation:
    """Write impressions.csv, interactions.csv, segments.csv and population.json.

    History sessions fall in the ``history_days`` before ``cutoff_ts``; every
    relevant item gets one conversion after the cutoff, and a
    ``click_fraction`` share of impressions get a click during history.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(spec.seed))

    customers = _ids("c", spec.customer_count)
    catalog = catalog_for(spec)
    history_start = spec.cutoff_ts - spec.history_days * MS_PER_DAY
    slot_count = spec.history_days * MS_PER_DAY // SLOT_MS
    depth_span = spec.max_depth - spec.min_depth + 1

    base_depths: dict[str, int] = {}
    relevance: dict[str, RelevanceSet] = {}
    segments: dict[str, str] = {}
    impressions: list[tuple] = []
    interactions: list[tuple] = []

    for cid in customers:
        base = _base_depth(rng, spec)
        base_depths[cid] = base
        band = min(spec.segment_count - 1, (base - spec.min_depth) * spec.segment_count // depth_span)
        segments[cid] = f"depth_band_{band}"

        p = int(rng.integers(spec.sessions_per_customer[0], spec.sessions_per_customer[1] + 1))
        scale = spec.within_customer_noise * (base + spec.noise_offset)
        noise = rng.normal(0.0, scale, p) if scale > 0 else np.zeros(p)
        depths = np.clip(np.rint(base + noise), 1, spec.max_depth).astype(np.int64)
        slots = np.sort(rng.choice(slot_count, size=p, replace=False))
        jitter = rng.integers(0, SLOT_MS // 4, p)

        for j in range(p):
            start = history_start + int(slots[j]) * SLOT_MS + int(jitter[j])
            depth = int(depths[j])
            sid = f"{cid}-s{j + 1}" if spec.emit_session_ids else ""
            items = rng.integers(0, spec.catalog_size, depth)
            clicks = rng.random(depth) < spec.click_fraction
            for r in range(depth):
                ts = start + r * STEP_MS
                item = catalog[items[r]]
                impressions.append((cid, sid, ts, item, r + 1))
                if clicks[r]:
                    interactions.append((cid, ts + STEP_MS // 2, item, "click"))

        r_count = int(rng.integers(spec.relevant_per_customer[0], spec.relevant_per_customer[1] + 1))
        rel_idx = np.sort(rng.choice(spec.catalog_size, size=r_count, replace=False))
        conv_ts = np.sort(rng.integers(0, 7 * MS_PER_DAY, r_count))
        rel_items = [catalog[k] for k in rel_idx]
        for item, offset in zip(rel_items, conv_ts):
            interactions.append((cid, spec.cutoff_ts + int(offset), item, "conversion"))
        relevance[cid] = RelevanceSet(cid, frozenset(rel_items))

    _write_csv(out_dir / IMPRESSIONS_FILE, ("customer_id", "session_id", "timestamp", "item_id", "rank"), impressions)
    _write_csv(out_dir / INTERACTIONS_FILE, ("customer_id", "timestamp", "item_id", "kind"), interactions)
    _write_csv(out_dir / SEGMENTS_FILE, ("customer_id", "segment"), sorted(segments.items()))
    meta = {
        "spec": spec.to_dict(),
        "rng": RNG_ALGORITHM,
        "synthetic": True,
        "customers": len(customers),
        "impressions": len(impressions),
        "interactions": len(interactions),
    }
    (out_dir / POPULATION_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return GeneratedPopulation(out_dir, spec, base_depths, relevance, segments, catalog, len(impressions))


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _customer_rng(seed: int, customer_id: str) -> np.random.Generator:
    ss = np.random.SeedSequence([seed, zlib.crc32(customer_id.encode("utf-8"))])
    return np.random.Generator(np.random.PCG64(ss))


def popularity_order(catalog: Sequence[str], counts: Mapping[str, int]) -> list[str]:
    """Catalog sorted by interaction count, descending, ties by item id."""
    return sorted(catalog, key=lambda it: (-counts.get(it, 0), it))


def recommend(
    strategy: str,
    customer_id: str,
    catalog: Sequence[str],
    relevance: RelevanceSet | None,
    length: int,
    seed: int = 0,
    popularity: Mapping[str, int] | Sequence[str] | None = None,
) -> RankedList:
    """Reference recommenders: ``oracle``, ``random`` and ``popularity``.

    ``oracle`` puts the relevant items first (sorted by id) and fills the
    rest at random.  ``popularity`` accepts either interaction counts or a
    precomputed :func:`popularity_order`.
    """
    if not 1 <= length <= len(catalog):
        raise InvalidLength(f"length must be in [1, {len(catalog)}], got {length}")

    if strategy == "popularity":
        if popularity is None:
            raise ValueError("popularity strategy needs interaction counts")
        order = popularity if isinstance(popularity, Sequence) else popularity_order(catalog, popularity)
        return RankedList(customer_id, tuple(order[:length]))

    rng = _customer_rng(seed, customer_id)
    if strategy == "random":
        idx = rng.choice(len(catalog), size=length, replace=False)
        return RankedList(customer_id, tuple(catalog[k] for k in idx))

    if strategy == "oracle":
        rel = sorted(relevance.relevant_items) if relevance is not None else []
        head = rel[:length]
        need = length - len(head)
        taken = set(head)
        fill: list[str] = []
        if need:
            idx = rng.choice(len(catalog), size=min(len(catalog), need + len(rel)), replace=False)
            for k in idx:
                item = catalog[k]
                if item not in taken and item not in (relevance.relevant_items if relevance else ()):
                    fill.append(item)
                    if len(fill) == need:
                        break
        return RankedList(customer_id, tuple(head + fill))

    raise ValueError(f"unknown strategy {strategy!r}")


def recommend_all(
    strategy: str,
    customers: Iterable[str],
    catalog: Sequence[str],
    relevance: Mapping[str, RelevanceSet],
    length: int,
    seed: int = 0,
    popularity: Mapping[str, int] | None = None,
) -> dict[str, RankedList]:
    order = popularity_order(catalog, popularity or {}) if strategy == "popularity" else None
    return {
        c: recommend(strategy, c, catalog, relevance.get(c), length, seed, order)
        for c in sorted(customers)
    }


def write_ranked_lists(lists: Mapping[str, RankedList], path: str | Path) -> None:
    rows = ((c, pos, item) for c in sorted(lists) for pos, item in enumerate(lists[c].items, start=1))
    _write_csv(Path(path), ("customer_id", "rank", "item_id"), rows)
