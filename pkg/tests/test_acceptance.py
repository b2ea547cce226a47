"""Exit criteria for the package.

Each test records a one-line outcome that is printed in the pytest terminal
summary under "acceptance criteria".
"""

import filecmp
import json
import math
import random
import statistics
import time
from fractions import Fraction
from pathlib import Path

import pytest
from scipy.stats import spearmanr

from custn.cli import main
from custn.cohort import cv_vs_median, dispersion_vs_median
from custn.customer_n import CustomerNConfig, MedianMode, compute_profiles, median_rank
from custn.events import CustomerProfile, ImpressionEvent, RankedList, RelevanceSet
from custn.ingest import TimelineSplit, derive_relevance, read_impressions, read_interactions, sessionize, split_timeline
from custn.metrics import EvalMode, MetricKind, evaluate, metric_at
from custn.synthgen import PopulationSpec, generate, recommend_all

from conftest import ACCEPTANCE
from oracles import naive_metric

DAY = 86_400_000


def record(name, ok, detail):
    ACCEPTANCE[name] = (bool(ok), detail)
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, detail


def random_population(rnd, size):
    catalog = [f"i{k}" for k in range(rnd.randint(5, 200))]
    lists, relevance, profiles = {}, {}, {}
    for k in range(size):
        c = f"c{k:04d}"
        if rnd.random() < 0.95:
            lists[c] = RankedList(c, tuple(rnd.sample(catalog, rnd.randint(1, min(60, len(catalog))))))
        if rnd.random() < 0.9:
            relevance[c] = RelevanceSet(c, frozenset(rnd.sample(catalog, rnd.randint(0, min(10, len(catalog))))))
        n = rnd.randint(1, 80)
        profiles[c] = CustomerProfile(c, n, 3, (n,), float(n), 0.0, 0.0, rnd.random() < 0.1)
    return lists, relevance, profiles


def test_ac1_static_n_equivalence():
    rnd = random.Random(1)
    mismatches = 0
    checked = 0
    for _ in range(100):
        lists, relevance, profiles = random_population(rnd, rnd.randint(1, 1000))
        c = rnd.randint(1, 80)
        forced = {k: CustomerProfile(p.customer_id, c, *[getattr(p, f) for f in p.__slots__[2:]])
                  for k, p in profiles.items()}
        for kind in MetricKind:
            a = evaluate(kind, lists, relevance, mode=EvalMode.CUSTOMER_N, profiles=forced)
            b = evaluate(kind, lists, relevance, mode=EvalMode.STATIC_N, static_n=c)
            checked += 1
            if not (a.mean_value == b.mean_value and a.customer_count == b.customer_count
                    and a.per_customer == b.per_customer):
                mismatches += 1
    record("AC1 static-N equivalence", mismatches == 0,
           f"{checked} (population, metric) pairs over 100 populations, {mismatches} mismatches")


def oracle_median(values, mode):
    v = sorted(values)
    p = len(v)
    if p % 2:
        return v[(p + 1) // 2 - 1]
    lo, hi = v[p // 2 - 1], v[p // 2]
    return {MedianMode.LOWER: lo, MedianMode.UPPER: hi,
            MedianMode.INTERPOLATE_CEIL: math.ceil(Fraction(lo + hi, 2))}[mode]


def test_ac2_median_oracle():
    rnd = random.Random(2)
    bad = 0
    for _ in range(10_000):
        values = [rnd.randint(1, 1000) for _ in range(rnd.randint(1, 99))]
        for mode in MedianMode:
            if median_rank(values, mode) != oracle_median(values, mode):
                bad += 1
    record("AC2 median oracle", bad == 0, f"10000 lists x 3 modes, {bad} disagreements")


def random_triple(rnd):
    catalog = [f"i{k}" for k in range(rnd.randint(1, 80))]
    ranked = RankedList("c", tuple(rnd.sample(catalog, rnd.randint(0, len(catalog)))))
    pool = catalog + [f"x{k}" for k in range(20)]
    relevant = RelevanceSet("c", frozenset(rnd.sample(pool, rnd.randint(1, 15))))
    return ranked, relevant, rnd.randint(1, 100)


def test_ac3_metric_oracle():
    rnd = random.Random(3)
    worst = 0.0
    for _ in range(10_000):
        ranked, relevant, n = random_triple(rnd)
        for kind in MetricKind:
            got = metric_at(kind, ranked, relevant, n)
            want = naive_metric(kind.value, ranked.items, relevant.relevant_items, n)
            worst = max(worst, abs(got - want))
    record("AC3 metric oracle", worst <= 1e-12, f"10000 triples x 5 metrics, max |diff| = {worst:.3g} (tol 1e-12)")


def test_ac4_monotonicity():
    rnd = random.Random(4)
    kinds = (MetricKind.RECALL, MetricKind.HIT_RATE, MetricKind.NDCG, MetricKind.MRR)
    violations = {k: 0 for k in kinds}
    example = {}
    for _ in range(1_000):
        ranked, relevant, _ = random_triple(rnd)
        for kind in kinds:
            prev = None
            for n in range(1, len(ranked.items) + 3):
                value = metric_at(kind, ranked, relevant, n)
                if prev is not None and value < prev:
                    violations[kind] += 1
                    example.setdefault(kind, (ranked.items[:4], len(relevant.relevant_items), n, prev, value))
                    break
                prev = value
    summary = ", ".join(f"{k.value}={v}" for k, v in violations.items())
    detail = f"1000 cases, cases with a decrease: {summary}"
    if example:
        k, (head, rel, n, before, after) = next(iter(example.items()))
        detail += f"; first {k.value} drop at n={n}: {before:.4f} -> {after:.4f} (|relevant|={rel})"
    record("AC4 monotonicity", not any(violations.values()), detail)


def leakage_fixture(rnd, cutoff, with_ids):
    events = []
    for c in range(rnd.randint(1, 15)):
        cid = f"c{c}"
        ts = cutoff - rnd.randint(1, 120) * DAY
        for j in range(rnd.randint(1, 8)):
            sid = f"{cid}-h{j}" if with_ids else None
            for _ in range(rnd.randint(1, 6)):
                events.append(ImpressionEvent(cid, sid, ts, "x", rnd.randint(1, 50)))
                ts += rnd.randint(0, 60_000)
            ts += rnd.randint(31, 3 * 24 * 60) * 60_000
            if ts >= cutoff:
                break
    return events


def post_cutoff_sessions(rnd, events, cutoff, gap):
    extra = []
    customers = sorted({e.customer_id for e in events}) + ["newcomer"]
    last = {}
    for e in events:
        last[e.customer_id] = max(last.get(e.customer_id, 0), e.timestamp)
    with_ids = bool(events) and events[0].session_id is not None
    for cid in customers:
        ts = max(cutoff, last.get(cid, 0) + gap + 1)
        for j in range(rnd.randint(0, 4)):
            sid = f"{cid}-p{j}" if with_ids else None
            for _ in range(rnd.randint(1, 5)):
                extra.append(ImpressionEvent(cid, sid, ts, "y", rnd.randint(1, 500)))
                ts += rnd.randint(0, 60_000)
            ts += gap + rnd.randint(1, DAY)
    return extra


def test_ac5_leakage_guard():
    rnd = random.Random(5)
    cutoff, gap = 400 * DAY, 30 * 60_000
    changed = 0
    for trial in range(100):
        events = leakage_fixture(rnd, cutoff, with_ids=trial % 2 == 0)
        split = TimelineSplit(cutoff, 90)
        config = CustomerNConfig(min_sessions=rnd.randint(1, 3))
        before = compute_profiles(split_timeline(sessionize(events, gap), split)[0], config)
        extra = post_cutoff_sessions(rnd, events, cutoff, gap)
        assert extra
        mixed = events + extra
        rnd.shuffle(mixed)
        history, _ = split_timeline(sessionize(mixed, gap), split)
        assert all(s.start_ts < cutoff for s in history)
        if compute_profiles(history, config) != before:
            changed += 1
    record("AC5 leakage guard", changed == 0, f"100 fixtures with appended post-cutoff sessions, {changed} changed profiles")


def test_ac6_oracle_recommender_bound(tmp_path):
    failures = []
    lines = []
    for seed in (61, 62, 63):
        spec = PopulationSpec(seed=seed, customer_count=400, min_depth=5, max_depth=40, depth_model="uniform",
                              relevant_per_customer=(1, 4), catalog_size=3000)
        pop = generate(spec, tmp_path / str(seed))
        history, start = split_timeline(sessionize(read_impressions(pop.impressions_path, strict=True)),
                                        TimelineSplit(spec.cutoff_ts, spec.history_days))
        profiles = compute_profiles(history, CustomerNConfig(fallback_n=10))
        relevance = derive_relevance(read_interactions(pop.interactions_path, strict=True), start)
        all_cover = all(profiles[c].customer_n >= len(r.relevant_items) for c, r in relevance.items())
        oracle = recommend_all("oracle", profiles, pop.catalog, relevance, 50, seed)
        rand = recommend_all("random", profiles, pop.catalog, relevance, 50, seed)
        ndcg = evaluate("ndcg", oracle, relevance, profiles=profiles).mean_value
        rec_o = evaluate("recall", oracle, relevance, profiles=profiles).mean_value
        rec_r = evaluate("recall", rand, relevance, profiles=profiles).mean_value
        lines.append(f"seed {seed}: ndcg={ndcg!r} recall oracle={rec_o:.4f} random={rec_r:.4f}")
        if not all_cover or ndcg != 1.0 or not rec_o > rec_r:
            failures.append(seed)
    record("AC6 oracle-recommender bound", not failures, "; ".join(lines))


DEPTH_SCALING_SPEC = dict(customer_count=4000, depth_model="uniform", max_depth=60, within_customer_noise=0.15,
                 noise_offset=15, sessions_per_customer=(8, 24), seed=0)


def test_ac7_dispersion_and_cv_shape(tmp_path):
    spec = PopulationSpec(**DEPTH_SCALING_SPEC)
    pop = generate(spec, tmp_path)
    history, _ = split_timeline(sessionize(read_impressions(pop.impressions_path, strict=True)),
                                TimelineSplit(spec.cutoff_ts, spec.history_days))
    profiles = compute_profiles(history)
    disp = dispersion_vs_median(profiles, 20)
    buckets = disp.nonempty()
    rho = spearmanr([(b.lo + b.hi) / 2 for b in buckets], [b.median for b in buckets]).statistic
    cv = cv_vs_median(profiles, 20)
    lower = [b.median for b in cv.buckets[:10] if b.count]
    non_increasing = all(a >= b for a, b in zip(lower, lower[1:]))
    record("AC7 dispersion and CV shape", rho >= 0.8 and non_increasing,
           f"dispersion Spearman rho={rho:.3f} (>= 0.8); lower-half CV medians "
           f"{[round(v, 3) for v in lower]} non-increasing={non_increasing}")


def snapshot(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_ac8_cli_determinism(tmp_path):
    pop, prof, ev = tmp_path / "pop", tmp_path / "prof", tmp_path / "ev"
    cutoff = str(PopulationSpec().cutoff_ts)
    spec_file = tmp_path / "spec.json"
    spec_file.write_text(json.dumps({"customer_count": 300, "max_depth": 40, "seed": 8}))
    commands = {
        "generate": ["generate", "--spec", str(spec_file), "--out-dir", str(pop)],
        "recommend": ["recommend", "--population", str(pop), "--strategy", "random", "--length", "30"],
        "recommend-popularity": ["recommend", "--population", str(pop), "--strategy", "popularity"],
        "validate": ["validate", "--impressions", str(pop / "impressions.csv"),
                     "--interactions", str(pop / "interactions.csv"), "--out-dir", str(tmp_path / "val")],
        "profile": ["profile", "--impressions", str(pop / "impressions.csv"), "--cutoff-ts", cutoff,
                    "--segments", str(pop / "segments.csv"), "--out-dir", str(prof)],
        "profile-json": ["profile", "--impressions", str(pop / "impressions.csv"), "--cutoff-ts", cutoff,
                         "--format", "json", "--out-dir", str(tmp_path / "profjson")],
        "evaluate": ["evaluate", "--profiles", str(prof / "profiles.csv"), "--ranked", str(pop / "ranked_random.csv"),
                     "--interactions", str(pop / "interactions.csv"), "--cutoff-ts", cutoff,
                     "--mode", "customer_n", "--mode", "static_n", "--mode", "segment_n", "--static-n", "10",
                     "--segments", str(pop / "segments.csv"), "--segment-n", str(prof / "segment_n.csv"),
                     "--out-dir", str(ev)],
        "analyze": ["analyze", "--profiles", str(prof / "profiles.csv"), "--out-dir", str(tmp_path / "an")],
        "compare": ["compare", "--report", str(ev / "recall_customer_n.json"),
                    "--report", str(ev / "recall_static_n.json"), "--out-dir", str(tmp_path / "cmp")],
    }
    for argv in commands.values():
        assert main(argv) == 0
    first = snapshot(tmp_path)
    differing = []
    for name, argv in commands.items():
        assert main(argv) == 0
        now = snapshot(tmp_path)
        differing += [f"{name}:{k}" for k in now if first.get(k) != now[k]]
    record("AC8 CLI determinism", not differing and len(first) > 20,
           f"{len(commands)} subcommand runs, {len(first)} output files, {len(differing)} differ after rerun")


def test_ac9_throughput(tmp_path):
    spec = PopulationSpec(customer_count=10_000, depth_model="uniform", max_depth=20,
                          sessions_per_customer=(5, 15), catalog_size=20_000, seed=9)
    pop = generate(spec, tmp_path / "pop")
    assert pop.impression_count >= 1_000_000
    assert main(["recommend", "--population", str(tmp_path / "pop"), "--strategy", "random", "--length", "50"]) == 0
    cutoff = str(spec.cutoff_ts)
    start = time.perf_counter()
    assert main(["profile", "--impressions", str(pop.impressions_path), "--cutoff-ts", cutoff,
                 "--out-dir", str(tmp_path / "p")]) == 0
    assert main(["evaluate", "--profiles", str(tmp_path / "p" / "profiles.csv"),
                 "--ranked", str(tmp_path / "pop" / "ranked_random.csv"),
                 "--interactions", str(pop.interactions_path), "--cutoff-ts", cutoff,
                 "--mode", "customer_n", "--mode", "static_n", "--static-n", "10",
                 "--out-dir", str(tmp_path / "e")]) == 0
    elapsed = time.perf_counter() - start
    record("AC9 throughput", elapsed < 60,
           f"profile+evaluate on {pop.impression_count} impressions / {spec.customer_count} customers "
           f"in {elapsed:.1f}s (< 60s)")
