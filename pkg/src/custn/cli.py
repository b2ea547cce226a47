"""``custn`` command line.

Exit codes: 0 success, 1 validation failure, 2 I/O error, 3 empty
population, 4 bad arguments.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections import Counter
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .cohort import DEFAULT_BUCKETS, cv_vs_median, dispersion_vs_median, n_distribution
from .customer_n import CustomerNConfig, MedianMode, compute_profiles, compute_segment_n
from .errors import (
    CustNError,
    EmptyPopulation,
    FormatMismatch,
    InvalidLength,
    InvalidSpec,
    MissingProfile,
    MixedSessionIdPresence,
    ValidationError,
)
from .events import InteractionKind, parse_timestamp
from .ingest import (
    DEFAULT_WINDOW_DAYS,
    IngestReport,
    TimelineSplit,
    derive_relevance,
    read_impressions,
    read_interactions,
    read_ranked_lists,
    read_segments,
    sessionize,
    split_timeline,
)
from .metrics import EvalMode, MetricKind, evaluate
from .report import (
    atomic_write,
    csv_text,
    histogram_csv,
    json_text,
    read_profiles,
    read_report,
    read_segment_n,
    series_csv,
    write_profiles,
    write_report,
    write_segment_n,
)
from .synthgen import POPULATION_FILE, PopulationSpec, catalog_for, generate, recommend_all, write_ranked_lists

log = logging.getLogger("custn")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_EMPTY, EXIT_ARGS = 0, 1, 2, 3, 4
SEED_ENV = "CUSTN_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


def _timestamp(value: str) -> int:
    try:
        return parse_timestamp(value, "cutoff-ts")
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(value: str) -> int:
    try:
        v = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _meta(args: argparse.Namespace, command: str, **extra) -> dict:
    config = {
        k: (v.value if hasattr(v, "value") else v)
        for k, v in sorted(vars(args).items())
        if k not in ("func", "command")
    }
    meta = {"command": command, "version": __version__, "config": config}
    meta.update(extra)
    if getattr(args, "stamp", False):
        meta["generated_at"] = datetime.now(timezone.utc).isoformat()
    return meta


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_history(args) -> tuple[list, IngestReport]:
    report = IngestReport()
    events = read_impressions(args.impressions, strict=args.strict, dedup=args.dedup, report=report)
    sessions = sessionize(events, gap_ms=args.gap_minutes * 60_000)
    history, _ = split_timeline(sessions, TimelineSplit(args.cutoff_ts, args.window_days))
    if args.strict and report.errors:
        raise report.errors[0]
    return history, report


# -- subcommands ------------------------------------------------------------


def cmd_validate(args) -> int:
    if not args.impressions and not args.interactions:
        raise UsageError("validate needs --impressions and/or --interactions")
    reports = {}
    if args.impressions:
        rep = IngestReport()
        for _ in read_impressions(args.impressions, report=rep):
            pass
        reports["impressions"] = rep
    if args.interactions:
        rep = IngestReport()
        for _ in read_interactions(args.interactions, report=rep):
            pass
        reports["interactions"] = rep

    total = 0
    for name, rep in reports.items():
        total += len(rep.errors)
        print(f"{name}: {rep.rows} rows, {rep.accepted} accepted, {len(rep.errors)} errors")
        for kind, n in rep.tally().items():
            print(f"  {kind}: {n}")
        for err in rep.errors[: args.show_errors]:
            print(f"  {err}")
    print(f"{total} errors")
    if args.out_dir:
        payload = _meta(args, "validate", files={k: r.to_dict() for k, r in reports.items()}, errors=total)
        atomic_write(_out_dir(args) / "validation.json", json_text(payload))
    return EXIT_VALIDATION if args.strict and total else EXIT_OK


def cmd_profile(args) -> int:
    segments = read_segments(args.segments) if args.segments else None
    config = CustomerNConfig(
        min_sessions=args.min_sessions,
        fallback_n=args.fallback_n,
        median_mode=args.median_mode,
        segment_key=segments,
    )
    history, report = _load_history(args)
    profiles = compute_profiles(history, config)
    out = _out_dir(args)
    ext = args.format
    write_profiles(profiles, out / f"profiles.{ext}", ext)
    extra = {
        "ingest": report.to_dict(),
        "history_sessions": len(history),
        "customers": len(profiles),
        "fallback_customers": sum(p.fallback_used for p in profiles.values()),
    }
    if segments is not None:
        seg_n = compute_segment_n(history, config)
        write_segment_n(seg_n, out / f"segment_n.{ext}", ext)
        extra["segments"] = len(seg_n)
    atomic_write(out / "profile.meta.json", json_text(_meta(args, "profile", **extra)))
    print(f"{len(profiles)} profiles from {len(history)} history sessions "
          f"({extra['fallback_customers']} fallback)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    modes = [EvalMode(m) for m in dict.fromkeys(args.mode or ["customer_n"])]
    metrics = [MetricKind(m) for m in dict.fromkeys(args.metric or [m.value for m in MetricKind])]
    if EvalMode.STATIC_N in modes and args.static_n is None:
        raise UsageError("--mode static_n needs --static-n")
    if EvalMode.CUSTOMER_N in modes and not args.profiles:
        raise UsageError("--mode customer_n needs --profiles")
    if EvalMode.SEGMENT_N in modes and not (args.segment_n and args.segments):
        raise UsageError("--mode segment_n needs --segment-n and --segments")

    profiles = read_profiles(args.profiles) if args.profiles else None
    segment_n = read_segment_n(args.segment_n) if args.segment_n else None
    segment_key = read_segments(args.segments) if args.segments else None
    lists = read_ranked_lists(args.ranked)
    ireport = IngestReport()
    interactions = list(read_interactions(args.interactions, strict=args.strict, report=ireport))
    relevance = derive_relevance(interactions, args.cutoff_ts, args.relevant_kind or [k.value for k in InteractionKind])

    out = _out_dir(args)
    summary = []
    means: dict[tuple[str, str], tuple[float, int]] = {}
    for metric in metrics:
        for mode in modes:
            report = evaluate(
                metric, lists, relevance, mode=mode, profiles=profiles, static_n=args.static_n,
                segment_n=segment_n, segment_key=segment_key,
                include_fallback=not args.exclude_fallback,
                empty_relevance_as_zero=args.empty_as_zero,
            )
            stem = f"{metric.value}_{mode.value}"
            write_report(report, out / f"{stem}.json", out / f"{stem}.csv")
            means[metric.value, mode.value] = (report.mean_value, report.customer_count)
            summary.append({"metric": metric.value, "mode": mode.value,
                            "mean_value": report.mean_value, "customer_count": report.customer_count})
            print(f"{metric.value}@{mode.value}: {report.mean_value:.6f} over {report.customer_count} customers")

    if EvalMode.STATIC_N in modes and EvalMode.CUSTOMER_N in modes:
        rows = []
        for metric in metrics:
            s_mean, s_count = means[metric.value, "static_n"]
            c_mean, c_count = means[metric.value, "customer_n"]
            rows.append((metric.value, args.static_n, repr(s_mean), s_count, repr(c_mean), c_count,
                         repr(c_mean - s_mean)))
        atomic_write(out / "comparison.csv", csv_text(
            ("metric", "static_n", "static_mean", "static_customers", "customer_n_mean",
             "customer_n_customers", "delta"), rows))
    atomic_write(out / "evaluate.meta.json", json_text(
        _meta(args, "evaluate", reports=summary, interactions=ireport.to_dict())))
    return EXIT_OK


def cmd_analyze(args) -> int:
    profiles = read_profiles(args.profiles)
    kw = {"include_fallback": args.include_fallback}
    hist = n_distribution(profiles, args.buckets, **kw)
    disp = dispersion_vs_median(profiles, args.buckets, **kw)
    cv = cv_vs_median(profiles, args.buckets, **kw)
    out = _out_dir(args)
    atomic_write(out / "n_distribution.csv", histogram_csv(hist))
    atomic_write(out / "dispersion_vs_median.csv", series_csv(disp))
    atomic_write(out / "cv_vs_median.csv", series_csv(cv))
    fallback = sum(p.fallback_used for p in profiles.values())
    meta = _meta(
        args, "analyze",
        profiles=len(profiles),
        excluded_fallback=0 if args.include_fallback else fallback,
        max_customer_n=hist.max_customer_n,
        quantile_method="nearest_rank",
        analyses={
            "n_distribution": {"population": hist.population, "x": "customer_n / max_customer_n"},
            "dispersion_vs_median": {"population": disp.population, "y": disp.y_label,
                                     "aux": disp.aux_label, **disp.meta},
            "cv_vs_median": {"population": cv.population, "y": cv.y_label, **cv.meta},
        },
    )
    atomic_write(out / "analyze.meta.json", json_text(meta))
    print(f"analyzed {hist.population} customers, max CustomerN {hist.max_customer_n}")
    return EXIT_OK


def cmd_generate(args) -> int:
    data = {}
    if args.spec:
        data = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise InvalidSpec("spec file must hold a JSON object")
    if args.seed is not None:
        data["seed"] = args.seed
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        try:
            data["seed"] = int(env_seed)
        except ValueError:
            raise InvalidSpec(f"{SEED_ENV} must be an integer") from None
    spec = PopulationSpec.from_dict(data)
    pop = generate(spec, args.out_dir)
    print(f"wrote {pop.impression_count} impressions for {spec.customer_count} customers to {pop.out_dir}")
    return EXIT_OK


def cmd_recommend(args) -> int:
    pop_dir = Path(args.population)
    meta = json.loads((pop_dir / POPULATION_FILE).read_text(encoding="utf-8"))
    spec = PopulationSpec.from_dict(meta["spec"])
    cutoff = args.cutoff_ts if args.cutoff_ts is not None else spec.cutoff_ts
    interactions = list(read_interactions(pop_dir / "interactions.csv", strict=True))
    relevance = derive_relevance(interactions, cutoff)
    popularity = Counter(ev.item_id for ev in interactions if ev.timestamp < cutoff)
    customers = sorted({ev.customer_id for ev in read_impressions(pop_dir / "impressions.csv", strict=True)})
    lists = recommend_all(args.strategy, customers, catalog_for(spec), relevance, args.length,
                          args.seed, popularity)
    out = Path(args.out) if args.out else pop_dir / f"ranked_{args.strategy}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_ranked_lists(lists, out)
    print(f"wrote {len(lists)} {args.strategy} lists of length {args.length} to {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    reports = [read_report(p) for p in args.report]
    labels = args.label or [Path(p).stem for p in args.report]
    if len(labels) != len(reports):
        raise UsageError("--label must be given once per --report")
    out = _out_dir(args)
    summary = [
        (lab, r.metric.value, r.mode.value, repr(r.mean_value), r.customer_count)
        for lab, r in zip(labels, reports)
    ]
    atomic_write(out / "compare_summary.csv",
                 csv_text(("label", "metric", "mode", "mean_value", "customer_count"), summary))
    by_customer = [{row.customer_id: row for row in r.per_customer} for r in reports]
    customers = sorted(set().union(*by_customer))
    header = ["customer_id"]
    for lab in labels:
        header += [f"{lab}_cutoff", f"{lab}_value"]
    rows = []
    for c in customers:
        row = [c]
        for table in by_customer:
            r = table.get(c)
            row += [r.cutoff_used, repr(r.value)] if r else ["", ""]
        rows.append(row)
    atomic_write(out / "compare_customers.csv", csv_text(header, rows))
    for lab, metric, mode, mean, count in summary:
        print(f"{lab}: {metric}@{mode} = {float(mean):.6f} (S={count})")
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="custn", description="Personalized-cutoff evaluation of ranked recommendation logs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, out_required=True):
        p.add_argument("--strict", action="store_true", help="fail on the first malformed row")
        p.add_argument("--out-dir", required=out_required)
        p.add_argument("--stamp", action="store_true", help="embed a wall-clock timestamp in metadata")

    p = sub.add_parser("validate", help="check impression/interaction files")
    p.add_argument("--impressions")
    p.add_argument("--interactions")
    p.add_argument("--show-errors", type=int, default=10, metavar="K")
    common(p, out_required=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("profile", help="compute CustomerN profiles")
    p.add_argument("--impressions", required=True)
    p.add_argument("--cutoff-ts", type=_timestamp, required=True)
    p.add_argument("--window-days", type=_positive, default=DEFAULT_WINDOW_DAYS)
    p.add_argument("--min-sessions", type=_positive, default=3)
    p.add_argument("--fallback-n", type=_positive, default=10)
    p.add_argument("--median-mode", choices=[m.value for m in MedianMode], default="interpolate_ceil")
    p.add_argument("--segments")
    p.add_argument("--gap-minutes", type=_positive, default=30)
    p.add_argument("--dedup", action="store_true")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    common(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("evaluate", help="metric@N and metric@CustomerN")
    p.add_argument("--profiles")
    p.add_argument("--ranked", required=True)
    p.add_argument("--interactions", required=True)
    p.add_argument("--cutoff-ts", type=_timestamp, required=True)
    p.add_argument("--metric", action="append", choices=[m.value for m in MetricKind])
    p.add_argument("--mode", action="append", choices=[m.value for m in EvalMode])
    p.add_argument("--static-n", type=_positive)
    p.add_argument("--segments")
    p.add_argument("--segment-n")
    p.add_argument("--relevant-kind", action="append", choices=[k.value for k in InteractionKind])
    p.add_argument("--exclude-fallback", action="store_true")
    p.add_argument("--empty-as-zero", action="store_true")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="CustomerN variability tables")
    p.add_argument("--profiles", required=True)
    p.add_argument("--buckets", type=_positive, default=DEFAULT_BUCKETS)
    p.add_argument("--include-fallback", action="store_true")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("generate", help="write a synthetic population")
    p.add_argument("--spec", help="JSON file with PopulationSpec fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("recommend", help="reference ranked lists for a generated population")
    p.add_argument("--population", required=True, help="directory written by generate")
    p.add_argument("--strategy", choices=("oracle", "random", "popularity"), required=True)
    p.add_argument("--length", type=_positive, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cutoff-ts", type=_timestamp)
    p.add_argument("--out")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("compare", help="side-by-side aggregate reports")
    p.add_argument("--report", action="append", required=True)
    p.add_argument("--label", action="append")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--stamp", action="store_true")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, FormatMismatch, MixedSessionIdPresence, MissingProfile) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except EmptyPopulation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (UsageError, InvalidSpec, InvalidLength, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CustNError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
