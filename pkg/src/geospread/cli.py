"""Command-line pipeline: prepare, metrics, timeline, topics, propagation, synth, report.

Every command reads files, writes files, and is deterministic for a fixed
config and seed. Exit codes: 0 success, 2 bad configuration, 3 empty
result, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import replace

from . import __version__
from .corpus import (
    Corpus,
    attach_estimated_locations,
    dedup,
    filter_keyword,
    load_corpus,
    load_keywords,
    load_traces,
    prune_languages,
    write_corpus,
)
from .errors import (
    EmptyAfterPreprocess,
    EmptyForest,
    EmptySeries,
    EmptySet,
    FormatMismatch,
    GeospreadError,
    NoTokens,
    UnreadableFile,
)
from .geodesy import GeoPoint, assign_region, load_region_table
from .metrics import KM_PER_MILE, REPORT_COLUMNS, distance_cdf, locality_report
from .propagation import CURVE_COLUMNS, child_proportion_curve, classify, load_graph
from .synth import SynthSpec, generate
from .temporal import WindowSpec, align_to_peak, bucket, find_peak, lowess, metric_series, with_metrics
from .topics import (
    assign_topics,
    choose_k,
    dominant_topic_by_region,
    gibbs_train,
    preprocess,
    save_model,
    top_words,
)

EXIT_OK = 0
EXIT_BAD_CONFIG = 2
EXIT_EMPTY = 3
EXIT_IO = 4

DEFAULT_HORIZON_SECS = 172_800  # two days
DEFAULT_THRESHOLDS = "50,100,250,500,1000,1500,2500,5000"


class BadConfig(Exception):
    pass


def _parse_point(text: str) -> GeoPoint:
    parts = text.split(",")
    if len(parts) != 2:
        raise BadConfig(f"expected 'lat,lon', got {text!r}")
    try:
        return GeoPoint(float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise BadConfig(str(exc)) from exc


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise BadConfig(f"bad number list {text!r}") from exc


def _parse_ints(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise BadConfig(f"bad integer list {text!r}") from exc


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_text(path: str, content: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(content)
    os.replace(tmp, path)


def _write_csv(path: str, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _write_text(path, buf.getvalue())


def _write_json(path: str, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_config_file(path: str) -> dict[str, str]:
    """Parse a key=value config file; '#' starts a comment, quotes optional."""
    values: dict[str, str] = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise BadConfig(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            value = value.strip()
            if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
                value = value[1:-1]
            values[key.strip().lower().replace("_", "-")] = value
    return values


def _config_to_argv(values: dict[str, str]) -> list[str]:
    argv: list[str] = []
    for key, value in values.items():
        if value.lower() in ("true", "yes", "on"):
            argv.append(f"--{key}")
        elif value.lower() in ("false", "no", "off"):
            continue
        else:
            argv.extend([f"--{key}", value])
    return argv


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file; explicit flags win")
    common.add_argument("--input", help="input corpus file")
    common.add_argument("--output-dir", default=".", help="directory for output files")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--window-secs", type=int, default=1800)
    common.add_argument("--event-start", type=int, help="event origin, epoch seconds UTC")
    common.add_argument("--horizon-secs", type=int, default=DEFAULT_HORIZON_SECS)
    common.add_argument("--region-table", help="CSV of region key, lat, lon centroids")
    common.add_argument("--units", choices=("km", "miles"), default="km")

    parser = argparse.ArgumentParser(
        prog="geospread",
        description="Locality metrics, topics, and propagation analysis for geotagged message streams",
    )
    parser.add_argument("--version", action="version", version=f"geospread {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", parents=[common], help="filter and geolocate a raw corpus")
    p.add_argument("--format", choices=("ndjson", "csv"), default="ndjson")
    p.add_argument("--keywords", help="JSON keyword file; omit to skip keyword filtering")
    p.add_argument("--keyword-mode", choices=("substring", "token"), default="substring")
    p.add_argument("--min-language-count", type=int, default=100)
    p.add_argument("--traces", help="NDJSON user traces for home estimation")
    p.add_argument("--min-trace-points", type=int, default=2)

    p = sub.add_parser("metrics", parents=[common], help="aggregate locality report and distance CDF")
    p.add_argument("--center", help="CDF center point as 'lat,lon'", required=False)
    p.add_argument("--thresholds", default=DEFAULT_THRESHOLDS, help="ascending distances in --units")
    p.add_argument("--spread-mode", choices=("messages", "regions"), default="messages")
    p.add_argument("--scope-label", help="value of the scope column; defaults to event/all")

    p = sub.add_parser("timeline", parents=[common], help="per-window metric series around the peak")
    p.add_argument("--spread-mode", choices=("messages", "regions"), default="messages")
    p.add_argument("--lowess", action="store_true", help="add *_lowess columns")
    p.add_argument("--lowess-frac", type=float, default=0.3)
    p.add_argument("--lowess-iters", type=int, default=3)

    p = sub.add_parser("topics", parents=[common], help="train LDA and label the corpus")
    p.add_argument("--k", type=int, help="fixed topic count")
    p.add_argument("--k-candidates", help="comma list; picks the best by held-out perplexity")
    p.add_argument("--language", default="en")
    p.add_argument("--stopwords", help="one stopword per line")
    p.add_argument("--min-df", type=int, default=2)
    p.add_argument("--news-user-threshold", type=int, default=20, help="0 disables the wire-copy filter")
    p.add_argument("--alpha", type=float, help="default 50/K")
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--fold-iters", type=int, default=50)
    p.add_argument("--heldout-frac", type=float, default=0.1)
    p.add_argument("--per-message", action="store_true", help="fold in each message instead of user dominance")

    p = sub.add_parser("propagation", parents=[common], help="root/child classification and child curve")
    p.add_argument("--graph", help="edge list CSV/TSV of follower_id, followee_id")

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic event corpus")
    p.add_argument("--center", default="40.0,-100.0")
    p.add_argument("--n-messages", type=int, default=2000)
    p.add_argument("--n-users", type=int, default=200)
    p.add_argument("--n-regions", type=int, default=8)
    p.add_argument("--spread-growth", type=float, default=0.3)
    p.add_argument("--follow-density", type=float, default=0.02)
    p.add_argument("--synth-windows", type=int, default=96)
    p.add_argument("--estimated-frac", type=float, default=0.25)

    sub.add_parser("report", parents=[common], help="consolidate command outputs into report.json")
    return parser


def _require(value, flag: str):
    if value is None:
        raise BadConfig(f"{flag} is required")
    return value


def _load_prepared(args) -> Corpus:
    path = _require(args.input, "--input")
    return load_corpus(path, "ndjson")


def _resolve_regions(messages, region_table_path):
    """Give every message a region label; returns (messages, centroid map)."""
    centroids = {}
    if region_table_path:
        regions = load_region_table(region_table_path)
        centroids = {r.key: r.centroid for r in regions}
        out = []
        for m in messages:
            if m.region is not None:
                out.append(m)
                continue
            if m.point is None:
                raise BadConfig(f"message {m.id} has neither point nor region")
            out.append(replace(m, region=assign_region(m.point, regions).key))
        return out, centroids
    missing = [m.id for m in messages if m.region is None]
    if missing:
        raise BadConfig(
            f"{len(missing)} message(s) lack region labels and no --region-table was given"
        )
    return list(messages), centroids


def _event_scope(messages, args):
    """Restrict to [origin, origin + horizon) and build the window grid."""
    if args.event_start is not None:
        origin = args.event_start
    elif messages:
        origin = min(m.timestamp for m in messages)
    else:
        origin = 0
    horizon = args.horizon_secs
    count = max(1, math.ceil(horizon / args.window_secs))
    spec = WindowSpec(origin=origin, count=count, width=args.window_secs)
    scoped = [m for m in messages if origin <= m.timestamp < origin + horizon]
    return scoped, spec


def _spread_converted(km_value: float, units: str) -> float:
    return km_value / KM_PER_MILE if units == "miles" else km_value


def _spread_column(units: str) -> str:
    return "spread_miles" if units == "miles" else "spread_km"


def cmd_prepare(args) -> int:
    corpus = load_corpus(_require(args.input, "--input"), args.format)
    if args.keywords:
        corpus = filter_keyword(corpus, load_keywords(args.keywords), args.keyword_mode)
    corpus = dedup(corpus)
    corpus = prune_languages(corpus, args.min_language_count)
    traces = load_traces(args.traces) if args.traces else {}
    corpus = attach_estimated_locations(corpus, traces, args.min_trace_points)

    os.makedirs(args.output_dir, exist_ok=True)
    out_path = os.path.join(args.output_dir, "prepared.ndjson")
    write_corpus(corpus, out_path + ".tmp")
    os.replace(out_path + ".tmp", out_path)
    stats = {
        "input": args.input,
        "output": out_path,
        "final_count": len(corpus),
        "stages": list(corpus.provenance.log),
    }
    _write_json(os.path.join(args.output_dir, "prepare_stats.json"), stats)
    print(out_path)
    return EXIT_OK


def cmd_metrics(args) -> int:
    corpus = _load_prepared(args)
    messages, centroids = _resolve_regions(list(corpus), args.region_table)
    if args.event_start is None:
        scoped = messages
    else:
        scoped, _ = _event_scope(messages, args)
    if not scoped:
        raise EmptySet("no messages in scope")
    scope_label = args.scope_label or ("event" if args.event_start is not None else "all")

    report = locality_report(scoped, args.spread_mode, centroids or None)
    os.makedirs(args.output_dir, exist_ok=True)
    columns = list(REPORT_COLUMNS)
    columns[4] = _spread_column(args.units)
    _write_csv(
        os.path.join(args.output_dir, "metrics_report.csv"),
        columns,
        [
            (
                scope_label,
                report.n,
                report.focus,
                report.entropy,
                _spread_converted(report.spread, args.units),
                report.midpoint.lat,
                report.midpoint.lon,
            )
        ],
    )

    if args.center:
        center = _parse_point(args.center)
        thresholds = _parse_floats(args.thresholds)
        km_thresholds = [t * KM_PER_MILE for t in thresholds] if args.units == "miles" else thresholds
        fractions = distance_cdf(scoped, center, km_thresholds)
        _write_csv(
            os.path.join(args.output_dir, "distance_cdf.csv"),
            (f"threshold_{args.units}", "fraction"),
            list(zip(thresholds, fractions)),
        )
    print(os.path.join(args.output_dir, "metrics_report.csv"))
    return EXIT_OK


def cmd_timeline(args) -> int:
    corpus = _load_prepared(args)
    messages, centroids = _resolve_regions(list(corpus), args.region_table)
    scoped, spec = _event_scope(messages, args)
    series = bucket(scoped, spec)
    peak = find_peak(series)
    reports = metric_series(series, {m.id: m for m in scoped}, args.spread_mode, centroids or None)
    series = align_to_peak(with_metrics(series, reports), peak)

    columns = ["window_start_epoch", "minutes_from_peak", "count", "focus", "entropy_bits", _spread_column(args.units)]
    smoothed = {}
    if args.lowess:
        observed = [k for k, r in enumerate(reports) if r is not None]
        if len(observed) < 2:
            raise EmptySeries("lowess needs at least two non-empty windows")
        xs = [series.offsets_min[k] for k in observed]
        for name, values in (
            ("focus", [reports[k].focus for k in observed]),
            ("entropy_bits", [reports[k].entropy for k in observed]),
            (_spread_column(args.units), [_spread_converted(reports[k].spread, args.units) for k in observed]),
        ):
            fitted = lowess(xs, values, frac=args.lowess_frac, robust_iters=args.lowess_iters)
            smoothed[name] = dict(zip(observed, fitted.tolist()))
        columns += [f"{name}_lowess" for name in ("focus", "entropy_bits", _spread_column(args.units))]

    rows = []
    for k in range(spec.count):
        r = reports[k]
        row = [
            spec.start(k),
            series.offsets_min[k],
            series.counts[k],
            None if r is None else r.focus,
            None if r is None else r.entropy,
            None if r is None else _spread_converted(r.spread, args.units),
        ]
        if args.lowess:
            for name in ("focus", "entropy_bits", _spread_column(args.units)):
                row.append(smoothed[name].get(k))
        rows.append(row)
    os.makedirs(args.output_dir, exist_ok=True)
    out = os.path.join(args.output_dir, "timeline.csv")
    _write_csv(out, columns, rows)
    print(out)
    return EXIT_OK


def cmd_topics(args) -> int:
    corpus = _load_prepared(args)
    stopwords = []
    if args.stopwords:
        try:
            with open(args.stopwords, encoding="utf-8") as fh:
                stopwords = [line.strip() for line in fh if line.strip()]
        except OSError as exc:
            raise UnreadableFile(f"{args.stopwords}: {exc}") from exc
    threshold = args.news_user_threshold if args.news_user_threshold > 0 else None
    docs = preprocess(corpus, args.language, stopwords, args.min_df, threshold)

    chosen_by = "fixed"
    if args.k_candidates:
        candidates = _parse_ints(args.k_candidates)
        k = choose_k(
            docs,
            candidates,
            heldout_frac=args.heldout_frac,
            seed=args.seed,
            alpha=args.alpha,
            beta=args.beta,
            iters=args.iters,
            fold_iters=args.fold_iters,
        )
        chosen_by = f"perplexity over {candidates}"
    elif args.k:
        k = args.k
    else:
        raise BadConfig("one of --k or --k-candidates is required")

    model = gibbs_train(docs, k, alpha=args.alpha, beta=args.beta, iters=args.iters, seed=args.seed)
    labeled = assign_topics(
        model, docs, corpus, per_message=args.per_message, fold_iters=args.fold_iters, seed=args.seed
    )

    os.makedirs(args.output_dir, exist_ok=True)
    save_model(model, os.path.join(args.output_dir, "model.json"))

    counts = {t: 0 for t in range(1, k + 1)}
    unlabeled = 0
    for m in labeled:
        if m.topic is None:
            unlabeled += 1
        else:
            counts[m.topic] += 1
    _write_csv(
        os.path.join(args.output_dir, "topic_report.csv"),
        ("topic", "tweet_count", "top_words"),
        [(t, counts[t], " ".join(top_words(model, t, 20))) for t in range(1, k + 1)],
    )

    out_path = os.path.join(args.output_dir, "labeled.ndjson")
    write_corpus(labeled, out_path + ".tmp")
    os.replace(out_path + ".tmp", out_path)

    region_rows = []
    try:
        messages, _ = _resolve_regions(list(labeled), args.region_table)
        region_map = dominant_topic_by_region(Corpus(tuple(messages)))
        region_rows = sorted(region_map.items())
    except BadConfig:
        pass  # no region information available; emit the header only
    _write_csv(os.path.join(args.output_dir, "region_topics.csv"), ("region", "topic"), region_rows)

    _write_json(
        os.path.join(args.output_dir, "topics_stats.json"),
        {
            "k": k,
            "chosen_by": chosen_by,
            "documents": len(docs.docs),
            "vocabulary": len(docs.vocabulary),
            "labeled": len(labeled) - unlabeled,
            "unlabeled": unlabeled,
            "tweet_counts": {str(t): counts[t] for t in counts},
        },
    )
    print(os.path.join(args.output_dir, "model.json"))
    return EXIT_OK


def cmd_propagation(args) -> int:
    corpus = _load_prepared(args)
    graph = load_graph(_require(args.graph, "--graph"))
    scoped, spec = _event_scope(list(corpus), args)
    series = bucket(scoped, spec)
    peak = find_peak(series)
    forest = classify(scoped, graph)
    curve = child_proportion_curve(forest, spec, peak)

    os.makedirs(args.output_dir, exist_ok=True)
    _write_csv(
        os.path.join(args.output_dir, "classification.csv"),
        ("user_id", "classification", "first_post_epoch", "parent_candidates"),
        [
            (u, forest.classification[u], forest.first_post[u], ";".join(sorted(forest.parent_candidates[u])))
            for u in sorted(forest.first_post)
        ],
    )
    _write_csv(
        os.path.join(args.output_dir, "child_curve.csv"),
        CURVE_COLUMNS,
        [(p.minutes_from_peak, p.cumulative_users, p.cumulative_children, p.child_fraction) for p in curve],
    )
    print(os.path.join(args.output_dir, "child_curve.csv"))
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SynthSpec(
        center=_parse_point(args.center),
        n_messages=args.n_messages,
        n_users=args.n_users,
        n_regions=args.n_regions,
        spread_growth=args.spread_growth,
        follow_density=args.follow_density,
        seed=args.seed,
        origin=args.event_start if args.event_start is not None else 1_600_000_000,
        width=args.window_secs,
        windows=args.synth_windows,
        estimated_frac=args.estimated_frac,
    )
    manifest = generate(spec, args.output_dir)
    _write_json(os.path.join(args.output_dir, "synth_manifest.json"), manifest)
    print(manifest["paths"]["corpus"])
    return EXIT_OK


def _read_csv_rows(path: str):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_report(args) -> int:
    out_dir = args.output_dir
    report: dict = {}
    stats_path = os.path.join(out_dir, "prepare_stats.json")
    if os.path.exists(stats_path):
        with open(stats_path, encoding="utf-8") as fh:
            report["prepare"] = json.load(fh)
    metrics_path = os.path.join(out_dir, "metrics_report.csv")
    if os.path.exists(metrics_path):
        report["metrics"] = _read_csv_rows(metrics_path)
    cdf_path = os.path.join(out_dir, "distance_cdf.csv")
    if os.path.exists(cdf_path):
        report["distance_cdf"] = _read_csv_rows(cdf_path)
    timeline_path = os.path.join(out_dir, "timeline.csv")
    if os.path.exists(timeline_path):
        rows = _read_csv_rows(timeline_path)
        observed = [r for r in rows if r["count"] != "0"]
        peak_rows = [r for r in rows if r["minutes_from_peak"] == "0.0"]
        report["timeline"] = {
            "windows": len(rows),
            "non_empty_windows": len(observed),
            "peak": peak_rows[0] if peak_rows else None,
        }
    topics_path = os.path.join(out_dir, "topics_stats.json")
    if os.path.exists(topics_path):
        with open(topics_path, encoding="utf-8") as fh:
            report["topics"] = json.load(fh)
        topic_report = os.path.join(out_dir, "topic_report.csv")
        if os.path.exists(topic_report):
            report["topics"]["table"] = _read_csv_rows(topic_report)
    curve_path = os.path.join(out_dir, "child_curve.csv")
    if os.path.exists(curve_path):
        rows = _read_csv_rows(curve_path)
        report["propagation"] = {"checkpoints": len(rows), "final": rows[-1] if rows else None}
    synth_path = os.path.join(out_dir, "synth_manifest.json")
    if os.path.exists(synth_path):
        with open(synth_path, encoding="utf-8") as fh:
            report["synth"] = json.load(fh)

    if not report:
        raise EmptySet(f"no command outputs found under {out_dir}")
    _write_json(os.path.join(out_dir, "report.json"), report)
    print(os.path.join(out_dir, "report.json"))
    return EXIT_OK


_COMMANDS = {
    "prepare": cmd_prepare,
    "metrics": cmd_metrics,
    "timeline": cmd_timeline,
    "topics": cmd_topics,
    "propagation": cmd_propagation,
    "synth": cmd_synth,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # merge an optional key=value config file: injected right after the
    # subcommand so explicit flags, parsed later, win
    if argv and not argv[0].startswith("-"):
        config_path = None
        for i, token in enumerate(argv):
            if token == "--config" and i + 1 < len(argv):
                config_path = argv[i + 1]
            elif token.startswith("--config="):
                config_path = token.split("=", 1)[1]
        if config_path:
            try:
                injected = _config_to_argv(load_config_file(config_path))
            except (BadConfig, UnreadableFile) as exc:
                print(f"geospread: config: {exc}", file=sys.stderr)
                return EXIT_BAD_CONFIG if isinstance(exc, BadConfig) else EXIT_IO
            argv = [argv[0]] + injected + argv[1:]

    parser = build_parser()
    args = parser.parse_args(argv)
    command = _COMMANDS[args.command]
    try:
        return command(args)
    except BadConfig as exc:
        print(f"geospread {args.command}: bad config: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except (EmptySet, EmptySeries, EmptyAfterPreprocess, NoTokens, EmptyForest) as exc:
        print(f"geospread {args.command}: empty result: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (UnreadableFile, FormatMismatch, OSError) as exc:
        print(f"geospread {args.command}: i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, GeospreadError) as exc:
        print(f"geospread {args.command}: bad config: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
