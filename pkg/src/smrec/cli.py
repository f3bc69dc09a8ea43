"""Benchmark harness CLI: data -> graphs -> enhancement -> recommendations -> report.

Two subcommands: `run` executes one configured experiment, `sweep` runs a
grid over neighborhood sizes and/or enhancement thresholds. Machine-readable
reports are byte-deterministic for a fixed (config, data, seed); stage
timings go to the log on stderr, never into the report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 compute error.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import logging
import sys
import tempfile
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .algebra import MAXMIN, METRIC, AlgebraError, ClosureConvergenceError
from .evaluation import EvalReport, evaluate
from .graphs import save_edges
from .recommenders import make_recommender
from .relation import (
    BinaryRelation,
    RatingsParseError,
    SplitSpec,
    load_split_files,
    parse_ratings,
    split,
)
from .semimetric import ThresholdPolicy, save_stats

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_COMPUTE = 3

ALGORITHMS = ("item-prox", "item-sm", "user-prox", "user-sm")
ALGEBRAS = {"metric": METRIC, "max-min": MAXMIN}

log = logging.getLogger("smrec")


class UsageError(ValueError):
    """Invalid flag combination or value detected after parsing."""


class StageError(RuntimeError):
    """Failure inside a pipeline stage, annotated with the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def _stage(name: str):
    start = time.perf_counter()
    try:
        yield
    except (UsageError, StageError):
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    finally:
        log.info("stage %-10s %.3fs", name, time.perf_counter() - start)


_DATA_STAGES = {"load", "split"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines one experiment run."""

    algorithm: str
    data: str | None = None
    train: str | None = None
    test: str | None = None
    holdout: float | None = None
    seed: int = 0
    top_n: int = 10
    k: int = 60
    b_threshold: float | None = None
    b_percentile: float | None = None
    b_powerlaw: bool = False
    require_both_b: bool = False
    algebra: str = "metric"
    threads: int | None = None
    cache_dir: str | None = None

    def threshold_policy(self) -> ThresholdPolicy | None:
        chosen = [
            self.b_threshold is not None,
            self.b_percentile is not None,
            self.b_powerlaw,
        ]
        if sum(chosen) > 1:
            raise UsageError("choose at most one of --b-threshold/--b-percentile/--b-powerlaw")
        if self.b_threshold is not None:
            if not self.b_threshold > 0:
                raise UsageError("--b-threshold must be positive")
            return ThresholdPolicy.explicit(self.b_threshold)
        if self.b_percentile is not None:
            if not 0.0 < self.b_percentile < 1.0:
                raise UsageError("--b-percentile must lie in (0, 1)")
            return ThresholdPolicy.percentile(self.b_percentile)
        # power-law cutoff is also the default policy for sm algorithms
        return ThresholdPolicy.power_law()

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {self.algorithm!r}")
        if self.algebra not in ALGEBRAS:
            raise UsageError(f"unknown algebra {self.algebra!r}")
        if self.top_n < 1:
            raise UsageError("--top-n must be at least 1")
        if self.k < 1:
            raise UsageError("--k must be at least 1")
        if self.holdout is not None and not 0.0 < self.holdout < 1.0:
            raise UsageError("--holdout must lie in (0, 1)")
        if self.train is not None or self.test is not None:
            if self.train is None or self.test is None:
                raise UsageError("--train and --test must be given together")
        elif self.data is None:
            raise UsageError("provide --data or a --train/--test pair")
        self.threshold_policy()


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _published_pair(data_path: Path) -> tuple[Path, Path] | None:
    base = data_path.with_name("u1.base")
    test = data_path.with_name("u1.test")
    if base.exists() and test.exists():
        return base, test
    return None


def _load_and_split(config: ExperimentConfig):
    """Resolve the configured data sources into (train, test, provenance)."""
    sources: dict[str, str] = {}
    if config.train is not None:
        with _stage("load"):
            _, train, test = load_split_files(config.train, config.test)
            sources[str(config.train)] = _sha256(config.train)
            sources[str(config.test)] = _sha256(config.test)
        split_info = {"method": "file-pair", "train": str(config.train), "test": str(config.test)}
    else:
        data_path = Path(config.data)
        pair = None if config.holdout is not None else _published_pair(data_path)
        if pair is not None:
            with _stage("load"):
                log.info("using published split files %s / %s", pair[0].name, pair[1].name)
                _, train, test = load_split_files(pair[0], pair[1])
                sources[str(pair[0])] = _sha256(pair[0])
                sources[str(pair[1])] = _sha256(pair[1])
            split_info = {"method": "file-pair", "train": str(pair[0]), "test": str(pair[1])}
        else:
            with _stage("load"):
                relation = parse_ratings(data_path)
                sources[str(data_path)] = _sha256(data_path)
            holdout = config.holdout if config.holdout is not None else 0.2
            with _stage("split"):
                train, test = split(relation, SplitSpec.random(holdout, config.seed))
            split_info = {
                "method": "random-holdout",
                "holdout_fraction": holdout,
                "seed": config.seed,
            }
    split_info["note"] = (
        "benchmark's original split protocol is unreported; this split is a stand-in"
    )
    return train, test, {"sources": sources, "split": split_info}


def _fit_recommender(config: ExperimentConfig, train: BinaryRelation, cache_dir=None):
    policy = config.threshold_policy()
    rec = make_recommender(
        config.algorithm,
        k=config.k,
        threshold_policy=policy,
        algebra=ALGEBRAS[config.algebra],
        require_both=config.require_both_b,
        n_jobs=config.threads,
        cache_dir=cache_dir if cache_dir is not None else config.cache_dir,
    )
    stage_name = "enhance" if config.algorithm.endswith("-sm") else "graph"
    with _stage(stage_name):
        rec.fit(train)
    return rec


def run_experiment(config: ExperimentConfig, *, cache_dir=None):
    """Execute the full pipeline; returns (recommender, EvalReport, report doc)."""
    config.validate()
    train, test, provenance = _load_and_split(config)
    rec = _fit_recommender(config, train, cache_dir)
    with _stage("evaluate"):
        report = evaluate(rec, test, top_n=config.top_n)
    doc = {
        "smrec_version": __version__,
        "config": asdict(config),
        "data": {
            **provenance,
            "users": train.n,
            "items": train.m,
            "train_entries": train.entry_count,
            "test_entries": test.entry_count,
        },
        "results": report.to_dict(),
        "enhancement": (
            {
                "threshold": float(rec.threshold_),
                "inserted_edges": int(rec.inserted_edges_),
            }
            if hasattr(rec, "threshold_")
            else None
        ),
    }
    return rec, report, doc


def _fmt(value, digits=4) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def _print_summary(report: EvalReport, doc: dict) -> None:
    enh = doc.get("enhancement")
    print(f"algorithm          {doc['config']['algorithm']}")
    print(f"users included     {report.included_users} (skipped {len(report.skipped)})")
    print(f"top-n              {report.top_n}")
    print(f"macro precision    {_fmt(report.macro_precision)}")
    print(f"macro recall       {_fmt(report.macro_recall)}")
    print(f"macro F1           {_fmt(report.macro_f1)}")
    print(f"macro agreement    {_fmt(report.macro_agreement)}")
    print(f"pooled agreement   {_fmt(report.pooled_agreement)}")
    if enh:
        print(f"b threshold        {enh['threshold']:.6g}")
        print(f"edges rewritten    {enh['inserted_edges']}")


def _render_tsv(doc: dict) -> str:
    lines = ["user\tprecision\trecall\tf1\tagreement\ttest_size"]
    for user, row in doc["results"]["per_user"].items():
        agreement = "" if row["agreement"] is None else repr(row["agreement"])
        lines.append(
            f"{user}\t{row['precision']!r}\t{row['recall']!r}\t{row['f1']!r}"
            f"\t{agreement}\t{row['test_size']}"
        )
    agg = doc["results"]["aggregate"]
    for key in sorted(agg):
        lines.append(f"# {key}\t{agg[key]!r}")
    return "\n".join(lines) + "\n"


def _write_report(doc: dict, out: str | None, fmt: str) -> None:
    if out is None:
        return
    if fmt == "structured":
        payload = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    else:
        payload = _render_tsv(doc)
    Path(out).write_text(payload, encoding="utf-8")
    log.info("report written to %s", out)


def _export_artifacts(args, rec, report: EvalReport) -> None:
    graph = getattr(rec, "item_graph_", None) or getattr(rec, "user_graph_", None)
    if getattr(args, "export_graph", None):
        with _stage("export"):
            save_edges(graph, args.export_graph)
    if getattr(args, "export_stats", None):
        if not hasattr(rec, "stats_"):
            raise UsageError("--export-stats requires a semi-metric algorithm")
        with _stage("export"):
            save_stats(rec.stats_, args.export_stats, labels=graph.labels)
    if getattr(args, "export_rankings", None):
        limit = getattr(args, "rankings_limit", None)
        with _stage("export"):
            with open(args.export_rankings, "w", encoding="utf-8") as fh:
                for user in sorted(report.per_user):
                    recs = rec.score_items(user)
                    ranking = recs.ranking if limit is None else recs.ranking[:limit]
                    for rank, idx in enumerate(ranking, start=1):
                        fh.write(
                            f"{user}\t{rank}\t{recs.item_ids[idx]}"
                            f"\t{float(recs.scores[idx])!r}\n"
                        )


def _config_from_args(args) -> ExperimentConfig:
    return ExperimentConfig(
        algorithm=args.algorithm,
        data=args.data,
        train=args.train,
        test=args.test,
        holdout=args.holdout,
        seed=args.seed,
        top_n=args.top_n,
        k=args.k,
        b_threshold=getattr(args, "b_threshold", None),
        b_percentile=getattr(args, "b_percentile", None),
        b_powerlaw=getattr(args, "b_powerlaw", False),
        require_both_b=getattr(args, "require_both_b", False),
        algebra=args.algebra,
        threads=args.threads,
        cache_dir=args.cache_dir,
    )


def cmd_run(args) -> int:
    config = _config_from_args(args)
    rec, report, doc = run_experiment(config)
    _print_summary(report, doc)
    _write_report(doc, args.out, args.format)
    _export_artifacts(args, rec, report)
    return EXIT_OK


def _parse_grid(text: str | None, cast):
    if text is None:
        return None
    try:
        values = [cast(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"malformed grid {text!r}") from None
    if not values:
        raise UsageError(f"empty grid {text!r}")
    return values


def cmd_sweep(args) -> int:
    base = _config_from_args(args)
    base.validate()
    k_grid = _parse_grid(args.k_grid, int)
    n_grid = _parse_grid(args.top_n_grid, int)
    pct_grid = _parse_grid(args.b_percentile_grid, float)
    thr_grid = _parse_grid(args.b_threshold_grid, float)
    if pct_grid is not None and thr_grid is not None:
        raise UsageError("choose one of --b-percentile-grid/--b-threshold-grid")
    axes = {}
    if k_grid is not None:
        axes["k"] = k_grid
    if n_grid is not None:
        axes["top_n"] = n_grid
    if pct_grid is not None:
        axes["b_percentile"] = pct_grid
    if thr_grid is not None:
        axes["b_threshold"] = thr_grid
    if not axes:
        raise UsageError("sweep needs at least one grid flag")

    train, test, provenance = _load_and_split(base)
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    names = list(axes)
    header = names + [
        "status", "macro_f1", "macro_agreement", "pooled_agreement",
        "b_threshold_used", "edges_rewritten",
    ]
    print("\t".join(header))
    with tempfile.TemporaryDirectory(prefix="smrec-cache-") as scratch:
        cache_dir = args.cache_dir or scratch
        for counter, combo in enumerate(itertools.product(*axes.values())):
            overrides = dict(zip(names, combo))
            if "b_percentile" in overrides or "b_threshold" in overrides:
                overrides.setdefault("b_percentile", None)
                overrides.setdefault("b_threshold", None)
                overrides["b_powerlaw"] = False
            point = ExperimentConfig(**{**asdict(base), **overrides})
            cells = [str(v) for v in combo]
            try:
                point.validate()
                rec = _fit_recommender(point, train, cache_dir)
                with _stage("evaluate"):
                    report = evaluate(rec, test, top_n=point.top_n)
            except (StageError, UsageError, ValueError) as exc:
                log.error("grid point %s failed: %s", overrides, exc)
                print("\t".join(cells + ["failed", "", "", "", "", ""]))
                continue
            threshold = getattr(rec, "threshold_", None)
            inserted = getattr(rec, "inserted_edges_", None)
            print("\t".join(cells + [
                "ok",
                f"{report.macro_f1:.6f}",
                _fmt(report.macro_agreement, 6),
                _fmt(report.pooled_agreement, 6),
                "" if threshold is None else f"{threshold:.6g}",
                "" if inserted is None else str(inserted),
            ]))
            if out_dir:
                doc = {
                    "smrec_version": __version__,
                    "config": asdict(point),
                    "data": {
                        **provenance,
                        "users": train.n,
                        "items": train.m,
                        "train_entries": train.entry_count,
                        "test_entries": test.entry_count,
                    },
                    "results": report.to_dict(),
                    "enhancement": (
                        {"threshold": float(threshold), "inserted_edges": int(inserted)}
                        if threshold is not None
                        else None
                    ),
                }
                name = "-".join(f"{k}={v}" for k, v in zip(names, combo))
                _write_report(doc, out_dir / f"run-{counter:03d}-{name}.json", "structured")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; 2 means data here
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_common(parser: argparse.ArgumentParser) -> None:
    data = parser.add_argument_group("data")
    data.add_argument("--data", help="ratings file (user\\titem\\trating\\ttimestamp)")
    data.add_argument("--train", help="pre-split training ratings file")
    data.add_argument("--test", help="pre-split test ratings file")
    data.add_argument("--holdout", type=float, default=None,
                      help="random holdout fraction (default 0.2 when no split files)")
    data.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    parser.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    parser.add_argument("--top-n", type=int, default=10, dest="top_n")
    parser.add_argument("--k", type=int, default=60, help="user-based neighborhood size")
    parser.add_argument("--algebra", choices=sorted(ALGEBRAS), default="metric")
    parser.add_argument("--threads", type=int, default=None,
                        help="parallelism degree for closure kernels")
    parser.add_argument("--cache-dir", default=None,
                        help="directory for closure caches keyed by input checksum")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("-q", "--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="smrec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"smrec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment", parents=[], add_help=True)
    _add_common(run)
    thr = run.add_argument_group("enhancement threshold (sm algorithms)")
    thr.add_argument("--b-threshold", type=float, default=None, dest="b_threshold",
                     help="explicit below-average-ratio threshold")
    thr.add_argument("--b-percentile", type=float, default=None, dest="b_percentile",
                     help="top fraction of pooled below-average ratios")
    thr.add_argument("--b-powerlaw", action="store_true", dest="b_powerlaw",
                     help="power-law tail cutoff (default for sm algorithms)")
    thr.add_argument("--require-both-b", action="store_true", dest="require_both_b",
                     help="require both directional ratios to clear the threshold")
    out = run.add_argument_group("output")
    out.add_argument("--out", default=None, help="machine-readable report path")
    out.add_argument("--format", choices=("structured", "tsv"), default="structured")
    out.add_argument("--export-graph", default=None, help="fitted proximity graph TSV")
    out.add_argument("--export-stats", default=None, help="semi-metric stats TSV")
    out.add_argument("--export-rankings", default=None, help="per-user ranking TSV")
    out.add_argument("--rankings-limit", type=int, default=None,
                     help="rows per user in the rankings export (default: all)")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run a parameter grid")
    _add_common(sweep)
    sweep.add_argument("--k-grid", default=None, help="comma-separated k values")
    sweep.add_argument("--top-n-grid", default=None, dest="top_n_grid",
                       help="comma-separated top-n values, e.g. 5,10,20")
    sweep.add_argument("--b-percentile-grid", default=None,
                       help="comma-separated percentile fractions")
    sweep.add_argument("--b-threshold-grid", default=None,
                       help="comma-separated explicit thresholds")
    sweep.add_argument("--require-both-b", action="store_true", dest="require_both_b")
    sweep.add_argument("--out-dir", default=None, help="directory for per-point reports")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help and usage errors come through here
        return int(exc.code or 0)
    level = logging.DEBUG if args.verbose else logging.ERROR if args.quiet else logging.INFO
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(message)s", force=True
    )
    try:
        return args.func(args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (RatingsParseError, FileNotFoundError, IsADirectoryError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except StageError as exc:
        log.error("%s", exc)
        return EXIT_DATA if exc.stage in _DATA_STAGES else EXIT_COMPUTE
    except (ClosureConvergenceError, AlgebraError) as exc:
        log.error("%s", exc)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
