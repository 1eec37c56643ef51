"""Command-line entry point tying the modules into runnable workflows.

Subcommands: learn (one algorithm), ensemble (full pipeline), query,
compare, diagnose, bench. All outputs land in the configured directory,
carry the config digest, and are byte-identical across reruns of the same
config and data, including under different worker counts.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import parse_config
from .dataset import load_csv
from .ensemble import (
    arc_strengths,
    bootstrap_average,
    build_pool,
    significance_threshold,
    write_pool_csv,
)
from .errors import BnError, ConfigError, PipelineError
from .figures import (
    render_bench_f1,
    render_comparison_counts,
    render_diagnostic,
    render_strength_scatter,
)
from .learners import TOP_LEVEL, AlgorithmId, LearnerConfig
from .pipeline import build_blacklist, fit_parameters, quantile_grid, run_pipeline
from .reports import (
    compare_to_ensemble,
    diagnostic_curve,
    export_dot,
    export_json,
    export_single_json,
    load_network_json,
    load_single_json,
    write_comparison_csv,
    write_diagnostic_rows,
    write_query_csv,
)
from .sampling import conditional_query
from .synth import BenchConfig, benchmark_suite, write_bench_csv
from .util import canonical_json, config_digest

logger = logging.getLogger(__name__)

WORKERS_ENV = "BNENSEMBLE_WORKERS"


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", WORKERS_ENV, env)
    return 1


def _setup_logging(out_dir: Path | None, verbose: bool) -> None:
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        # No wall-clock in the format: run logs must be reproducible too.
        handlers.append(logging.FileHandler(out_dir / "run.log", mode="w"))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        handlers=handlers,
        force=True,
    )


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    logger.info("wrote %s", path)


def cmd_ensemble(args) -> int:
    cfg = parse_config(args.config)
    out = Path(args.out) if args.out else cfg.out
    _setup_logging(out, args.verbose)
    digest = cfg.digest()
    logger.info("config digest %s", digest)
    _write(out / "config_effective.json", canonical_json(
        {"config": cfg.effective(), "digest": digest}
    ))
    data = load_csv(cfg.data)
    result = run_pipeline(
        data, cfg.pipeline_config(), out_dir=out, digest=digest, workers=_workers(args)
    )

    metadata = dict(result.metadata)
    _write(out / "network.json", export_json(result.network, metadata, result.strengths))
    _write(out / "network.dot", export_dot(result.network, result.strengths, digest))

    reports = []
    for alg, (table, averaged, strengths) in result.singles.items():
        single_net = fit_parameters(averaged, data)
        cut = (
            significance_threshold(table)
            if cfg.threshold == "auto"
            else float(cfg.threshold)
        )
        _write(
            out / f"single_{alg.name}.json",
            export_single_json(
                alg,
                single_net,
                strengths,
                table.frequencies,
                threshold=cut,
                replicate_count=table.replicate_count,
                metadata=metadata,
            ),
        )
        report = compare_to_ensemble(
            result.network.dag, result.strengths, averaged, strengths, alg
        )
        reports.append(report)
        write_comparison_csv(report, out / f"compare_{alg.name}.csv", digest)
        render_strength_scatter(report, out / f"compare_{alg.name}.png", digest)
    render_comparison_counts(reports, out / "compare_counts.png", digest)
    render_diagnostic(result.selection.diagnostic, out / "diagnostic.png", digest)
    logger.info(
        "final network: %d arcs over %d nodes",
        len(result.network.dag.arcs),
        len(result.network.dag.nodes),
    )
    return 0


def cmd_learn(args) -> int:
    cfg = parse_config(args.config)
    out = Path(args.out) if args.out else cfg.out
    _setup_logging(out, args.verbose)
    digest = cfg.digest()
    alg = AlgorithmId.parse(args.algorithm)
    if alg not in TOP_LEVEL:
        raise ConfigError(f"{alg.value} is restrict-only", field="algorithm")
    data = load_csv(cfg.data)
    constraints = build_blacklist(
        data,
        cfg.blacklist,
        cfg.whitelist,
        cfg.roots,
        cfg.leaves,
        cfg.auto_leaves,
        cfg.leaf_zero_threshold,
    )
    table, averaged = bootstrap_average(
        alg,
        data,
        constraints,
        cfg.learner_config(),
        cfg.replicates,
        cfg.seed,
        cfg.threshold,
        workers=_workers(args),
    )
    strengths = arc_strengths(averaged, data)
    net = fit_parameters(averaged, data)
    cut = (
        significance_threshold(table)
        if cfg.threshold == "auto"
        else float(cfg.threshold)
    )
    _write(
        out / f"single_{alg.name}.json",
        export_single_json(
            alg,
            net,
            strengths,
            table.frequencies,
            threshold=cut,
            replicate_count=table.replicate_count,
            metadata={"config_digest": digest, "seed": cfg.seed},
        ),
    )
    _write(out / f"single_{alg.name}.dot", export_dot(net, strengths, digest))
    return 0


def cmd_query(args) -> int:
    out = Path(args.out)
    _setup_logging(out, args.verbose)
    net, metadata = load_network_json(args.network)
    evidence = {}
    for item in args.evidence:
        for chunk in item.split(","):
            if not chunk:
                continue
            if "=" not in chunk:
                raise ConfigError(
                    f"evidence must look like NODE=VALUE, got {chunk!r}",
                    field="evidence",
                )
            name, _, value = chunk.partition("=")
            try:
                evidence[name.strip()] = float(value)
            except ValueError:
                raise ConfigError(
                    f"evidence value for {name!r} is not numeric: {value!r}",
                    field="evidence",
                ) from None
    targets = [t.strip() for t in args.targets.split(",") if t.strip()]
    if not targets:
        raise ConfigError("at least one target is required", field="targets")
    result = conditional_query(net, evidence, targets, args.n, args.seed)
    name = args.name or "_".join(targets)
    write_query_csv(
        result, out / f"query_{name}.csv", str(metadata.get("config_digest", ""))
    )
    for t in targets:
        logger.info(
            "posterior mean of %s = %.6g (se %.2g, ess %.0f)",
            t,
            result.mean(t),
            result.standard_error(t),
            result.effective_sample_size,
        )
    return 0


def cmd_compare(args) -> int:
    run_dir = Path(args.run_dir)
    _setup_logging(run_dir, args.verbose)
    network_path = run_dir / "network.json"
    if not network_path.exists():
        raise PipelineError(
            f"{network_path} not found; run `ensemble` first", stage="compare"
        )
    net, metadata = load_network_json(network_path)
    ensemble_strengths = {
        (a["from"], a["to"]): a["strength"]
        for a in json.loads(network_path.read_text())["arcs"]
    }
    digest = str(metadata.get("config_digest", ""))
    reports = []
    for single_path in sorted(run_dir.glob("single_*.json")):
        single = load_single_json(single_path)
        report = compare_to_ensemble(
            net.dag,
            ensemble_strengths,
            single["network"].dag,
            single["strengths"],
            single["algorithm"],
        )
        reports.append(report)
        stem = f"compare_{single['algorithm'].name}"
        write_comparison_csv(report, run_dir / f"{stem}.csv", digest)
        render_strength_scatter(report, run_dir / f"{stem}.png", digest)
    if not reports:
        raise PipelineError("no single_*.json files found", stage="compare")
    render_comparison_counts(reports, run_dir / "compare_counts.png", digest)
    return 0


def cmd_diagnose(args) -> int:
    cfg = parse_config(args.config)
    out = Path(args.out) if args.out else cfg.out
    _setup_logging(out, args.verbose)
    digest = cfg.digest()
    data = load_csv(cfg.data)
    constraints = build_blacklist(
        data,
        cfg.blacklist,
        cfg.whitelist,
        cfg.roots,
        cfg.leaves,
        cfg.auto_leaves,
        cfg.leaf_zero_threshold,
    )
    learner_cfg = cfg.learner_config()
    entries = []
    for alg in cfg.algorithms:
        table, averaged = bootstrap_average(
            alg, data, constraints, learner_cfg, cfg.replicates, cfg.seed,
            cfg.threshold, workers=_workers(args),
        )
        entries.append((alg, averaged, arc_strengths(averaged, data)))
    pool = build_pool(entries)
    write_pool_csv(pool, out / "arcs_pool.csv", digest)
    grid = quantile_grid(pool, cfg.quantiles)
    rows = diagnostic_curve(data, pool, constraints, grid, cfg.reference, learner_cfg)
    write_diagnostic_rows(rows, out / "diagnostic.csv", digest)
    render_diagnostic(rows, out / "diagnostic.png", digest)
    return 0


def cmd_bench(args) -> int:
    out = Path(args.out)
    _setup_logging(out, args.verbose)
    path = Path(args.config)
    if not path.exists():
        raise ConfigError(f"no such bench config: {path}", field="path")
    raw = json.loads(path.read_text(encoding="utf-8"))
    known = {
        "algorithms", "n_nodes", "n_obs", "seeds", "expected_degree",
        "replicates", "quantiles", "reference", "alpha", "run_ensemble",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}", field=str(sorted(unknown)))
    algorithms = tuple(
        AlgorithmId.parse(a) for a in raw.get("algorithms", ["HC", "PC.STABLE", "MMHC"])
    )
    config = BenchConfig(
        algorithms=algorithms,
        n_nodes=tuple(raw.get("n_nodes", [8])),
        n_obs=tuple(raw.get("n_obs", [2000])),
        seeds=tuple(raw.get("seeds", [0, 1, 2])),
        expected_degree=float(raw.get("expected_degree", 2.0)),
        replicates=int(raw.get("replicates", 100)),
        quantiles=int(raw.get("quantiles", 5)),
        reference=AlgorithmId.parse(raw.get("reference", "TABU")),
        learner=LearnerConfig(alpha=float(raw.get("alpha", 0.05))),
        run_ensemble=bool(raw.get("run_ensemble", True)),
    )
    digest = config_digest(raw)
    rows = benchmark_suite(config, workers=_workers(args))
    write_bench_csv(rows, out / "bench_results.csv", digest)
    render_bench_f1(rows, out / "bench_f1.png", digest)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bnensemble",
        description="Ensemble Bayesian causal network inference.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument(
            "--workers",
            type=int,
            default=None,
            help=f"worker threads (default 1; env {WORKERS_ENV} overrides)",
        )
        p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("ensemble", help="run the full ensemble pipeline")
    common(p)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("learn", help="bootstrap-average one algorithm")
    common(p)
    p.add_argument("--algorithm", required=True, help="one top-level algorithm id")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("query", help="conditional query on a fitted network")
    p.add_argument("--network", required=True, help="network.json from a run")
    p.add_argument(
        "--evidence",
        action="append",
        default=[],
        help="NODE=VALUE (repeatable or comma-separated)",
    )
    p.add_argument("--targets", required=True, help="comma-separated target nodes")
    p.add_argument("-n", type=int, default=10_000, help="sample count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default=None, help="output file suffix")
    p.add_argument("--out", default="out")
    p.add_argument("--workers", type=int, default=None, help=argparse.SUPPRESS)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("compare", help="rebuild comparison reports from a run dir")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--workers", type=int, default=None, help=argparse.SUPPRESS)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("diagnose", help="threshold diagnostic curve only")
    common(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("bench", help="synthetic ground-truth benchmark")
    p.add_argument("--config", required=True, help="JSON bench configuration")
    p.add_argument("--out", default="bench_out")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error [{exc.stage or 'run'}]: {exc}", file=sys.stderr)
        return 1
    except BnError as exc:
        stage = getattr(exc, "field", "") or type(exc).__name__
        print(f"error [{stage}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
