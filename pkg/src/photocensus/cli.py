"""Command-line front end driving every workflow end to end.

State lives in a data directory holding the two journals: ``dataset.pcjl``
(the photo collection) and ``decisions.jsonl`` (the review log). Exit codes:
0 success, 1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import census as census_mod
from .errors import ConfigError, ParseError, PhotoCensusError, ValidationError
from .matching import (
    MatchGraph,
    append_decision,
    cluster_individuals,
    generate_candidates,
    load_decisions,
    replay_decisions,
)
from .records import (
    Dataset,
    OccasionRule,
    assign_occasions,
    collection_stats,
    ingest,
    load_dataset,
    parse_header,
    stats_csv,
    write_dataset,
)
from .simulate import (
    SIM_CSV_HEADER,
    evaluate_estimator,
    load_scenario,
    sim_result_csv_row,
    sim_result_to_dict,
)

DATASET_FILE = "dataset.pcjl"
DECISIONS_FILE = "decisions.jsonl"


@dataclass
class CliConfig:
    data_dir: Path = Path("data")
    threshold: float = 0.8
    estimator: str = census_mod.CHAPMAN
    seed: int | None = None


class _UsageExit(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # unknown flags are a user error: usage text, exit 1 (not argparse's 2)
    def error(self, message):
        raise _UsageExit(f"{self.format_usage()}{self.prog}: error: {message}")


def _load_config(path: str | None) -> CliConfig:
    config = CliConfig()
    if path is None:
        return config
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if "data_dir" in raw:
        config.data_dir = Path(raw["data_dir"])
    if "threshold" in raw:
        config.threshold = float(raw["threshold"])
        if not -1.0 <= config.threshold <= 1.0:
            raise ConfigError("threshold must lie in [-1, 1]")
    if "estimator" in raw:
        config.estimator = raw["estimator"]
    if "seed" in raw:
        config.seed = int(raw["seed"])
    return config


def _dataset_paths(config: CliConfig) -> tuple[Path, Path]:
    return config.data_dir / DATASET_FILE, config.data_dir / DECISIONS_FILE


def _load_state(config: CliConfig) -> tuple[Dataset, MatchGraph]:
    dataset_path, decisions_path = _dataset_paths(config)
    if dataset_path.exists():
        dataset, _ = load_dataset(dataset_path)
    else:
        dataset = Dataset()
    graph = MatchGraph(a.annotation_id for a in dataset.annotations())
    replay_decisions(graph, load_decisions(decisions_path))
    return dataset, graph


def _emit(args, payload: dict, text_lines: list[str]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload))
    else:
        for line in text_lines:
            print(line)


def _cmd_ingest(args, config: CliConfig) -> int:
    source = Path(args.file)
    lines = [ln for ln in source.read_text(encoding="utf-8").splitlines() if ln.strip()]
    dataset_path, _ = _dataset_paths(config)
    if dataset_path.exists():
        dataset, _ = load_dataset(dataset_path)
    else:
        dataset = Dataset() if not lines else Dataset(embedding_dim=parse_header(lines[0]))
    body = lines[1:] if lines else []
    if lines and dataset.embedding_dim != parse_header(lines[0]):
        raise ConfigError(
            f"embedding_dim mismatch: dataset has {dataset.embedding_dim}, "
            f"file declares {parse_header(lines[0])}"
        )
    report = ingest(dataset, body)
    config.data_dir.mkdir(parents=True, exist_ok=True)
    write_dataset(dataset, dataset_path)
    payload = {
        "accepted": report.accepted,
        "duplicates_skipped": report.duplicates_skipped,
        "rejected": report.rejected,
    }
    _emit(args, payload, [f"{k} {v}" for k, v in payload.items()])
    return 0


def _cmd_stats(args, config: CliConfig) -> int:
    dataset, _ = _load_state(config)
    stats = collection_stats(dataset)
    payload = {
        "cars": stats.cars,
        "cameras": stats.cameras,
        "photographs": stats.photographs,
        "annotations": stats.annotations,
        "per_species": stats.per_species,
    }
    lines = [f"{k} {payload[k]}" for k in ("cars", "cameras", "photographs", "annotations")]
    lines += [f"species {name} {count}" for name, count in sorted(stats.per_species.items())]
    _emit(args, payload, lines)
    return 0


def _cmd_candidates(args, config: CliConfig) -> int:
    dataset, _ = _load_state(config)
    threshold = args.threshold if args.threshold is not None else config.threshold
    candidates = generate_candidates(dataset.annotations(), threshold=threshold, top_k=args.top_k)
    payload = {
        "candidates": [
            {"a": c.a, "b": c.b, "score": c.score, "species": c.species} for c in candidates
        ]
    }
    _emit(args, payload, [f"{c.a} {c.b} {c.score:.4f}" for c in candidates])
    return 0


def _cmd_review(args, config: CliConfig) -> int:
    dataset, graph = _load_state(config)
    edges = load_decisions(args.decisions)
    _, decisions_path = _dataset_paths(config)
    config.data_dir.mkdir(parents=True, exist_ok=True)
    for edge in edges:
        graph.apply_decision((edge.a, edge.b), edge.verdict, edge.decided_by, edge.decided_at)
        append_decision(decisions_path, edge)
    payload = {"applied": len(edges)}
    _emit(args, payload, [f"applied {len(edges)}"])
    return 0


def _build_report(dataset, graph, species, occasion_pair, estimator):
    partition = cluster_individuals(graph)
    occasions = assign_occasions(dataset, OccasionRule())
    return census_mod.census_report(
        dataset, partition, occasions, occasion_pair, species=species, estimator=estimator
    )


def _parse_occasions(raw: str) -> tuple[int, int]:
    try:
        first, second = (int(x) for x in raw.split(","))
    except ValueError:
        raise ConfigError(f"--occasions expects 'i,j', got {raw!r}") from None
    return first, second


def _cmd_census(args, config: CliConfig) -> int:
    dataset, graph = _load_state(config)
    estimator = args.estimator or config.estimator
    report = _build_report(dataset, graph, args.species, _parse_occasions(args.occasions), estimator)
    payload = census_mod.report_to_dict(report)
    est = report.estimate
    lines = [
        f"species {report.species}",
        f"annotations {report.annotations}",
        f"individuals {report.individuals}",
        f"estimator {est.estimator}",
        f"n {est.input.n}",
        f"K {est.input.K}",
        f"k {est.input.k}",
        f"n_est {est.n_est:.4f}",
    ]
    if est.variance is not None:
        lines.append(f"var {est.variance:.4f}")
    if est.ci95 is not None:
        lines.append(f"ci95 {est.ci95[0]:.4f} {est.ci95[1]:.4f}")
    _emit(args, payload, lines)
    return 0


def _cmd_simulate(args, config: CliConfig) -> int:
    scenario = load_scenario(args.scenario)
    seed = args.seed if args.seed is not None else config.seed
    if seed is None:
        seed = 0
        print("seed 0", file=sys.stderr)
    runs = args.runs if args.runs is not None else scenario.runs
    population = scenario.build_population(fallback_seed=seed)
    result = evaluate_estimator(
        population,
        scenario.process,
        scenario.layers,
        estimator=scenario.estimator,
        runs=runs,
        seed=seed,
        clustering=scenario.clustering,
        match_threshold=config.threshold,
    )
    payload = dict(sim_result_to_dict(result), seed=seed, true_n=population.true_n)
    if args.csv:
        path = Path(args.csv)
        is_new = not path.exists()
        with open(path, "a", encoding="utf-8") as fh:
            if is_new:
                fh.write(SIM_CSV_HEADER + "\n")
            fh.write(sim_result_csv_row(result) + "\n")
    print(json.dumps(payload))
    return 0


def _cmd_feasibility(args, config: CliConfig) -> int:
    triples = census_mod.feasibility_search(args.individuals, args.estimate, args.tol)
    if getattr(args, "json", False):
        print(json.dumps({"triples": [list(t) for t in triples]}))
    else:
        for n, big_k, k in triples:
            print(f"{n},{big_k},{k}")
    return 0


def _cmd_serve(args, config: CliConfig) -> int:
    import uvicorn

    from .server import create_app, load_policies, load_token_table

    tokens = load_token_table(args.tokens) if args.tokens else None
    policies = load_policies(args.policies) if args.policies else None
    app = create_app(
        data_dir=config.data_dir,
        tokens=tokens,
        policies=policies,
        threshold=config.threshold,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _cmd_report(args, config: CliConfig) -> int:
    dataset, graph = _load_state(config)
    estimator = args.estimator or config.estimator
    occasion_pair = _parse_occasions(args.occasions)
    out_dir = Path(args.out_dir) if args.out_dir else config.data_dir / "reports"
    out_dir.mkdir(parents=True, exist_ok=True)

    stats = collection_stats(dataset)
    collection_path = out_dir / "collection.csv"
    collection_path.write_text(stats_csv(stats), encoding="utf-8")

    reports = []
    for species in sorted(stats.per_species):
        try:
            reports.append(_build_report(dataset, graph, species, occasion_pair, estimator))
        except PhotoCensusError:
            # k = 0 leaves Lincoln-Petersen undefined; Chapman always exists
            reports.append(
                _build_report(dataset, graph, species, occasion_pair, census_mod.CHAPMAN)
            )
    census_path = out_dir / "census.csv"
    census_path.write_text(census_mod.census_csv(reports), encoding="utf-8")

    payload = {"collection_csv": str(collection_path), "census_csv": str(census_path)}
    _emit(args, payload, [f"wrote {collection_path}", f"wrote {census_path}"])
    return 0


def build_parser() -> _Parser:
    # the common flags ride on both the root parser and every subparser; a
    # SUPPRESS default keeps the subparser pass from clobbering values given
    # before the subcommand with its own defaults
    common = _Parser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="path to a JSON config file")
    common.add_argument("--data-dir", default=argparse.SUPPRESS, help="override the data directory")
    common.add_argument(
        "--json", action="store_true", default=argparse.SUPPRESS, help="machine-readable output"
    )

    parser = _Parser(prog="photocensus", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common], help="ingest a .pcjl record file")
    p.add_argument("file")
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("stats", parents=[common], help="collection statistics")
    p.set_defaults(fn=_cmd_stats)

    p = sub.add_parser("candidates", parents=[common], help="list match candidates")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--top-k", type=int, default=5)
    p.set_defaults(fn=_cmd_candidates)

    p = sub.add_parser("review", parents=[common], help="apply a batch of verdicts")
    p.add_argument("--decisions", required=True, help="decision-log JSONL file")
    p.set_defaults(fn=_cmd_review)

    p = sub.add_parser("census", parents=[common], help="population estimate for a species")
    p.add_argument("--species", required=True)
    p.add_argument("--occasions", default="0,1")
    p.add_argument("--estimator", choices=[census_mod.LINCOLN_PETERSEN, census_mod.CHAPMAN])
    p.set_defaults(fn=_cmd_census)

    p = sub.add_parser("simulate", parents=[common], help="run a simulation scenario")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--csv", help="append the result as a CSV row to this file")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("feasibility", parents=[common], help="search (n, K, k) for published figures")
    p.add_argument("--individuals", type=int, required=True)
    p.add_argument("--estimate", type=float, required=True)
    p.add_argument("--tol", type=float, default=1.0)
    p.set_defaults(fn=_cmd_feasibility)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--tokens", help="token table JSON file")
    p.add_argument("--policies", help="sensitive-policy JSON file")
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("report", parents=[common], help="emit collection and census CSVs")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--occasions", default="0,1")
    p.add_argument("--estimator", choices=[census_mod.LINCOLN_PETERSEN, census_mod.CHAPMAN])
    p.set_defaults(fn=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            return 1
        config = _load_config(getattr(args, "config", None))
        data_dir = getattr(args, "data_dir", None)
        if data_dir:
            config.data_dir = Path(data_dir)
        return args.fn(args, config)
    except _UsageExit as exc:
        print(exc, file=sys.stderr)
        return 1
    except (PhotoCensusError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort guard for exit code 2
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
