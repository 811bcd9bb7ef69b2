"""Command-line entry point: ingest, solve, benchmark, report.

Exit codes: 0 success, 1 data or config error, 2 no path, 3 resource budget
exceeded, 64 usage error. Progress and the resolved configuration go to
stderr; data goes to files (and small summaries to stdout).
"""

from __future__ import annotations

import argparse
import sys

from . import bench as bench_mod
from . import ingest as ingest_mod
from .errors import (
    BudgetExceeded,
    ConfigError,
    EmptyReport,
    NoPath,
    RobustSPError,
    SchemaError,
)
from .graph import load_graph, save_graph
from .solvers import solve
from .uncertainty import FAMILIES, build_model

EXIT_OK = 0
EXIT_DATA = 1
EXIT_NO_PATH = 2
EXIT_BUDGET = 3
EXIT_USAGE = 64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 64 on unknown flags / bad usage
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _echo_config(name: str, args: argparse.Namespace) -> None:
    resolved = " ".join(f"{k}={v}" for k, v in sorted(vars(args).items())
                        if k != "func")
    print(f"[{name}] resolved config: {resolved}", file=sys.stderr)


def cmd_ingest(args) -> int:
    _echo_config("ingest", args)
    graph, matrix, _ = ingest_mod.ingest_pipeline(args.observations, args.snap_tolerance)
    save_graph(graph, args.graph_out)
    ingest_mod.write_scenarios(matrix, args.scenarios_out)
    print(f"{graph.node_count} nodes, {graph.arc_count} arcs, "
          f"{matrix.scenario_count} scenarios")
    return EXIT_OK


def cmd_solve(args) -> int:
    _echo_config("solve", args)
    graph = load_graph(args.graph)
    matrix = ingest_mod.read_scenarios(args.scenarios)
    if args.method in ("ph", "sph"):
        if not float(args.param).is_integer():
            raise _UsageError(f"--param must be an integer column index for {args.method}")
        column = int(args.param)
        cap = matrix.scenario_count if args.method == "ph" \
            else matrix.scenario_count // 2 + 1
        if not 1 <= column <= cap:
            raise _UsageError(f"--param {column} out of range [1, {cap}] for "
                              f"{args.method} with {matrix.scenario_count} scenarios")
    model = build_model(args.method, matrix, args.param)
    solution = solve(graph, model, args.source, args.target)
    nodes = solution.path.node_sequence(graph)
    print("path:", "->".join(str(v) for v in nodes))
    print(f"objective: {solution.objective!r}")
    d = solution.diagnostics
    print(f"diagnostics: labels_expanded={d.labels_expanded} "
          f"nodes_branched={d.nodes_branched} subproblems={d.subproblems_solved} "
          f"wall_time_s={d.wall_time_s:.6f}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    _echo_config("benchmark", args)
    with open(args.config, encoding="utf-8") as fh:
        config = bench_mod.ExperimentConfig.from_json(fh.read())
    if args.seed is not None:
        config.seed = args.seed
    graph = load_graph(args.graph)
    matrix = ingest_mod.read_scenarios(args.scenarios)
    print(f"[benchmark] {sum(len(g) for g in config.grids.values())} methods x "
          f"{config.pair_count} pairs, {matrix.scenario_count} evaluation scenarios",
          file=sys.stderr)
    report = bench_mod.run_benchmark(config, graph, matrix, threads=args.threads)
    bench_mod.write_results(report, args.out)
    print(f"[benchmark] {report.record_count()} records, "
          f"{len(report.failed)} failed cells", file=sys.stderr)
    for method_idx, pair_idx, reason in report.failed:
        family, param = report.methods[method_idx]
        print(f"[benchmark] failed cell: method={family} param={param} "
              f"pair={pair_idx}: {reason}", file=sys.stderr)
    return EXIT_OK


def cmd_report(args) -> int:
    _echo_config("report", args)
    report = bench_mod.read_results(args.results)
    report.cvar_fraction = args.cvar_fraction
    rows = bench_mod.aggregate(report)
    bench_mod.write_metrics(rows, args.out)
    print(f"[report] {len(rows)} method rows", file=sys.stderr)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="robustsp",
                     description="Robust shortest paths from multi-scenario travel times")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="observations CSV -> graph JSON + scenario CSV",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--observations", required=True, help="input observation CSV")
    p.add_argument("--snap-tolerance", type=float, default=30.0,
                   help="endpoint snapping tolerance in meters")
    p.add_argument("--graph-out", required=True, help="output graph JSON path")
    p.add_argument("--scenarios-out", required=True, help="output scenario CSV path")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("solve", help="solve one robust shortest path",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--graph", required=True)
    p.add_argument("--scenarios", required=True)
    p.add_argument("--method", required=True, choices=list(FAMILIES))
    p.add_argument("--param", required=True, type=float,
                   help="scale (ch/interval/ellipsoid*), budget (budgeted), "
                        "or 1-based weight column (ph/sph)")
    p.add_argument("--source", required=True, type=int)
    p.add_argument("--target", required=True, type=int)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("benchmark", help="run the full sweep, write results CSV",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--graph", required=True)
    p.add_argument("--scenarios", required=True)
    p.add_argument("--out", required=True, help="output results CSV path")
    p.add_argument("--threads", type=int, default=0,
                   help="worker processes; 0 means machine parallelism")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("report", help="aggregate a results CSV into metrics",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--results", required=True, help="results CSV from 'benchmark'")
    p.add_argument("--out", required=True, help="output metrics CSV path")
    p.add_argument("--cvar-fraction", type=float, default=0.05,
                   help="tail fraction for the per-pair tail mean")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"robustsp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"robustsp {args.command}: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_DATA
    except NoPath as exc:
        print(f"robustsp {args.command}: no path: {exc}", file=sys.stderr)
        return EXIT_NO_PATH
    except BudgetExceeded as exc:
        print(f"robustsp {args.command}: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (SchemaError, ConfigError, EmptyReport) as exc:
        print(f"robustsp {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RobustSPError as exc:
        print(f"robustsp {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
