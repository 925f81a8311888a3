"""Command line front end.

Exit codes: 0 success, 2 malformed input (flags, query, or catalog), 3 query
matched nothing or selected nothing evaluable, 4 no dataset satisfied the data
clause, 5 the data clause was ambiguous.
"""

from __future__ import annotations

import argparse
import json
import sys

from .datasets import DatasetError, generate_dataset, save_dataset_file
from .engine import bench_messages, run_query
from .hierarchy import (
    AmbiguousDataError,
    HierarchyError,
    NoDataError,
    build_hierarchy,
    load_catalog_file,
)
from .learners import LearnerError
from .oracle import run_query_centralized
from .params import ParamError, SimilarityConstants
from .query import QueryFormatError, parse_query_file

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_NO_MATCH = 3
EXIT_NO_DATA = 4
EXIT_AMBIGUOUS_DATA = 5

_PARSE_ERRORS = (QueryFormatError, HierarchyError, ParamError, DatasetError, LearnerError)


def _add_common_query_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--catalog", required=True, help="catalog JSON file")
    sub.add_argument("--query", required=True, help="query JSON file")
    sub.add_argument("--seed", type=int, default=0, help="global seed (default 0)")
    sub.add_argument("--beta", type=float, default=0.1, help="mismatch weight (default 0.1)")
    sub.add_argument("--alpha", type=float, default=0.6, help="wildcard weight (default 0.6)")
    sub.add_argument("--tau", type=float, default=0.8, help="tune-marker weight (default 0.8)")
    sub.add_argument(
        "--folds",
        type=int,
        default=5,
        help="cross-validation folds when the query does not fix them (default 5)",
    )
    sub.add_argument("--budget", type=int, default=64, help="tuning budget (default 64)")
    sub.add_argument("--report", help="write the full JSON report to this file")
    sub.add_argument("--dot", help="write the hierarchy in DOT format to this file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlhive",
        description="match, tune, and select ML configurations via an agent hierarchy",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    q = subs.add_parser("query", help="run a query through the message-passing engine")
    _add_common_query_flags(q)
    q.add_argument("--trace", help="write the message trace as JSON lines to this file")

    o = subs.add_parser("oracle", help="run a query through the centralized replay")
    _add_common_query_flags(o)

    d = subs.add_parser("dot", help="render a catalog's hierarchy in DOT format")
    d.add_argument("--catalog", required=True, help="catalog JSON file")
    d.add_argument("--out", help="output file (default: stdout)")

    b = subs.add_parser("bench-messages", help="message totals on worst-case hierarchies")
    b.add_argument(
        "--sizes", default="15,31,63,127", help="comma-separated agent counts (default 15,31,63,127)"
    )
    b.add_argument("--budget", type=int, default=8, help="tuning budget per run (default 8)")
    b.add_argument("--seed", type=int, default=0, help="global seed (default 0)")
    b.add_argument("--json", dest="json_out", help="also write results as JSON to this file")

    g = subs.add_parser("gen-data", help="generate a synthetic dataset file")
    g.add_argument("--kind", required=True, choices=["blobs", "moons", "linreg", "quad"])
    g.add_argument("--n", type=int, required=True, help="number of samples")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--noise", type=float, default=0.5)
    g.add_argument("--centers", type=int, default=2, help="blob count (blobs only)")
    g.add_argument("--dims", type=int, default=3, help="feature count (linreg only)")
    g.add_argument("--task", help="override the default task label for the kind")
    g.add_argument("--name", help="dataset name (default: the kind)")
    g.add_argument("--out", required=True, help="output dataset JSON file")

    return parser


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _print_report(report: dict) -> None:
    ds = report["dataset"]
    print(f"outcome: {report['outcome']}")
    print(f"engine: {report['engine']}")
    print(f"dataset: {ds['name']} ({ds['task']}, n={ds['n']}, d={ds['d']})")
    print(f"messages: {report['message_stats']['total']}")
    for i, sub in enumerate(report["sub_queries"]):
        line = f"  [{i}] {sub['name']}: {sub['status']}"
        if sub["status"] != "unmatched":
            line += f" score={sub['score']:.6g}"
        if sub["manager"]:
            line += f" manager={sub['manager']}"
        if sub["best"]:
            best = sub["best"]
            params = ",".join(f"{k}={v}" for k, v in sorted(best["params"].items()))
            line += f" best={best['family']}({params}) loss={best['loss']:.6g}"
        print(line)
    winner = report["winner"]
    if winner is None:
        print("winner: none")
    else:
        params = ",".join(f"{k}={v}" for k, v in sorted(winner["params"].items()))
        print(f"winner: {winner['family']}({params}) loss={winner['loss']:.6g}")


def _run_query_command(args: argparse.Namespace, centralized: bool) -> int:
    constants = SimilarityConstants(beta=args.beta, alpha=args.alpha, tau=args.tau)
    hierarchy = build_hierarchy(load_catalog_file(args.catalog))
    query = parse_query_file(args.query)
    trace_path = getattr(args, "trace", None)
    try:
        if centralized:
            report = run_query_centralized(
                hierarchy,
                query,
                global_seed=args.seed,
                constants=constants,
                budget=args.budget,
                folds_default=args.folds,
            )
        else:
            report = run_query(
                hierarchy,
                query,
                global_seed=args.seed,
                constants=constants,
                budget=args.budget,
                folds_default=args.folds,
                keep_trace=trace_path is not None,
            )
    except NoDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_DATA
    except AmbiguousDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_AMBIGUOUS_DATA
    if trace_path is not None:
        trace = report.pop("trace", [])
        _write_text(trace_path, "".join(json.dumps(entry) + "\n" for entry in trace))
    if args.report:
        _write_text(args.report, json.dumps(report, indent=2, sort_keys=True) + "\n")
    if args.dot:
        _write_text(args.dot, report["structure_dot"])
    _print_report(report)
    return EXIT_OK if report["outcome"] == "ok" else EXIT_NO_MATCH


def _run_dot(args: argparse.Namespace) -> int:
    hierarchy = build_hierarchy(load_catalog_file(args.catalog))
    text = hierarchy.to_dot()
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _run_bench(args: argparse.Namespace) -> int:
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        print(f"error: bad --sizes value {args.sizes!r}", file=sys.stderr)
        return EXIT_PARSE
    results = bench_messages(sizes, budget=args.budget, global_seed=args.seed)
    print(f"{'agents':>8} {'messages':>10} {'bound(4x)':>10} {'ratio':>8}")
    for row in results:
        ratio = "-" if row["ratio_to_previous"] is None else f"{row['ratio_to_previous']:.3f}"
        print(f"{row['agents']:>8} {row['messages']:>10} {row['bound']:>10} {ratio:>8}")
    if args.json_out:
        _write_text(args.json_out, json.dumps(results, indent=2) + "\n")
    return EXIT_OK


def _run_gen_data(args: argparse.Namespace) -> int:
    dataset = generate_dataset(
        args.kind,
        n=args.n,
        seed=args.seed,
        noise=args.noise,
        centers=args.centers,
        dims=args.dims,
        task=args.task,
        name=args.name or args.kind,
    )
    save_dataset_file(dataset, args.out)
    print(f"wrote {dataset.name}: task={dataset.task} n={dataset.n} d={dataset.d} -> {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "query":
            return _run_query_command(args, centralized=False)
        if args.command == "oracle":
            return _run_query_command(args, centralized=True)
        if args.command == "dot":
            return _run_dot(args)
        if args.command == "bench-messages":
            return _run_bench(args)
        if args.command == "gen-data":
            return _run_gen_data(args)
    except _PARSE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
