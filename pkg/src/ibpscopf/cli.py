"""Command-line entry point: ``ibpscopf {bound,verify,ptdf,gen,bench}``.

Exit codes: 0 success, 1 input error, 2 islanding contingency (or usage
error), 3 certified infeasibility, 4 soundness violation found by ``verify``.
"""
from __future__ import annotations

import argparse
import contextlib
import io
import json
import logging
import sys
import time

import numpy as np

from .bound_engine import build_pipeline, compute_bounds, gap
from .contingency_ops import non_islanding_lines
from .errors import IslandingError, NonpositiveReferenceError, ScopfError
from .grid_model import load_case, serialize
from .network_matrices import build_ptdf
from .oracle import MAX_GRID_DIMS, grid_search_max, random_case, sample_soundness

EXIT_OK, EXIT_INPUT, EXIT_ISLANDING, EXIT_INFEASIBLE, EXIT_VIOLATION = 0, 1, 2, 3, 4

log = logging.getLogger("ibpscopf")


def _positive_int(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {val}")
    return val


def _add_global(parser, suppress):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--threads", type=int, default=default(0),
                        help="BLAS threads (0 = library default)")
    parser.add_argument("--skip-islanding", action="store_true", default=default(False),
                        help="drop contingencies that island the network instead of failing")
    parser.add_argument("--strict-cascade", action="store_true", default=default(False),
                        help="bound curves node by node through the ReLU cascade")
    parser.add_argument("--output", default=default(None), help="write output here instead of stdout")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ibpscopf", description=__doc__.splitlines()[0])
    _add_global(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="certified objective bounds for a case file")
    p.add_argument("case")
    _add_global(p, suppress=True)

    p = sub.add_parser("verify", help="sample soundness and grid-search gap check")
    p.add_argument("case")
    p.add_argument("--samples", type=_positive_int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=_positive_int, default=50,
                   help="grid points per input dimension for the oracle maximum")
    p.add_argument("--self-test", action="store_true",
                   help="lower the certified upper bound by 1 to check the sampler catches it")
    _add_global(p, suppress=True)

    p = sub.add_parser("ptdf", help="dump the full PTDF matrix as CSV")
    p.add_argument("case")
    _add_global(p, suppress=True)

    p = sub.add_parser("gen", help="write a random connected case")
    p.add_argument("--buses", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--density", type=float, default=1.5)
    _add_global(p, suppress=True)

    p = sub.add_parser("bench", help="time bound computations on a random case")
    p.add_argument("--buses", type=int, required=True)
    p.add_argument("--ctg", type=int, default=None, help="number of contingencies (default: all)")
    p.add_argument("--repeat", type=_positive_int, default=5)
    p.add_argument("--seed", type=int, default=0)
    _add_global(p, suppress=True)
    return parser


def _emit(text: str, path) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2)


def cmd_bound(args) -> int:
    case = load_case(args.case)
    graph = build_pipeline(case, skip_islanding=args.skip_islanding,
                           strict_cascade=args.strict_cascade)
    report = compute_bounds(graph)
    out = report.to_json()
    out["skip_islanding"] = args.skip_islanding
    _emit(_dump(out), args.output)
    return EXIT_INFEASIBLE if report.infeasible_certificate else EXIT_OK


def cmd_verify(args) -> int:
    case = load_case(args.case)
    graph = build_pipeline(case, skip_islanding=args.skip_islanding,
                           strict_cascade=args.strict_cascade)
    report = compute_bounds(graph)
    checked = report
    if args.self_test:
        from dataclasses import replace

        checked = replace(report, objective_upper=report.objective_upper - 1.0)
    violations = sample_soundness(case, graph, args.samples, args.seed, report=checked)

    out = {
        "case": case.name, "samples": args.samples, "seed": args.seed,
        "self_test": args.self_test, "lower": report.objective_lower,
        "upper": report.objective_upper, "checked_upper": checked.objective_upper,
        "violations": violations, "oracle_max": None, "oracle_argmax": None,
        "gap_vs_oracle": None, "skip_islanding": args.skip_islanding,
    }
    if case.n_inputs <= MAX_GRID_DIMS:
        ctg = [c for c in case.contingencies if c not in graph.skipped_contingencies]
        best, (pg, pd) = grid_search_max(case, args.resolution, ctg)
        out["oracle_max"] = best
        out["oracle_argmax"] = {"p_g": pg.tolist(), "p_d": pd.tolist()}
        out["oracle_resolution"] = args.resolution
        with contextlib.suppress(NonpositiveReferenceError):
            out["gap_vs_oracle"] = gap(report, best)
    _emit(_dump(out), args.output)
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_ptdf(args) -> int:
    nm = build_ptdf(load_case(args.case))
    buf = io.StringIO()
    np.savetxt(buf, nm.Phi, fmt="%.17g", delimiter=",")
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.buses < 2:
        raise ScopfError("--buses must be >= 2")
    _emit(serialize(random_case(args.buses, args.density, args.seed)), args.output)
    return EXIT_OK


def bench_case(n_buses: int, n_ctg: int | None, seed: int):
    case = random_case(n_buses, 1.5, seed, name=f"bench_{n_buses}_{seed}")
    if n_ctg is not None:
        case = case.replace(contingencies=tuple(non_islanding_lines(case)[:n_ctg]))
    return case


def cmd_bench(args) -> int:
    case = bench_case(args.buses, args.ctg, args.seed)
    t0 = time.perf_counter()
    graph = build_pipeline(case, strict_cascade=args.strict_cascade)
    build = time.perf_counter() - t0
    samples = []
    for _ in range(args.repeat):
        t = time.perf_counter()
        compute_bounds(graph)
        samples.append(time.perf_counter() - t)
    out = {
        "buses": case.n_buses, "lines": case.n_lines, "contingencies": len(case.contingencies),
        "seed": args.seed, "repeat": args.repeat, "build_time_s": build,
        "samples_s": samples, "min_s": min(samples), "mean_s": float(np.mean(samples)),
        "max_s": max(samples),
    }
    _emit(_dump(out), args.output)
    return EXIT_OK


COMMANDS = {"bound": cmd_bound, "verify": cmd_verify, "ptdf": cmd_ptdf,
            "gen": cmd_gen, "bench": cmd_bench}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = make_parser().parse_args(argv)
    limiter = contextlib.nullcontext()
    if args.threads > 0:
        from threadpoolctl import threadpool_limits

        limiter = threadpool_limits(limits=args.threads)
    try:
        with limiter:
            return COMMANDS[args.command](args)
    except IslandingError as exc:
        print(f"error: {exc} (use --skip-islanding to drop it)", file=sys.stderr)
        return EXIT_ISLANDING
    except (ScopfError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
