"""``gls-bench`` command line: generate, train, bench, counterexample, scaling, pareto.

Exit codes: 0 success, 1 usage error, 2 I/O or file-format error, 3 internal
assertion (for example a returned path that fails its certificate).
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from typing import Sequence

import numpy as np
from scipy import stats

from . import bench
from .analysis import build_counterexample, critical_delta, pareto_sweep
from .engine import DEFAULT_EVAL_SECONDS, DEFAULT_RATIO, CostModel, gls_run
from .graph import DEFAULT_GAMMA, GraphFormatError
from .toggles import EVENT_TAGS, SELECTOR_TAGS, ConstantDepth, Forward, HeuristicProgress, ShortestPath
from .world import ENVIRONMENTS, WorldFormatError

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _list(kind):
    def parse(text: str):
        try:
            return [kind(x) for x in text.split(",") if x.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _cost(args) -> CostModel:
    return CostModel(args.ceval, args.crwr)


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _shared(p: argparse.ArgumentParser, *names: str) -> None:
    if "graph" in names:
        p.add_argument("--graph", required=True, help="graph file (gls-graph v1)")
    if "priors" in names:
        p.add_argument("--priors", help="prior file from 'train'")
    if "worlds" in names:
        p.add_argument("--worlds", required=True, help="directory of .world files")
    if "seed" in names:
        p.add_argument("--seed", type=_u64, default=0, help="base seed (u64)")
    if "out" in names:
        p.add_argument("--out", help="output file (default: stdout)")
    if "cost" in names:
        p.add_argument("--ceval", type=float, default=DEFAULT_EVAL_SECONDS, help="seconds per edge evaluation")
        p.add_argument("--crwr", type=float, default=DEFAULT_EVAL_SECONDS / DEFAULT_RATIO,
                       help="seconds per vertex rewire")
    if "toggles" in names:
        p.add_argument("--event", type=_list(str), default=["se"],
                       help=f"comma list of {'|'.join(EVENT_TAGS)}")
        p.add_argument("--selector", type=_list(str), default=["ff"],
                       help=f"comma list of {'|'.join(SELECTOR_TAGS)}")
        p.add_argument("--alpha", type=int, default=1, help="ConstantDepth depth")
        p.add_argument("--delta", type=float, default=0.01, help="SubpathExistence threshold")
    if "jobs" in names:
        p.add_argument("--jobs", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gls-bench", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="sample a roadmap plus training and test worlds")
    _shared(p, "graph", "worlds", "seed")
    p.add_argument("--env", choices=ENVIRONMENTS, default="twowall")
    p.add_argument("--n", type=int, default=1000, help="number of vertices")
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA, help="connection radius constant")
    p.add_argument("--train", type=int, default=50, help="training worlds")
    p.add_argument("--test", type=int, default=50, help="test worlds")
    p.add_argument("--density", type=float, help="forest obstacle density")

    p = sub.add_parser("train", help="estimate edge priors from training worlds")
    _shared(p, "graph", "worlds", "out", "cost")
    p.add_argument("--beta", type=float, default=1.0, help="Laplace smoothing pseudo-count")

    p = sub.add_parser("bench", help="run configurations on test worlds")
    _shared(p, "graph", "priors", "worlds", "out", "cost", "toggles", "jobs", "seed")
    p.add_argument("--source", type=int, default=0)
    p.add_argument("--target", type=int, default=1)
    p.add_argument("--heuristic", choices=("euclidean", "graph", "zero"), default="euclidean")
    p.add_argument("--summary", help="write the median and rank summary here instead of stderr")

    p = sub.add_parser("counterexample", help="rewire growth on the two-hub construction")
    p.add_argument("--N", type=_list(int), default=[25], help="chain lengths (comma list)")
    p.add_argument("--l", type=_list(int), default=[4], help="fan sizes, even (comma list)")

    p = sub.add_parser("scaling", help="median cost versus graph size or obstacle density")
    _shared(p, "seed", "out", "cost", "toggles", "jobs")
    p.set_defaults(event=["sp", "se"], selector=["ff"])
    p.add_argument("--env", choices=ENVIRONMENTS, default="twowall")
    p.add_argument("--sizes", type=_list(int), default=[1000])
    p.add_argument("--densities", type=_list(float), help="forest densities (default: environment default)")
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--train", type=int, default=50)
    p.add_argument("--test", type=int, default=10)

    p = sub.add_parser("pareto", help="sweep the SubpathExistence threshold")
    _shared(p, "graph", "priors", "worlds", "out", "cost")
    p.add_argument("--deltas", type=_list(float), default=[0.5, 0.2, 0.1, 0.05, 0.02, 0.01])
    p.add_argument("--selector", choices=SELECTOR_TAGS, default="ff")
    return parser


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    if args.n < 2 or args.train < 0 or args.test < 0:
        raise UsageError("--n must be >= 2 and world counts nonnegative")
    params = {} if args.density is None else {"density": args.density}
    if params and args.env != "forest":
        raise UsageError("--density only applies to --env forest")
    ds = bench.generate_dataset(args.env, args.n, args.seed, args.train, args.test, args.gamma, **params)
    bench.write_dataset(ds, args.graph, args.worlds)
    print(f"graph: {ds.graph.num_vertices} vertices, {ds.graph.num_edges} edges -> {args.graph}")
    print(f"worlds: {len(ds.train)} train, {len(ds.test)} test -> {args.worlds}/{{train,test}}")
    return EXIT_OK


def cmd_train(args) -> int:
    graph = bench.read_graph(args.graph)
    cases = bench.read_worlds(args.worlds)
    if not cases:
        raise FileNotFoundError(f"no .world files in {args.worlds}")
    model = bench.train_priors(graph, cases, args.beta)
    out, close = _open_out(args.out)
    try:
        out.write(bench.priors_text(model))
    finally:
        if close:
            out.close()
    b = max((len(a) for a in graph.out_adj), default=1)
    delta = critical_delta(args.ceval, args.crwr, max(b, 1), model.p_max)
    print(f"p_max {model.p_max:.6f}  max degree {b}  bound-minimizing delta {delta:.6g}",
          file=sys.stderr if not close else sys.stdout)
    return EXIT_OK


def _configs(args) -> list[bench.RunConfig]:
    try:
        return bench.config_grid(args.event, args.selector, args.alpha, args.delta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_bench(args) -> int:
    configs = _configs(args)
    graph = bench.read_graph(args.graph, args.priors)
    for v in (args.source, args.target):
        if not 0 <= v < graph.num_vertices:
            raise UsageError(f"vertex {v} is not in the graph")
    cases = bench.read_worlds(args.worlds)
    if not cases:
        raise FileNotFoundError(f"no .world files in {args.worlds}")
    rows = bench.run_bench(graph, cases, configs, _cost(args), source=args.source, target=args.target,
                           heuristic=args.heuristic, jobs=args.jobs)
    out, close = _open_out(args.out)
    try:
        bench.write_rows(rows, out)
    finally:
        if close:
            out.close()
    text = bench.format_summary(rows) + "\n"
    if args.summary:
        with open(args.summary, "w") as fh:
            fh.write(text)
    else:
        (sys.stdout if close else sys.stderr).write(text)
    return EXIT_OK


def counterexample_grid(Ns: Sequence[int], ls: Sequence[int]) -> list[dict]:
    rows = []
    for N in Ns:
        for l in ls:
            ce = build_counterexample(N, l)
            expected = 3 * N + 2 * l - 1
            if ce.graph.num_edges != expected:
                raise AssertionError(f"edge count {ce.graph.num_edges} != 3N+2l-1 = {expected}")
            sp = gls_run(ce.graph, ce.world, ce.source, ce.target, ShortestPath(), Forward(), "zero")
            hp = gls_run(ce.graph, ce.world, ce.source, ce.target, HeuristicProgress(), Forward(), "graph")
            rows.append({"N": N, "l": l, "edges": ce.graph.num_edges,
                         "rewires_sp": sp.num_rewires, "rewires_hp": hp.num_rewires,
                         "evals_sp": sp.num_evaluated, "evals_hp": hp.num_evaluated})
    return rows


def fit_through_origin(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares ``y = c x``; returns (c, R^2 about the mean of y)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    c = float(x @ y / (x @ x))
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(((y - c * x) ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return c, r2


def cmd_counterexample(args) -> int:
    try:
        rows = counterexample_grid(args.N, args.l)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"{'N':>5} {'l':>4} {'|E|':>6} {'3N+2l-1':>8} {'rewires(sp)':>12} {'rewires(hp)':>12} "
          f"{'evals(sp)':>10} {'evals(hp)':>10}")
    for r in rows:
        print(f"{r['N']:5d} {r['l']:4d} {r['edges']:6d} {3 * r['N'] + 2 * r['l'] - 1:8d} "
              f"{r['rewires_sp']:12d} {r['rewires_hp']:12d} {r['evals_sp']:10d} {r['evals_hp']:10d}")
    nl = np.array([r["N"] * r["l"] for r in rows], float)
    sp = np.array([r["rewires_sp"] for r in rows], float)
    if len(rows) >= 2:
        c, r2 = fit_through_origin(nl, sp)
        print(f"shortest-path rewires ~ {c:.4f} * N * l   (R^2 = {r2:.4f})")
        N = np.log([r["N"] for r in rows])
        L = np.log([r["l"] for r in rows])
        if np.ptp(N) > 0 and np.ptp(L) > 0 and np.all(sp > 0):
            A = np.column_stack([np.ones_like(N), N, L])
            coef = np.linalg.lstsq(A, np.log(sp), rcond=None)[0]
            print(f"growth exponents: N^{coef[1]:.3f} * l^{coef[2]:.3f}")
    print(f"heuristic-progress rewires: max {max(r['rewires_hp'] for r in rows)}")
    return EXIT_OK


def gap_correlation(points: Sequence[bench.ScalingPoint], slow: str = "sp", fast: str = "se"):
    """Spearman correlation between graph size and the per-world cost gap."""
    by = {}
    for p in points:
        by.setdefault((p.n, p.density), {})[p.event] = p
    xs, gaps = [], []
    for (n, _), evs in sorted(by.items(), key=lambda kv: (kv[0][0], kv[0][1] or 0.0)):
        if slow in evs and fast in evs:
            for a, b in zip(evs[slow].costs, evs[fast].costs):
                if math.isfinite(a) and math.isfinite(b):
                    xs.append(n)
                    gaps.append(a - b)
    if len(set(xs)) < 2:
        return None
    res = stats.spearmanr(xs, gaps)
    return float(res.statistic), float(res.pvalue)


def cmd_scaling(args) -> int:
    configs = _configs(args)
    if any(n < 2 for n in args.sizes) or args.test < 1:
        raise UsageError("sizes must be >= 2 and --test >= 1")
    densities = args.densities if args.densities else [None]
    if args.densities and args.env != "forest":
        raise UsageError("--densities only applies to --env forest")
    points = bench.scaling_sweep(args.env, args.sizes, args.seed, args.train, args.test, configs,
                                 densities=densities, gamma=args.gamma, cost=_cost(args), jobs=args.jobs)
    out, close = _open_out(args.out)
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(bench.SCALING_FIELDS)
        for p in points:
            w.writerow(p.as_csv())
    finally:
        if close:
            out.close()
    corr = gap_correlation(points)
    if corr is not None:
        print(f"spearman(n, cost_sp - cost_se) = {corr[0]:.3f}  (p = {corr[1]:.3g})",
              file=sys.stdout if close else sys.stderr)
    return EXIT_OK


def cmd_pareto(args) -> int:
    if not args.deltas or any(not 0 < d <= 1 for d in args.deltas):
        raise UsageError("--deltas must be a nonempty list in (0, 1]")
    graph = bench.read_graph(args.graph, args.priors)
    cases = bench.read_worlds(args.worlds)
    if not cases:
        raise FileNotFoundError(f"no .world files in {args.worlds}")
    points = pareto_sweep(graph, [c.world for c in cases], args.deltas, args.selector, cost=_cost(args))
    out, close = _open_out(args.out)
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(bench.PARETO_FIELDS)
        for p in points:
            w.writerow([format(p.delta, "g"), format(p.median_evals, "g"),
                        format(p.median_rewires, "g"), format(p.median_cost, ".12g")])
    finally:
        if close:
            out.close()
    finite = [p for p in points if math.isfinite(p.median_cost)]
    if finite:
        best = min(finite, key=lambda p: p.median_cost)
        print(f"lowest median cost at delta = {best.delta:g}", file=sys.stdout if close else sys.stderr)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "bench": cmd_bench,
    "counterexample": cmd_counterexample,
    "scaling": cmd_scaling,
    "pareto": cmd_pareto,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if hasattr(args, "ceval") and not (args.ceval > 0 and args.crwr > 0):
        parser.error("--ceval and --crwr must be positive")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"gls-bench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, GraphFormatError, WorldFormatError) as exc:
        print(f"gls-bench: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except AssertionError as exc:
        print(f"gls-bench: internal check failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValueError as exc:
        print(f"gls-bench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
