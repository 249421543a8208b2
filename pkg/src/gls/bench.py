"""Benchmark protocol: seeded environments, prior training, configuration
sweeps, medians and rank tables, all with deterministic output."""
from __future__ import annotations

import csv
import io
import itertools
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from statistics import median
from typing import Iterable, Sequence

from .engine import CostModel, RunResult, cost_total, gls_run, verify_certificate
from .graph import DEFAULT_GAMMA, Graph, halton_rgg, load_graph, save_graph
from .toggles import make_event, make_selector
from .world import (
    World,
    WorldFormatError,
    estimate_priors,
    generate_world,
    load_priors,
    load_world,
    save_priors,
    save_world,
)

CSV_FIELDS = (
    "env", "seed", "event", "selector", "alpha", "delta", "edges_evaluated",
    "vertex_rewires", "cost_total", "path_cost", "feasible", "wall_ms",
)
PARETO_FIELDS = ("delta", "median_evals", "median_rewires", "median_cost")
SCALING_FIELDS = ("env", "n", "density", "event", "selector", "median_evals",
                  "median_rewires", "median_cost", "feasible_runs")

MASK64 = (1 << 64) - 1
TRAIN, TEST = 1, 2
WORLD_SUFFIX = ".world"
_WORLD_NAME = re.compile(r"^(?P<split>[a-z]+)-(?P<index>\d+)-(?P<env>[a-z]+)-(?P<seed>\d+)\.world$")


# ---------------------------------------------------------------------------
# seeds


def splitmix64(x: int) -> int:
    """One step of the splitmix64 generator (Steele, Lea, Flood 2014)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base: int, *labels: int) -> int:
    """Fold integer labels into ``base``; the result is a 63-bit seed."""
    x = splitmix64(base & MASK64)
    for lab in labels:
        x = splitmix64(x ^ (lab & MASK64))
    return x >> 1


def world_seeds(base: int, split: int, count: int) -> list[int]:
    return [derive_seed(base, split, i) for i in range(count)]


# ---------------------------------------------------------------------------
# configurations


@dataclass(frozen=True)
class RunConfig:
    event: str
    selector: str
    alpha: int = 1
    delta: float = 0.01

    def __post_init__(self):
        make_event(self.event, self.alpha, self.delta)  # validates the tags and parameters
        make_selector(self.selector)

    @property
    def label(self) -> str:
        if self.event == "cd":
            return f"cd({self.alpha})+{self.selector}"
        if self.event == "se":
            return f"se({self.delta:g})+{self.selector}"
        return f"{self.event}+{self.selector}"

    def build(self):
        return make_event(self.event, self.alpha, self.delta), make_selector(self.selector)


def config_grid(events: Iterable[str], selectors: Iterable[str], alpha: int = 1,
                delta: float = 0.01) -> list[RunConfig]:
    return [RunConfig(e, s, alpha, delta) for e, s in itertools.product(events, selectors)]


@dataclass(frozen=True)
class WorldCase:
    env: str
    seed: int
    world: World


@dataclass(frozen=True)
class BenchRow:
    env: str
    seed: int
    event: str
    selector: str
    alpha: int | None
    delta: float | None
    edges_evaluated: int
    vertex_rewires: int
    cost_total: float
    path_cost: float
    feasible: bool
    wall_ms: float

    def as_csv(self) -> list[str]:
        return [
            self.env,
            str(self.seed),
            self.event,
            self.selector,
            "" if self.alpha is None else str(self.alpha),
            "" if self.delta is None else format(self.delta, ".17g"),
            str(self.edges_evaluated),
            str(self.vertex_rewires),
            format(self.cost_total, ".12g"),
            format(self.path_cost, ".17g") if self.feasible else "",
            "1" if self.feasible else "0",
            format(self.wall_ms, ".3f"),
        ]


def make_row(case: WorldCase, cfg: RunConfig, result: RunResult, cost: CostModel) -> BenchRow:
    return BenchRow(
        env=case.env,
        seed=case.seed,
        event=cfg.event,
        selector=cfg.selector,
        alpha=cfg.alpha if cfg.event == "cd" else None,
        delta=cfg.delta if cfg.event == "se" else None,
        edges_evaluated=result.num_evaluated,
        vertex_rewires=result.num_rewires,
        cost_total=cost_total(result, cost),
        path_cost=result.path_cost,
        feasible=result.feasible,
        wall_ms=result.wall_time * 1e3,
    )


# ---------------------------------------------------------------------------
# running


class CertificateError(AssertionError):
    pass


def run_case(graph: Graph, case: WorldCase, cfg: RunConfig, cost: CostModel,
             source: int = 0, target: int = 1, heuristic=None, check: bool = True) -> BenchRow:
    event, selector = cfg.build()
    result = gls_run(graph, case.world, source, target, event, selector, heuristic)
    if check and result.feasible and not verify_certificate(graph, result):
        raise CertificateError(f"{cfg.label} on {case.env}/{case.seed} returned an uncertified path")
    return make_row(case, cfg, result, cost)


_WORKER: dict = {}


def _init_worker(graph, cases, cost, source, target, heuristic):
    _WORKER.update(graph=graph, cases=cases, cost=cost, source=source, target=target, heuristic=heuristic)


def _work(job):
    ci, cfg = job
    w = _WORKER
    return run_case(w["graph"], w["cases"][ci], cfg, w["cost"], w["source"], w["target"], w["heuristic"])


def run_bench(graph: Graph, cases: Sequence[WorldCase], configs: Sequence[RunConfig],
              cost: CostModel | None = None, *, source: int = 0, target: int = 1,
              heuristic=None, jobs: int = 1) -> list[BenchRow]:
    """Every configuration on every world; rows ordered by (configuration, world)."""
    cost = cost or CostModel()
    jobs_list = [(ci, cfg) for cfg in configs for ci in range(len(cases))]
    if jobs <= 1 or len(jobs_list) <= 1:
        return [run_case(graph, cases[ci], cfg, cost, source, target, heuristic) for ci, cfg in jobs_list]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                             initargs=(graph, list(cases), cost, source, target, heuristic)) as pool:
        # map preserves submission order, so completion order cannot leak into the output
        return list(pool.map(_work, jobs_list, chunksize=max(1, len(jobs_list) // (4 * jobs))))


def write_rows(rows: Sequence[BenchRow], stream, *, include_wall: bool = True) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    fields = CSV_FIELDS if include_wall else CSV_FIELDS[:-1]
    writer.writerow(fields)
    for r in rows:
        cells = r.as_csv()
        writer.writerow(cells if include_wall else cells[:-1])


def rows_to_csv(rows: Sequence[BenchRow], *, include_wall: bool = True) -> str:
    buf = io.StringIO()
    write_rows(rows, buf, include_wall=include_wall)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# summaries


@dataclass(frozen=True)
class Summary:
    label: str
    runs: int
    feasible: int
    median_evals: float
    median_rewires: float
    median_cost: float


def _label(row: BenchRow) -> str:
    return RunConfig(row.event, row.selector, row.alpha or 1,
                     row.delta if row.delta is not None else 0.01).label


def summarize(rows: Sequence[BenchRow]) -> list[Summary]:
    """Per-configuration medians over feasible runs, in first-seen order."""
    groups: dict[str, list[BenchRow]] = {}
    for r in rows:
        groups.setdefault(_label(r), []).append(r)
    out = []
    for label, rs in groups.items():
        ok = [r for r in rs if r.feasible]
        if ok:
            med = (median(r.edges_evaluated for r in ok), median(r.vertex_rewires for r in ok),
                   median(r.cost_total for r in ok))
        else:
            med = (math.nan, math.nan, math.nan)
        out.append(Summary(label, len(rs), len(ok), float(med[0]), float(med[1]), float(med[2])))
    return out


def rank_table(rows: Sequence[BenchRow]) -> tuple[list[str], list[list[float]]]:
    """Percentage of worlds on which each configuration takes each rank.

    Lower cost ranks better; equal costs are ordered by configuration order so
    every world contributes exactly one configuration to each rank.  Worlds
    where any configuration is infeasible are skipped.
    """
    labels: list[str] = []
    per_world: dict[tuple[str, int], dict[str, float]] = {}
    for r in rows:
        lab = _label(r)
        if lab not in labels:
            labels.append(lab)
        per_world.setdefault((r.env, r.seed), {})[lab] = r.cost_total if r.feasible else math.nan
    k = len(labels)
    counts = [[0] * k for _ in labels]
    worlds = 0
    for costs in per_world.values():
        if len(costs) != k or any(math.isnan(c) for c in costs.values()):
            continue
        worlds += 1
        order = sorted(range(k), key=lambda i: (costs[labels[i]], i))
        for rank, i in enumerate(order):
            counts[i][rank] += 1
    if worlds == 0:
        return labels, [[0.0] * k for _ in labels]
    return labels, [[100.0 * c / worlds for c in row] for row in counts]


def format_summary(rows: Sequence[BenchRow]) -> str:
    lines = []
    summ = summarize(rows)
    width = max([len(s.label) for s in summ] + [13])
    lines.append(f"{'configuration'.ljust(width)}  runs  feasible  med_evals  med_rewires  med_cost_s")
    for s in summ:
        lines.append(f"{s.label.ljust(width)}  {s.runs:4d}  {s.feasible:8d}  {s.median_evals:9.1f}  "
                     f"{s.median_rewires:11.1f}  {s.median_cost:10.6f}")
    infeasible = sum(1 for r in rows if not r.feasible)
    if infeasible:
        lines.append(f"infeasible runs excluded from medians: {infeasible}")
    labels, pct = rank_table(rows)
    if len(labels) > 1:
        lines.append("")
        lines.append("rank frequency (% of worlds)")
        lines.append(" " * width + "  " + "".join(f"{'#' + str(i + 1):>7}" for i in range(len(labels))))
        for lab, row in zip(labels, pct):
            lines.append(lab.ljust(width) + "  " + "".join(f"{p:7.1f}" for p in row))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# environments on disk


def world_filename(split: str, index: int, env: str, seed: int) -> str:
    return f"{split}-{index:04d}-{env}-{seed}{WORLD_SUFFIX}"


META_FILE = "meta.txt"


@dataclass
class Dataset:
    graph: Graph
    train: list[WorldCase] = field(default_factory=list)
    test: list[WorldCase] = field(default_factory=list)
    meta: dict[str, str] = field(default_factory=dict)


def generate_dataset(env: str, n: int, seed: int, n_train: int, n_test: int,
                     gamma: float = DEFAULT_GAMMA, **env_params) -> Dataset:
    if n < 2 or n_train < 0 or n_test < 0:
        raise ValueError("need n >= 2 and nonnegative world counts")
    graph = halton_rgg(n, gamma=gamma)
    meta = {"env": env, "n": str(n), "gamma": repr(float(gamma)), "seed": str(seed),
            "train": str(n_train), "test": str(n_test)}
    meta.update({k: repr(v) for k, v in sorted(env_params.items())})
    ds = Dataset(graph, meta=meta)
    for split, count, bucket in ((TRAIN, n_train, ds.train), (TEST, n_test, ds.test)):
        for s in world_seeds(seed, split, count):
            w = generate_world(env, s, **env_params)
            bucket.append(WorldCase(env, w.seed, w))
    return ds


def write_dataset(ds: Dataset, graph_path: str | os.PathLike, worlds_dir: str | os.PathLike) -> None:
    graph_path = FsPath(graph_path)
    root = FsPath(worlds_dir)
    if graph_path.parent != FsPath(""):
        graph_path.parent.mkdir(parents=True, exist_ok=True)
    graph_path.write_text(save_graph(ds.graph))
    root.mkdir(parents=True, exist_ok=True)
    (root / META_FILE).write_text("".join(f"{k}={v}\n" for k, v in ds.meta.items()))
    for split, cases in (("train", ds.train), ("test", ds.test)):
        d = root / split
        d.mkdir(parents=True, exist_ok=True)
        for i, c in enumerate(cases):
            (d / world_filename(split, i, c.env, c.seed)).write_text(save_world(c.world))


def read_graph(path: str | os.PathLike, priors_path: str | os.PathLike | None = None) -> Graph:
    with open(path) as fh:
        graph = load_graph(fh)
    if priors_path is not None:
        with open(priors_path) as fh:
            model = load_priors(fh)
        if len(model.priors) != graph.num_edges:
            raise WorldFormatError(f"prior file has {len(model.priors)} entries, graph has {graph.num_edges} edges")
        graph = graph.with_priors(model.priors)
    return graph


def read_meta(worlds_dir: str | os.PathLike) -> dict[str, str]:
    """Generation settings (env, n, gamma, seed, ...) stored next to the worlds."""
    out = {}
    for line in (FsPath(worlds_dir) / META_FILE).read_text().splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            out[k] = v
    return out


def read_worlds(directory: str | os.PathLike) -> list[WorldCase]:
    """World files in name order.  ``env`` and ``seed`` come from the file name
    when it follows the generator's pattern; otherwise the index stands in."""
    d = FsPath(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"world directory {d} does not exist")
    files = sorted(p for p in d.iterdir() if p.suffix == WORLD_SUFFIX)
    cases = []
    for i, p in enumerate(files):
        with open(p) as fh:
            world = load_world(fh)
        m = _WORLD_NAME.match(p.name)
        if m:
            cases.append(WorldCase(m["env"], int(m["seed"]), world))
        else:
            cases.append(WorldCase(getattr(world, "env", "explicit"), i, world))
    return cases


def train_priors(graph: Graph, cases: Sequence[WorldCase], beta: float = 1.0):
    return estimate_priors(graph, [c.world for c in cases], beta)


def priors_text(model) -> str:
    return save_priors(model)


# ---------------------------------------------------------------------------
# parameter tuning


def tune(graph: Graph, cases: Sequence[WorldCase], configs: Sequence[RunConfig],
         cost: CostModel | None = None, **kw) -> tuple[RunConfig, list[Summary]]:
    """Configuration with the lowest median cost on ``cases`` (first wins ties)."""
    rows = run_bench(graph, cases, configs, cost, **kw)
    summ = summarize(rows)
    best = min(range(len(configs)), key=lambda i: (math.inf if math.isnan(summ[i].median_cost)
                                                   else summ[i].median_cost, i))
    return configs[best], summ


# ---------------------------------------------------------------------------
# scaling


def _median(xs) -> float:
    return float(median(xs)) if xs else math.nan


@dataclass(frozen=True)
class ScalingPoint:
    env: str
    n: int
    density: float | None
    event: str
    selector: str
    median_evals: float
    median_rewires: float
    median_cost: float
    feasible_runs: int
    costs: tuple[float, ...] = ()

    def as_csv(self) -> list[str]:
        return [self.env, str(self.n), "" if self.density is None else format(self.density, "g"),
                self.event, self.selector, format(self.median_evals, "g"),
                format(self.median_rewires, "g"), format(self.median_cost, ".12g"),
                str(self.feasible_runs)]


def scaling_sweep(env: str, sizes: Sequence[int], seed: int, n_train: int, n_test: int,
                  configs: Sequence[RunConfig], *, densities: Sequence[float | None] = (None,),
                  gamma: float = DEFAULT_GAMMA, cost: CostModel | None = None,
                  jobs: int = 1) -> list[ScalingPoint]:
    """Median cost per (size, density, configuration).  Each point gets its own
    graph and freshly trained priors; world seeds are shared across points."""
    cost = cost or CostModel()
    points = []
    for n in sizes:
        for dens in densities:
            params = {} if dens is None else {"density": dens}
            ds = generate_dataset(env, n, seed, n_train, n_test, gamma, **params)
            graph = ds.graph.with_priors(train_priors(ds.graph, ds.train).priors) if ds.train else ds.graph
            rows = run_bench(graph, ds.test, configs, cost, jobs=jobs)
            k = len(ds.test)
            for i, cfg in enumerate(configs):
                mine = rows[i * k:(i + 1) * k]
                ok = [r for r in mine if r.feasible]
                points.append(ScalingPoint(
                    env, n, dens, cfg.event, cfg.selector,
                    _median([r.edges_evaluated for r in ok]), _median([r.vertex_rewires for r in ok]),
                    _median([r.cost_total for r in ok]), len(ok), tuple(r.cost_total for r in mine)))
    return points
