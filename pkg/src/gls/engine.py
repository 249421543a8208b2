"""The search loop, its cost model, an exhaustive-evaluation oracle and a
certificate checker for returned paths."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .graph import Graph, Path
from .lazy_tree import INVALID, VALID, LazyTree, RewireLog, resolve_heuristic
from .toggles import Event, Selector

TOL = 1e-9

DEFAULT_EVAL_SECONDS = 3.35e-4
DEFAULT_RATIO = 29.04


@dataclass(frozen=True)
class CostModel:
    """Planning time modelled as ``c_eval * evaluations + c_rwr * rewires``."""

    c_eval: float = DEFAULT_EVAL_SECONDS
    c_rwr: float = DEFAULT_EVAL_SECONDS / DEFAULT_RATIO

    def __post_init__(self):
        if not (self.c_eval > 0 and self.c_rwr > 0):
            raise ValueError("cost coefficients must be positive")

    @property
    def ratio(self) -> float:
        return self.c_eval / self.c_rwr

    @classmethod
    def measured(cls) -> "CostModel":
        """Separately measured per-operation timings (ratio about 30.5)."""
        return cls(3.35e-4, 1.1e-5)

    def __call__(self, evaluations: int, rewires: int) -> float:
        return self.c_eval * evaluations + self.c_rwr * rewires


@dataclass
class RunResult:
    source: int
    target: int
    path: Path | None
    evaluated: dict[int, bool] = field(default_factory=dict)  # insertion order = evaluation order
    rewires: RewireLog = field(default_factory=RewireLog)
    iterations: int = 0
    wall_time: float = 0.0
    expansions: int = 0

    @property
    def feasible(self) -> bool:
        return self.path is not None

    @property
    def num_evaluated(self) -> int:
        return len(self.evaluated)

    @property
    def num_rewires(self) -> int:
        return self.rewires.total

    @property
    def evaluation_order(self) -> list[int]:
        return list(self.evaluated)

    @property
    def path_cost(self) -> float:
        return self.path.weight if self.path is not None else float("inf")


def gls_run(
    graph: Graph,
    world,
    source: int,
    target: int,
    event: Event,
    selector: Selector,
    heuristic=None,
    *,
    trace: Callable[[dict], None] | None = None,
) -> RunResult:
    """Run lazy search from ``source`` to ``target``.

    ``heuristic`` is a per-vertex sequence or one of ``"euclidean"`` (default),
    ``"graph"`` and ``"zero"``.  ``trace``, if given, receives one dict per
    evaluation with the leaf, its subpath, the chosen edge and its outcome.
    """
    t0 = time.perf_counter()
    if not 0 <= target < graph.num_vertices:
        raise ValueError(f"target {target} is not a vertex")
    h = resolve_heuristic(graph, target, heuristic)
    event.reset()
    selector.reset()
    tree = LazyTree(graph, source, h)
    status = tree.status
    priors = graph.prior_list
    evaluated: dict[int, bool] = {}
    iterations = 0
    path = None

    while True:
        leaf = tree.extend(event, target)
        if leaf is None:
            break
        sub = tree.shortest_subpath(leaf)
        if leaf == target and all(status[e] == VALID for e in sub.edges):
            path = sub
            break
        eid = selector.select(sub, status, priors)
        child = sub.vertices[sub.edges.index(eid) + 1]
        ok = bool(world.evaluate(graph, eid))
        evaluated[eid] = ok
        tree.apply_evaluation(eid, ok)
        event.notify_evaluated(tree, eid, child, ok)
        iterations += 1
        if trace is not None:
            trace({
                "iteration": iterations,
                "leaf": leaf,
                "leaf_f": sub.weight + h[leaf],
                "subpath": sub,
                "edge": eid,
                "valid": ok,
                "rewires": tree.rewires.total,
            })

    return RunResult(
        source=source,
        target=target,
        path=path,
        evaluated=evaluated,
        rewires=tree.rewires,
        iterations=iterations,
        wall_time=time.perf_counter() - t0,
        expansions=tree.expansions,
    )


def cost_total(result: RunResult, model: CostModel | None = None) -> float:
    model = model or CostModel()
    return model(result.num_evaluated, result.num_rewires)


# ---------------------------------------------------------------------------
# ground truth


def _masked_dijkstra(graph: Graph, keep: np.ndarray, source: int, target: int) -> Path | None:
    """Shortest path using only edges where ``keep`` is true (scipy csgraph)."""
    n = graph.num_vertices
    if source == target:
        return Path((source,), (), 0.0)
    eids = np.flatnonzero(keep)
    if eids.size == 0:
        return None
    u, v = graph.endpoints[eids, 0], graph.endpoints[eids, 1]
    w = graph.weights[eids]
    if not graph.directed:
        u, v, w, eids = (np.concatenate([u, v]), np.concatenate([v, u]),
                         np.concatenate([w, w]), np.concatenate([eids, eids]))
    # csr_matrix sums duplicates, so keep only the lightest parallel edge
    order = np.lexsort((w, v, u))
    u, v, w, eids = u[order], v[order], w[order], eids[order]
    first = np.ones(len(u), dtype=bool)
    first[1:] = (u[1:] != u[:-1]) | (v[1:] != v[:-1])
    u, v, w, eids = u[first], v[first], w[first], eids[first]
    mat = csr_matrix((w, (u, v)), shape=(n, n))
    dist, pred = dijkstra(mat, directed=True, indices=source, return_predecessors=True)
    if not np.isfinite(dist[target]):
        return None
    lookup = {(int(a), int(b)): int(e) for a, b, e in zip(u, v, eids)}
    verts = [target]
    while verts[-1] != source:
        verts.append(int(pred[verts[-1]]))
    verts.reverse()
    edges = tuple(lookup[(a, b)] for a, b in zip(verts[:-1], verts[1:]))
    total = 0.0
    for e in edges:
        total += graph.weight_list[e]
    return Path(tuple(verts), edges, total)


def oracle_shortest(graph: Graph, world, source: int, target: int) -> Path | None:
    """Shortest feasible path found by evaluating every edge up front."""
    return _masked_dijkstra(graph, np.asarray(world.outcomes(graph), dtype=bool), source, target)


def verify_certificate(graph: Graph, result: RunResult) -> bool:
    """Check that the returned path is fully evaluated valid and that no shorter
    path survives once the edges evaluated invalid are removed."""
    path = result.path
    if path is None:
        return False
    if path.vertices[0] != result.source or path.vertices[-1] != result.target:
        return False
    if len(path.edges) != len(path.vertices) - 1:
        return False
    total = 0.0
    for a, b, e in zip(path.vertices[:-1], path.vertices[1:], path.edges):
        if not 0 <= e < graph.num_edges or result.evaluated.get(e) is not True:
            return False
        x, y = graph.endpoint_list[e]
        if not ((x, y) == (a, b) or (not graph.directed and (y, x) == (a, b))):
            return False
        total += graph.weight_list[e]
    if abs(total - path.weight) > TOL:
        return False
    keep = np.ones(graph.num_edges, dtype=bool)
    bad = [e for e, ok in result.evaluated.items() if not ok]
    keep[bad] = False
    best = _masked_dijkstra(graph, keep, result.source, result.target)
    return best is not None and best.weight >= path.weight - TOL


def run_all_valid_mask(graph: Graph, evaluated: dict[int, bool]) -> np.ndarray:
    """Edge mask with evaluated-invalid edges removed and the rest assumed valid."""
    keep = np.ones(graph.num_edges, dtype=bool)
    for e, ok in evaluated.items():
        if not ok:
            keep[e] = False
    return keep
