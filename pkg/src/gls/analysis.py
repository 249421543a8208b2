"""Closed-form quantities about lazy search plus the rewiring counterexample."""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import median
from typing import Sequence

import numpy as np

from .engine import CostModel, cost_total, gls_run
from .graph import Graph
from .toggles import SubpathExistence, make_selector
from .world import ExplicitWorld

COUNTEREXAMPLE_EPS = 1e-3
CHAIN_WEIGHT = 1.5


# ---------------------------------------------------------------------------
# evaluation order


def expected_evals(priors: Sequence) -> float:
    """Expected evaluations to invalidate a path when edges are checked in the
    given order, counting only outcomes where some edge fails.

    Works with any numeric type, so ``fractions.Fraction`` input gives an exact answer.
    """
    total = 0
    prefix = 1
    for i, p in enumerate(priors, start=1):
        if not 0 <= p <= 1:
            raise ValueError(f"prior {p} outside [0, 1]")
        total += prefix * (1 - p) * i
        prefix *= p
    return total


def expected_evals_with_success(priors: Sequence) -> float:
    """Like :func:`expected_evals` but also charges the all-valid outcome,
    which costs one evaluation per edge."""
    prefix = 1
    for p in priors:
        prefix *= p
    return expected_evals(priors) + prefix * len(priors)


def optimal_order(priors: Sequence[float]) -> tuple[int, ...]:
    """Indices by ascending prior; equal priors keep their original order."""
    return tuple(sorted(range(len(priors)), key=lambda i: priors[i]))


# ---------------------------------------------------------------------------
# cost bound for the existence event


@dataclass(frozen=True)
class BoundParams:
    K: int
    b: int
    p_max: float
    delta: float
    cost: CostModel = CostModel()

    def __post_init__(self):
        if self.K < 1 or self.b < 1:
            raise ValueError("K and b must be positive")
        if not 0 < self.p_max < 1:
            raise ValueError("p_max must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")


def max_subpath_length(delta: float, p_max: float) -> float:
    """Longest unevaluated stretch a subpath can reach before its existence
    probability drops to ``delta``."""
    return math.log(delta) / math.log(p_max)


def existence_cost_bound(params: BoundParams) -> float:
    """Upper bound on model cost under the existence event with threshold delta."""
    c = params.cost
    evals = c.c_eval / (1.0 - params.delta)
    rewires = c.c_rwr * params.b * max_subpath_length(params.delta, params.p_max)
    return params.K * (evals + rewires)


def bound_value(delta: float, c_eval: float, c_rwr: float, b: int, p_max: float, K: int = 1) -> float:
    return existence_cost_bound(BoundParams(K, b, p_max, delta, CostModel(c_eval, c_rwr)))


def critical_eta(c_eval: float, c_rwr: float, b: int, p_max: float) -> float:
    return (c_eval / (b * c_rwr)) * math.log(1.0 / p_max) + 2.0


def critical_delta(c_eval: float, c_rwr: float, b: int, p_max: float) -> float:
    """Threshold where the bound is stationary in delta.

    The root is (eta - sqrt(eta^2 - 4)) / 2; it is computed as
    2 / (eta + sqrt(eta^2 - 4)) to avoid cancellation for large eta.
    """
    if not (c_eval > 0 and c_rwr > 0 and b >= 1):
        raise ValueError("need positive costs and b >= 1")
    if not 0 < p_max <= 1:
        raise ValueError("p_max must lie in (0, 1]")
    eta = critical_eta(c_eval, c_rwr, b, p_max)
    return 2.0 / (eta + math.sqrt(max(eta * eta - 4.0, 0.0)))


# ---------------------------------------------------------------------------
# Monte-Carlo check of the evaluation term


def simulate_elimination(delta: float, length: int, trials: int, rng: np.random.Generator,
                         *, oracular: bool = True) -> np.ndarray:
    """Evaluations spent per eliminated subpath.

    Subpaths have ``length`` unevaluated edges, each valid independently with
    probability ``delta ** (1/length)``, so a whole subpath survives with
    probability ``delta``.  The oracular selector spends one evaluation per
    subpath: it either hits an invalid edge or confirms the subpath (wasted),
    after which a fresh subpath is drawn.  With ``oracular=False`` edges are
    checked in order, which is what any prior-driven selector does when all
    priors are equal.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    p = delta ** (1.0 / length)
    out = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        spent = 0
        while True:
            valid = rng.random(length) < p
            if oracular:
                spent += 1
                if not valid.all():
                    break
            else:
                bad = np.flatnonzero(~valid)
                if bad.size:
                    spent += int(bad[0]) + 1
                    break
                spent += length
        out[t] = spent
    return out


# ---------------------------------------------------------------------------
# rewiring counterexample


@dataclass(frozen=True)
class Counterexample:
    graph: Graph
    world: ExplicitWorld
    source: int
    target: int
    fan: tuple[int, ...]
    hubs: tuple[int, int]
    chain: tuple[int, ...]


def build_counterexample(N: int, l: int) -> Counterexample:
    """Fan of ``l`` start edges feeding two hubs that both connect to every
    vertex of an ``N``-vertex chain ending at the goal.

    Every fan edge except the last is invalid.  Each invalidation moves the
    whole chain from one hub to the other when the tree is rebuilt, while a
    search that never settles the chain early does no rewiring at all.
    """
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    if isinstance(l, bool) or int(l) != l or l < 2 or l % 2:
        raise ValueError("l must be an even integer >= 2")
    N, l = int(N), int(l)
    s = 0
    fan = tuple(range(1, l + 1))
    hub_a, hub_b = l + 1, l + 2
    chain = tuple(range(l + 3, l + 3 + N))
    n = l + 3 + N

    pos = np.zeros((n, 2))
    for i, u in enumerate(fan, start=1):
        pos[u] = (1.0, i - (l + 1) / 2)
    pos[hub_a] = (2.0, 1.0)
    pos[hub_b] = (2.0, -1.0)
    for j, c in enumerate(chain, start=1):
        pos[c] = (2.0 + j, 0.0)

    ends: list[tuple[int, int]] = []
    weights: list[float] = []
    for i, u in enumerate(fan, start=1):
        ends.append((s, u))
        weights.append(1.0 + i * COUNTEREXAMPLE_EPS)
    for i, u in enumerate(fan, start=1):
        ends.append((u, hub_a if i % 2 else hub_b))
        weights.append(1.0)
    for hub in (hub_a, hub_b):
        for j, c in enumerate(chain, start=1):
            ends.append((hub, c))
            weights.append(float(j))
    for c, d in zip(chain[:-1], chain[1:]):
        ends.append((c, d))
        weights.append(CHAIN_WEIGHT)

    graph = Graph(pos, ends, weights)
    validity = np.ones(len(ends), dtype=bool)
    validity[: l - 1] = False
    return Counterexample(graph, ExplicitWorld(validity), s, chain[-1], fan, (hub_a, hub_b), chain)


# ---------------------------------------------------------------------------
# delta sweep


@dataclass(frozen=True)
class ParetoPoint:
    delta: float
    median_evals: float
    median_rewires: float
    median_cost: float


def pareto_sweep(graph: Graph, worlds: Sequence, deltas: Sequence[float], selector: str = "ff",
                 *, source: int = 0, target: int = 1, cost: CostModel | None = None,
                 heuristic=None) -> list[ParetoPoint]:
    """One run per (delta, world) with the existence event; medians per delta
    over feasible runs.  ``graph`` must already carry the trained priors."""
    if not deltas:
        raise ValueError("delta grid is empty")
    cost = cost or CostModel()
    points = []
    for d in deltas:
        evals, rewires, costs = [], [], []
        for w in worlds:
            r = gls_run(graph, w, source, target, SubpathExistence(d), make_selector(selector), heuristic)
            if not r.feasible:
                continue
            evals.append(r.num_evaluated)
            rewires.append(r.num_rewires)
            costs.append(cost_total(r, cost))
        if not costs:
            points.append(ParetoPoint(float(d), math.nan, math.nan, math.nan))
        else:
            points.append(ParetoPoint(float(d), float(median(evals)), float(median(rewires)),
                                      float(median(costs))))
    return points
