"""Lazy shortest-path search with pluggable events and selectors."""
from .analysis import (
    BoundParams,
    build_counterexample,
    critical_delta,
    existence_cost_bound,
    expected_evals,
    optimal_order,
    pareto_sweep,
)
from .engine import CostModel, RunResult, cost_total, gls_run, oracle_shortest, verify_certificate
from .graph import Graph, Path, build_rgg, halton_rgg, load_graph, save_graph
from .lazy_tree import EdgeStatus, LazyTree, RewireLog, graph_distance_heuristic
from .toggles import (
    Alternate,
    ConstantDepth,
    FailFast,
    Forward,
    HeuristicProgress,
    ShortestPath,
    SubpathExistence,
    make_event,
    make_selector,
    preset,
)
from .world import BitmapWorld, ExplicitWorld, PriorModel, estimate_priors, generate_world

__version__ = "0.1.0"
