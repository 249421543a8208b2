"""Ground-truth edge validity: explicit tables, 2D occupancy bitmaps, the four
synthetic environment families, and frequency-count edge priors."""
from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO, Union

import numpy as np
from scipy import ndimage

from .graph import Graph

log = logging.getLogger(__name__)

WORLD_HEADER = "gls-world v1"
ENVIRONMENTS = ("square", "twowall", "forest", "maze")
DEFAULT_RESOLUTION = 256
MIN_RESOLUTION = 16
START = (0.05, 0.05)
GOAL = (0.95, 0.95)


class WorldFormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# world types


@dataclass(frozen=True)
class ExplicitWorld:
    """Validity table indexed by edge id."""

    validity: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.validity, dtype=bool).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "validity", arr)

    def covers(self, graph: Graph) -> bool:
        return len(self.validity) == graph.num_edges

    def evaluate(self, graph: Graph, eid: int) -> bool:
        if not 0 <= eid < len(self.validity):
            raise KeyError(f"edge {eid} is not covered by this world")
        return bool(self.validity[eid])

    def outcomes(self, graph: Graph) -> np.ndarray:
        if not self.covers(graph):
            raise ValueError(f"world covers {len(self.validity)} edges, graph has {graph.num_edges}")
        return self.validity


@dataclass(frozen=True)
class BitmapWorld:
    """Occupancy grid over [0,1]^2; ``grid[row, col]`` covers
    ``y in [row/rows, (row+1)/rows)`` and ``x in [col/cols, (col+1)/cols)``."""

    grid: np.ndarray
    env: str = "custom"
    seed: int | None = None
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=bool).copy()
        if g.ndim != 2:
            raise ValueError("occupancy grid must be 2-dimensional")
        if min(g.shape) < MIN_RESOLUTION:
            raise ValueError(f"grid resolution must be >= {MIN_RESOLUTION} cells per unit")
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)

    def __eq__(self, other):
        if not isinstance(other, BitmapWorld):
            return NotImplemented
        return np.array_equal(self.grid, other.grid)

    @property
    def resolution(self) -> int:
        return self.grid.shape[1]

    def occupied(self, x: float, y: float) -> bool:
        rows, cols = self.grid.shape
        r = min(max(int(math.floor(y * rows)), 0), rows - 1)
        c = min(max(int(math.floor(x * cols)), 0), cols - 1)
        return bool(self.grid[r, c])

    def evaluate(self, graph: Graph, eid: int) -> bool:
        if not 0 <= eid < graph.num_edges:
            raise KeyError(f"edge {eid} is not in the graph")
        cells, offsets = _edge_cells(graph, self.grid.shape, np.array([eid]))
        return not bool(self.grid.ravel()[cells].any())

    def outcomes(self, graph: Graph) -> np.ndarray:
        cells, offsets = _raster(graph, self.grid.shape)
        if graph.num_edges == 0:
            return np.zeros(0, dtype=bool)
        hit = np.logical_or.reduceat(self.grid.ravel()[cells], offsets[:-1])
        return ~hit


World = Union[ExplicitWorld, BitmapWorld]


def evaluate(world: World, graph: Graph, eid: int) -> bool:
    return world.evaluate(graph, eid)


# ---------------------------------------------------------------------------
# segment rasterization


def _edge_cells(graph: Graph, shape: tuple[int, int], eids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flat grid indices touched by sampling each edge at step <= 1/(2*resolution).

    Returns the concatenated indices and ``offsets`` such that edge ``k``'s
    samples are ``cells[offsets[k]:offsets[k+1]]``.
    """
    if graph.dim != 2:
        raise ValueError("bitmap worlds need 2-dimensional graphs")
    rows, cols = shape
    res = max(rows, cols)
    ends = graph.endpoints[eids]
    p = graph.positions[ends[:, 0]]
    q = graph.positions[ends[:, 1]]
    d = q - p
    length = np.sqrt(np.einsum("ij,ij->i", d, d))
    counts = np.ceil(length * (2 * res)).astype(np.int64) + 1
    counts = np.maximum(counts, 2)
    offsets = np.zeros(len(counts) + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    owner = np.repeat(np.arange(len(counts)), counts)
    k = np.arange(offsets[-1]) - offsets[owner]
    t = k / (counts[owner] - 1)
    x = p[owner, 0] + d[owner, 0] * t
    y = p[owner, 1] + d[owner, 1] * t
    c = np.clip(np.floor(x * cols).astype(np.int64), 0, cols - 1)
    r = np.clip(np.floor(y * rows).astype(np.int64), 0, rows - 1)
    return r * cols + c, offsets


def _raster(graph: Graph, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    cache = graph.__dict__.setdefault("_raster_cache", {})
    key = tuple(shape)
    if key not in cache:
        cache[key] = _edge_cells(graph, shape, np.arange(graph.num_edges))
    return cache[key]


# ---------------------------------------------------------------------------
# environment families

ENV_DEFAULTS: dict[str, dict] = {
    "square": {"side_min": 0.2, "side_max": 0.4, "center_min": 0.3, "center_max": 0.7},
    "twowall": {"thickness": 0.04, "gap_min": 0.1, "gap_max": 0.2, "jitter": 0.02},
    "forest": {"density": 0.5, "radius_min": 0.02, "radius_max": 0.05, "clearance": 0.02},
    "maze": {"cells": 8, "thickness": 0.02},
}


def _clamp(x, lo, hi):
    return min(max(x, lo), hi)


def _cell_centers(res: int) -> tuple[np.ndarray, np.ndarray]:
    c = (np.arange(res) + 0.5) / res
    return np.meshgrid(c, c)  # xs[row, col], ys[row, col]


def _fill_rect(grid, xs, ys, x0, x1, y0, y1):
    grid |= (xs >= x0) & (xs <= x1) & (ys >= y0) & (ys <= y1)


def _square(rng, res, p):
    xs, ys = _cell_centers(res)
    grid = np.zeros((res, res), dtype=bool)
    side = rng.uniform(p["side_min"], p["side_max"])
    cx, cy = rng.uniform(p["center_min"], p["center_max"], size=2)
    _fill_rect(grid, xs, ys, cx - side / 2, cx + side / 2, cy - side / 2, cy + side / 2)
    return grid


def _twowall(rng, res, p):
    xs, ys = _cell_centers(res)
    grid = np.zeros((res, res), dtype=bool)
    t = p["thickness"]
    for base in (1 / 3, 2 / 3):
        x = base + rng.uniform(-p["jitter"], p["jitter"])
        gap = rng.uniform(p["gap_min"], p["gap_max"])
        # keep the gap away from the border so each wall stays two pieces
        gy = rng.uniform(gap / 2 + 0.05, 1 - gap / 2 - 0.05)
        _fill_rect(grid, xs, ys, x - t / 2, x + t / 2, 0.0, gy - gap / 2)
        _fill_rect(grid, xs, ys, x - t / 2, x + t / 2, gy + gap / 2, 1.0)
    return grid


def _forest(rng, res, p):
    xs, ys = _cell_centers(res)
    grid = np.zeros((res, res), dtype=bool)
    count = int(rng.poisson(p["density"] * 100)) if p["density"] > 0 else 0
    for _ in range(count):
        r = rng.uniform(p["radius_min"], p["radius_max"])
        for _attempt in range(100):
            cx, cy = rng.uniform(0, 1, size=2)
            if all(math.hypot(cx - ex, cy - ey) > r + p["clearance"] for ex, ey in (START, GOAL)):
                break
        else:
            continue
        grid |= (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
    return grid


def _maze(rng, res, p):
    k = p["cells"]
    t = p["thickness"]
    walls: list[tuple[str, int, int, int]] = []  # (orientation, line, from, to) in cell units

    def divide(x0, y0, x1, y1):
        w, h = x1 - x0, y1 - y0
        if w < 2 or h < 2:
            return
        horizontal = h > w if h != w else bool(rng.integers(2))
        if horizontal:
            line = int(rng.integers(y0 + 1, y1))
            gap = int(rng.integers(x0, x1))
            walls.append(("h", line, x0, gap))
            walls.append(("h", line, gap + 1, x1))
            divide(x0, y0, x1, line)
            divide(x0, line, x1, y1)
        else:
            line = int(rng.integers(x0 + 1, x1))
            gap = int(rng.integers(y0, y1))
            walls.append(("v", line, y0, gap))
            walls.append(("v", line, gap + 1, y1))
            divide(x0, y0, line, y1)
            divide(line, y0, x1, y1)

    divide(0, 0, k, k)
    xs, ys = _cell_centers(res)
    grid = np.zeros((res, res), dtype=bool)
    for orient, line, a, b in walls:
        if b <= a:
            continue
        c = line / k
        lo, hi = a / k - t / 2, b / k + t / 2
        if orient == "h":
            _fill_rect(grid, xs, ys, lo, hi, c - t / 2, c + t / 2)
        else:
            _fill_rect(grid, xs, ys, c - t / 2, c + t / 2, lo, hi)
    return grid


_GENERATORS = {"square": _square, "twowall": _twowall, "forest": _forest, "maze": _maze}


def env_params(env: str, **overrides) -> dict:
    env = env.lower()
    if env not in ENV_DEFAULTS:
        raise ValueError(f"unknown environment {env!r}; expected one of {', '.join(ENVIRONMENTS)}")
    params = dict(ENV_DEFAULTS[env])
    unknown = set(overrides) - set(params)
    if unknown:
        raise ValueError(f"unknown {env} parameters: {sorted(unknown)}")
    params.update(overrides)
    if env == "square":
        params["side_min"] = _clamp(params["side_min"], 0.0, 0.4)
        params["side_max"] = _clamp(params["side_max"], params["side_min"], 0.4)
        params["center_min"] = _clamp(params["center_min"], 0.3, 0.7)
        params["center_max"] = _clamp(params["center_max"], params["center_min"], 0.7)
    elif env == "twowall":
        params["thickness"] = _clamp(params["thickness"], 0.0, 0.1)
        params["gap_min"] = _clamp(params["gap_min"], 0.02, 0.5)
        params["gap_max"] = _clamp(params["gap_max"], params["gap_min"], 0.5)
        params["jitter"] = _clamp(params["jitter"], 0.0, 0.1)
    elif env == "forest":
        params["density"] = _clamp(params["density"], 0.0, 5.0)
        params["radius_min"] = _clamp(params["radius_min"], 0.005, 0.2)
        params["radius_max"] = _clamp(params["radius_max"], params["radius_min"], 0.2)
    else:
        params["thickness"] = _clamp(params["thickness"], 0.005, 0.05)
        # corridor width 1/cells - thickness must stay >= 0.08
        params["cells"] = int(_clamp(int(params["cells"]), 2, int(1 / (0.08 + params["thickness"]))))
    return params


def start_goal_connected(grid: np.ndarray, start=START, goal=GOAL) -> bool:
    """4-connected flood fill of free cells from the start cell to the goal cell."""
    rows, cols = grid.shape
    labels, _ = ndimage.label(~grid)

    def cell(pt):
        return (
            min(int(pt[1] * rows), rows - 1),
            min(int(pt[0] * cols), cols - 1),
        )

    a, b = labels[cell(start)], labels[cell(goal)]
    return bool(a) and a == b


def generate_world(env: str, seed: int, resolution: int = DEFAULT_RESOLUTION, **params) -> BitmapWorld:
    """Seeded obstacle layout from one of the parametric families.

    Layouts whose start and goal cells are disconnected are regenerated with
    ``seed + 1`` (logged); the returned world records the seed actually used.
    """
    env = env.lower()
    p = env_params(env, **params)
    resolution = max(int(resolution), MIN_RESOLUTION)
    used = int(seed)
    for _ in range(1000):
        rng = np.random.default_rng(used)
        grid = _GENERATORS[env](rng, resolution, p)
        # start and goal corners are never occupied
        for pt in (START, GOAL):
            r = min(int(pt[1] * resolution), resolution - 1)
            c = min(int(pt[0] * resolution), resolution - 1)
            grid[r, c] = False
        if start_goal_connected(grid):
            if used != seed:
                log.info("%s world seed %d infeasible; substituted seed %d", env, seed, used)
            return BitmapWorld(grid, env=env, seed=used, params=p)
        used += 1
    raise RuntimeError(f"could not generate a feasible {env} world near seed {seed}")


# ---------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class PriorModel:
    priors: np.ndarray
    n_worlds: int = 0
    beta: float = 1.0

    def __post_init__(self):
        arr = np.asarray(self.priors, dtype=float).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "priors", arr)

    @property
    def p_max(self) -> float:
        return float(self.priors.max()) if len(self.priors) else 0.0


def estimate_priors(graph: Graph, worlds: Sequence[World], beta: float = 1.0) -> PriorModel:
    """Laplace-smoothed validity frequency: ``(valid + beta) / (n + 2 beta)``."""
    if len(worlds) == 0:
        raise ValueError("need at least one training world to estimate priors")
    counts = np.zeros(graph.num_edges, dtype=np.int64)
    for w in worlds:
        counts += w.outcomes(graph)
    n = len(worlds)
    return PriorModel((counts + beta) / (n + 2 * beta), n_worlds=n, beta=beta)


def save_priors(model: PriorModel, stream: TextIO | None = None) -> str:
    text = "".join(f"{i} {format(float(p), '.17g')}\n" for i, p in enumerate(model.priors))
    if stream is not None:
        stream.write(text)
    return text


def load_priors(stream: TextIO | str | Iterable[str]) -> PriorModel:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    values = []
    for lineno, raw in enumerate(stream, start=1):
        tok = raw.split()
        if not tok:
            continue
        if len(tok) != 2 or int(tok[0]) != len(values):
            raise WorldFormatError(f"line {lineno}: expected '<edge_id> <prior>' in id order")
        p = float(tok[1])
        if not 0.0 <= p <= 1.0:
            raise WorldFormatError(f"line {lineno}: prior {p} outside [0, 1]")
        values.append(p)
    return PriorModel(np.array(values))


# ---------------------------------------------------------------------------
# world files


def save_world(world: World, stream: TextIO | None = None) -> str:
    lines = [WORLD_HEADER]
    if isinstance(world, ExplicitWorld):
        lines += [f"{i} {int(v)}" for i, v in enumerate(world.validity)]
    else:
        rows, cols = world.grid.shape
        lines.append(f"grid {rows} {cols}")
        lines += ["".join("1" if c else "0" for c in row) for row in world.grid.tolist()]
    text = "\n".join(lines) + "\n"
    if stream is not None:
        stream.write(text)
    return text


def load_world(stream: TextIO | str | Iterable[str]) -> World:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    lines = [ln.strip() for ln in stream]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != WORLD_HEADER:
        raise WorldFormatError("missing 'gls-world v1' header")
    body = lines[1:]
    if body and body[0].startswith("grid"):
        tok = body[0].split()
        if len(tok) != 3:
            raise WorldFormatError("grid line must be 'grid <rows> <cols>'")
        rows, cols = int(tok[1]), int(tok[2])
        data = body[1:]
        if len(data) != rows or any(len(r) != cols or set(r) - {"0", "1"} for r in data):
            raise WorldFormatError("grid block does not match its declared shape")
        grid = np.array([[ch == "1" for ch in r] for r in data], dtype=bool).reshape(rows, cols)
        return BitmapWorld(grid)
    validity = []
    for lineno, ln in enumerate(body, start=2):
        tok = ln.split()
        if len(tok) != 2 or tok[1] not in ("0", "1") or int(tok[0]) != len(validity):
            raise WorldFormatError(f"line {lineno}: expected '<edge_id> <0|1>' in id order")
        validity.append(tok[1] == "1")
    return ExplicitWorld(np.array(validity, dtype=bool))
