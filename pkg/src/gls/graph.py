"""Weighted roadmap graphs with per-edge priors, plus Halton/RGG construction and
the line-oriented ``gls-graph v1`` file format."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np
from scipy.spatial import cKDTree

FORMAT_HEADER = "gls-graph v1"
DEFAULT_GAMMA = 2.0


class GraphFormatError(ValueError):
    """Raised for malformed graph files or invalid graph contents."""


@dataclass(frozen=True)
class VertexRecord:
    id: int
    position: tuple[float, ...]


@dataclass(frozen=True)
class EdgeRecord:
    id: int
    endpoints: tuple[int, int]
    weight: float
    prior: float = 1.0


@dataclass(frozen=True)
class Path:
    """A vertex sequence with the ids of the edges joining consecutive vertices."""

    vertices: tuple[int, ...]
    edges: tuple[int, ...]
    weight: float

    def __len__(self) -> int:
        return len(self.vertices)


class Graph:
    """Immutable weighted graph.

    Edges are undirected unless ``directed=True``; an undirected edge carries a
    single weight and prior for both traversal directions.  ``out_adj[v]`` and
    ``in_adj[v]`` hold ``(neighbour, edge_id, weight)`` tuples and are what the
    search loops iterate over.
    """

    def __init__(
        self,
        positions,
        endpoints,
        weights,
        priors=None,
        *,
        directed: bool = False,
    ):
        pos = np.array(positions, dtype=float)
        if pos.ndim == 1:
            pos = pos.reshape(-1, 1)
        if pos.ndim != 2 or pos.shape[1] < 1:
            raise GraphFormatError("positions must be an (n, d) array with d >= 1")
        ends = np.array(endpoints, dtype=np.int64).reshape(-1, 2)
        w = np.array(weights, dtype=float).reshape(-1)
        p = np.ones(len(w)) if priors is None else np.array(priors, dtype=float).reshape(-1)
        n = len(pos)
        if len(ends) != len(w) or len(p) != len(w):
            raise GraphFormatError("endpoints, weights and priors must have equal length")
        if len(ends):
            if ends.min() < 0 or ends.max() >= n:
                raise GraphFormatError("edge references a vertex that does not exist")
            if np.any(ends[:, 0] == ends[:, 1]):
                raise GraphFormatError("self-loops are not allowed")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise GraphFormatError("edge weights must be finite and strictly positive")
        if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise GraphFormatError("edge priors must lie in [0, 1]")

        pos.setflags(write=False)
        ends.setflags(write=False)
        w.setflags(write=False)
        p.setflags(write=False)
        self.positions = pos
        self.endpoints = ends
        self.weights = w
        self.priors = p
        self.directed = directed

        # plain python lists: the search loops index these millions of times
        self.weight_list: list[float] = w.tolist()
        self.prior_list: list[float] = p.tolist()
        self.endpoint_list: list[tuple[int, int]] = [(int(a), int(b)) for a, b in ends.tolist()]
        out_adj: list[list[tuple[int, int, float]]] = [[] for _ in range(n)]
        in_adj: list[list[tuple[int, int, float]]] = out_adj if not directed else [[] for _ in range(n)]
        for eid, ((a, b), wt) in enumerate(zip(self.endpoint_list, self.weight_list)):
            out_adj[a].append((b, eid, wt))
            if directed:
                in_adj[b].append((a, eid, wt))
            else:
                out_adj[b].append((a, eid, wt))
        self.out_adj = out_adj
        self.in_adj = in_adj

    def csr(self, incoming: bool = False) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(indptr, neighbour, edge_id, weight)`` arrays mirroring the
        adjacency lists, built once and cached."""
        key = "_csr_in" if incoming else "_csr_out"
        cached = self.__dict__.get(key)
        if cached is None:
            adj = self.in_adj if incoming else self.out_adj
            lens = np.fromiter((len(a) for a in adj), dtype=np.int64, count=len(adj))
            indptr = np.zeros(len(adj) + 1, dtype=np.int64)
            np.cumsum(lens, out=indptr[1:])
            flat = [t for a in adj for t in a]
            nbr = np.fromiter((t[0] for t in flat), dtype=np.int64, count=len(flat))
            eid = np.fromiter((t[1] for t in flat), dtype=np.int64, count=len(flat))
            w = np.fromiter((t[2] for t in flat), dtype=float, count=len(flat))
            cached = (indptr, nbr, eid, w)
            self.__dict__[key] = cached
        return cached

    @property
    def num_vertices(self) -> int:
        return len(self.positions)

    @property
    def num_edges(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def vertex(self, vid: int) -> VertexRecord:
        return VertexRecord(vid, tuple(self.positions[vid].tolist()))

    def edge(self, eid: int) -> EdgeRecord:
        return EdgeRecord(eid, self.endpoint_list[eid], self.weight_list[eid], self.prior_list[eid])

    def vertices(self) -> list[VertexRecord]:
        return [self.vertex(i) for i in range(self.num_vertices)]

    def edges(self) -> list[EdgeRecord]:
        return [self.edge(i) for i in range(self.num_edges)]

    def adjacency(self) -> list[list[int]]:
        """Incident edge ids per vertex (outgoing ones for directed graphs)."""
        return [[eid for _, eid, _ in nbrs] for nbrs in self.out_adj]

    def other_end(self, eid: int, vid: int) -> int:
        a, b = self.endpoint_list[eid]
        return b if vid == a else a

    def with_priors(self, priors) -> "Graph":
        return Graph(self.positions, self.endpoints, self.weights, priors, directed=self.directed)

    def path_from_vertices(self, vertices: Sequence[int]) -> Path:
        """Build a :class:`Path`, picking the lightest edge between consecutive vertices."""
        edges = []
        total = 0.0
        for a, b in zip(vertices[:-1], vertices[1:]):
            best = None
            for nbr, eid, wt in self.out_adj[a]:
                if nbr == b and (best is None or wt < self.weight_list[best]):
                    best = eid
            if best is None:
                raise ValueError(f"no edge joins {a} and {b}")
            edges.append(best)
            total += self.weight_list[best]
        return Path(tuple(vertices), tuple(edges), total)

    def check_invariants(self) -> None:
        """Round-trip the adjacency lists against the edge sequence."""
        seen: dict[int, int] = {}
        for v, nbrs in enumerate(self.out_adj):
            for nbr, eid, wt in nbrs:
                a, b = self.endpoint_list[eid]
                if {v, nbr} != {a, b} or wt != self.weight_list[eid]:
                    raise AssertionError(f"adjacency of {v} disagrees with edge {eid}")
                seen[eid] = seen.get(eid, 0) + 1
        expected = 1 if self.directed else 2
        for eid in range(self.num_edges):
            if seen.get(eid, 0) != expected:
                raise AssertionError(f"edge {eid} appears {seen.get(eid, 0)} times in adjacency")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.directed == other.directed
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.endpoints, other.endpoints)
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.priors, other.priors)
        )

    def __repr__(self) -> str:
        return f"Graph(n={self.num_vertices}, m={self.num_edges}, d={self.dim}, directed={self.directed})"


# ---------------------------------------------------------------------------
# construction


def _is_prime(k: int) -> bool:
    if k < 2:
        return False
    return all(k % i for i in range(2, math.isqrt(k) + 1))


def radical_inverse(index: int, base: int) -> float:
    """Van der Corput radical inverse of ``index`` in ``base``."""
    inv, denom = 0.0, 1.0
    while index:
        index, digit = divmod(index, base)
        denom *= base
        inv += digit / denom
    return inv


def halton_point(index: int, bases: Sequence[int] = (2, 3)) -> tuple[float, ...]:
    if index < 0:
        raise ValueError("Halton index must be nonnegative")
    bases = tuple(int(b) for b in bases)
    if len(set(bases)) != len(bases):
        raise ValueError(f"Halton bases must be distinct, got {bases}")
    for b in bases:
        if not _is_prime(b):
            raise ValueError(f"Halton base {b} is not prime")
    return tuple(radical_inverse(index, b) for b in bases)


def halton_points(count: int, bases: Sequence[int] = (2, 3), start: int = 1) -> np.ndarray:
    """``count`` consecutive Halton points beginning at index ``start``."""
    return np.array([halton_point(i, bases) for i in range(start, start + count)], dtype=float).reshape(
        count, len(bases)
    )


def default_radius(n: int, dim: int = 2, gamma: float = DEFAULT_GAMMA) -> float:
    """Connection radius ``gamma * (log n / n) ** (1/dim)``."""
    if n < 2:
        return gamma
    return gamma * (math.log(n) / n) ** (1.0 / dim)


def build_rgg(points, radius: float) -> Graph:
    """Connect every pair of points within Euclidean ``radius``.

    Edge ids follow lexicographic ``(min endpoint, max endpoint)`` order so the
    result does not depend on the KD-tree's traversal order.
    """
    pts = np.array(points, dtype=float)
    if pts.size == 0:
        raise ValueError("cannot build a graph from an empty point set")
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if not radius > 0:
        raise ValueError("radius must be positive")
    pairs = cKDTree(pts).query_pairs(radius, output_type="ndarray")
    if len(pairs):
        pairs = np.sort(pairs, axis=1)
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
        diff = pts[pairs[:, 0]] - pts[pairs[:, 1]]
        weights = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        # coincident points would give zero-weight edges
        keep = weights > 0
        pairs, weights = pairs[keep], weights[keep]
    else:
        pairs = np.zeros((0, 2), dtype=np.int64)
        weights = np.zeros(0)
    return Graph(pts, pairs, weights)


def halton_rgg(
    n: int,
    *,
    gamma: float = DEFAULT_GAMMA,
    start: Sequence[float] = (0.05, 0.05),
    goal: Sequence[float] = (0.95, 0.95),
    bases: Sequence[int] = (2, 3),
) -> Graph:
    """``n``-vertex roadmap on [0,1]^d: vertex 0 is ``start``, vertex 1 is ``goal``,
    the remaining ``n - 2`` are Halton samples 1..n-2."""
    if n < 2:
        raise ValueError("a roadmap needs at least the start and goal vertices")
    pts = np.vstack([np.array([start, goal], dtype=float), halton_points(n - 2, bases)])
    return build_rgg(pts, default_radius(n, pts.shape[1], gamma))


# ---------------------------------------------------------------------------
# serialization


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_graph(graph: Graph, stream: TextIO | None = None) -> str:
    """Write ``graph`` in the ``gls-graph v1`` line format; returns the text."""
    lines = [f"{FORMAT_HEADER} d={graph.dim}" + (" directed" if graph.directed else "")]
    for vid, row in enumerate(graph.positions.tolist()):
        lines.append("v " + " ".join([str(vid)] + [_fmt(x) for x in row]))
    for eid, ((a, b), w, p) in enumerate(zip(graph.endpoint_list, graph.weight_list, graph.prior_list)):
        lines.append(f"e {eid} {a} {b} {_fmt(w)} {_fmt(p)}")
    text = "\n".join(lines) + "\n"
    if stream is not None:
        stream.write(text)
    return text


def load_graph(stream: TextIO | str | Iterable[str]) -> Graph:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    lines = iter(stream)
    try:
        header = next(lines).split()
    except StopIteration:
        raise GraphFormatError("empty graph file") from None
    if len(header) not in (3, 4) or " ".join(header[:2]) != FORMAT_HEADER or not header[2].startswith("d="):
        raise GraphFormatError(f"bad header: {' '.join(header)!r}")
    directed = False
    if len(header) == 4:
        if header[3] != "directed":
            raise GraphFormatError(f"unknown header flag {header[3]!r}")
        directed = True
    try:
        dim = int(header[2][2:])
    except ValueError:
        raise GraphFormatError(f"bad dimension in header: {header[2]!r}") from None
    if dim < 1:
        raise GraphFormatError("dimension must be >= 1")

    positions: list[list[float]] = []
    endpoints: list[tuple[int, int]] = []
    weights: list[float] = []
    priors: list[float] = []
    for lineno, raw in enumerate(lines, start=2):
        tok = raw.split()
        if not tok:
            continue
        try:
            if tok[0] == "v":
                if len(tok) != 2 + dim:
                    raise GraphFormatError(f"line {lineno}: vertex needs {dim} coordinates")
                if int(tok[1]) != len(positions):
                    raise GraphFormatError(f"line {lineno}: vertex ids must be dense and ordered")
                positions.append([float(x) for x in tok[2:]])
            elif tok[0] == "e":
                if len(tok) != 6:
                    raise GraphFormatError(f"line {lineno}: edge line needs 5 fields")
                if int(tok[1]) != len(weights):
                    raise GraphFormatError(f"line {lineno}: edge ids must be dense and ordered")
                a, b = int(tok[2]), int(tok[3])
                if not (0 <= a < len(positions) and 0 <= b < len(positions)):
                    raise GraphFormatError(f"line {lineno}: dangling vertex reference")
                w, p = float(tok[4]), float(tok[5])
                if not (math.isfinite(w) and w > 0):
                    raise GraphFormatError(f"line {lineno}: nonpositive weight {tok[4]}")
                endpoints.append((a, b))
                weights.append(w)
                priors.append(p)
            else:
                raise GraphFormatError(f"line {lineno}: unknown directive {tok[0]!r}")
        except ValueError as exc:
            if isinstance(exc, GraphFormatError):
                raise
            raise GraphFormatError(f"line {lineno}: {exc}") from None
    pos = np.array(positions, dtype=float).reshape(len(positions), dim)
    return Graph(pos, np.array(endpoints, dtype=np.int64).reshape(-1, 2), weights, priors, directed=directed)
