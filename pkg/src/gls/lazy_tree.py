"""Lazily extended shortest-path tree with subtree repair after edge invalidation.

The tree is grown best-first from the source over every edge not known to be
invalid.  Each vertex carries

* ``rhs`` - cost through its current parent (finite once the vertex is in the tree),
* ``g``   - the cost it was settled (expanded) with; ``inf`` while on the frontier.

A vertex is *settled* when it is popped and expanded.  When an edge of the tree
is found invalid, the whole subtree hanging below it is detached at once; each
detached vertex takes the best parent among the settled vertices outside the
subtree and returns to the frontier.  Because the frontier then only holds
vertices whose ``rhs`` is exact with respect to the settled set, a consistent
heuristic guarantees every settlement is final until the next invalidation.

Frontier order is ``(rhs + h, -rhs, vertex id)``: lowest f first, ties toward
the deeper vertex, then toward the smaller id.

A rewire is counted each time a vertex is settled with a parent different from
the one it had when it was last settled.  First settlements never count.
"""
from __future__ import annotations

import heapq
from collections import Counter
from enum import IntEnum
from typing import Sequence

import numpy as np

from .graph import Graph, Path

INF = float("inf")

UNKNOWN = 0
VALID = 1
INVALID = 2

_NEVER = -2  # last_parent marker for vertices that were never settled


class EdgeStatus(IntEnum):
    UNKNOWN = UNKNOWN
    VALID = VALID
    INVALID = INVALID


class RewireLog:
    """Multiset of rewired vertex ids, in the order the rewires happened."""

    def __init__(self):
        self.vertices: list[int] = []

    def append(self, vid: int) -> None:
        self.vertices.append(vid)

    @property
    def total(self) -> int:
        return len(self.vertices)

    def counts(self) -> Counter:
        return Counter(self.vertices)

    def __len__(self) -> int:
        return len(self.vertices)

    def __repr__(self) -> str:
        return f"RewireLog(total={self.total})"


class InfeasibleError(RuntimeError):
    pass


class LazyTree:
    def __init__(self, graph: Graph, source: int, heuristic: Sequence[float]):
        n = graph.num_vertices
        if not 0 <= source < n:
            raise ValueError(f"source {source} is not a vertex")
        if len(heuristic) != n:
            raise ValueError("heuristic must give one value per vertex")
        self.graph = graph
        self.source = source
        self.h: list[float] = [float(x) for x in heuristic]
        self.status = bytearray(graph.num_edges)
        self.closed = bytearray(n)
        # numpy views share memory with the bytearrays above
        self._status_np = np.frombuffer(self.status, dtype=np.uint8) if graph.num_edges else np.zeros(0, np.uint8)
        self._closed_np = np.frombuffer(self.closed, dtype=np.uint8)
        self.g = np.full(n, INF)
        self.rhs = np.full(n, INF)
        self.parent = [-1] * n
        self.parent_edge = [-1] * n
        self.children: list[set[int]] = [set() for _ in range(n)]
        self.last_parent = [_NEVER] * n
        self.rewires = RewireLog()
        self.expansions = 0
        self._out = graph.csr()
        self._in = graph.csr(incoming=True)
        self._stamp = [0] * n
        self._heap: list[tuple[float, float, int, int]] = []
        self._heap_limit = 4 * n + 64
        # cached (unknown edge count, product of unknown priors) for settled vertices
        self._epoch = 0
        self._stats_epoch = [-1] * n
        self._stats_unknown = [0] * n
        self._stats_prob = [1.0] * n

        self.rhs[source] = 0.0
        self._push(source, 0.0)

    # -- frontier -------------------------------------------------------------

    def _push(self, v: int, rhs: float) -> None:
        self._stamp[v] += 1
        f = rhs + self.h[v]
        if f == INF:
            return  # cannot reach the target from here
        heapq.heappush(self._heap, (f, -rhs, v, self._stamp[v]))

    def _compact(self) -> None:
        stamp = self._stamp
        self._heap = [e for e in self._heap if e[3] == stamp[e[2]]]
        heapq.heapify(self._heap)

    def top(self) -> int:
        """Frontier vertex with the least key, or -1 when the frontier is empty."""
        if len(self._heap) > self._heap_limit:
            self._compact()
        heap, stamp = self._heap, self._stamp
        while heap:
            entry = heap[0]
            if entry[3] == stamp[entry[2]]:
                return entry[2]
            heapq.heappop(heap)
        return -1

    def key(self, v: int) -> tuple[float, float, int]:
        r = float(self.rhs[v])
        return (r + self.h[v], -r, v)

    def in_tree(self, v: int) -> bool:
        return bool(self.rhs[v] < INF)

    # -- growth ---------------------------------------------------------------

    def settle(self, v: int) -> None:
        """Pop ``v`` off the frontier and expand it."""
        heapq.heappop(self._heap)
        self._stamp[v] += 1
        gv = float(self.rhs[v])
        self.g[v] = gv
        self.closed[v] = 1
        self.expansions += 1
        p = self.parent[v]
        last = self.last_parent[v]
        if last != _NEVER and last != p:
            self.rewires.append(v)
        self.last_parent[v] = p

        indptr, nbr, eid, wts = self._out
        lo, hi = indptr[v], indptr[v + 1]
        if lo == hi:
            return
        nb = nbr[lo:hi]
        ee = eid[lo:hi]
        cost = wts[lo:hi] + gv
        rhs = self.rhs
        better = (cost < rhs[nb]) & (self._closed_np[nb] == 0) & (self._status_np[ee] != INVALID)
        if not better.any():
            return
        parent, parent_edge, children = self.parent, self.parent_edge, self.children
        kids = children[v]
        for u, e, c in zip(nb[better].tolist(), ee[better].tolist(), cost[better].tolist()):
            op = parent[u]
            if op >= 0:
                children[op].discard(u)
            parent[u] = v
            parent_edge[u] = e
            rhs[u] = c
            kids.add(u)
            self._push(u, c)

    def extend(self, event, target: int) -> int | None:
        """Grow the tree until ``event`` fires on the frontier vertex about to be
        settled; return that vertex, or ``None`` if the frontier runs dry."""
        while True:
            v = self.top()
            if v < 0:
                return None
            if event.triggered(self, v, target):
                return v
            self.settle(v)

    # -- evaluation -----------------------------------------------------------

    def apply_evaluation(self, eid: int, valid: bool) -> list[int]:
        """Record an evaluation outcome; an invalid tree edge detaches and
        re-queues its subtree.  Returns the detached vertices."""
        if self.status[eid] != UNKNOWN:
            raise ValueError(f"edge {eid} was already evaluated")
        self._epoch += 1
        if valid:
            self.status[eid] = VALID
            return []
        self.status[eid] = INVALID
        a, b = self.graph.endpoint_list[eid]
        if self.parent_edge[b] == eid:
            child = b
        elif not self.graph.directed and self.parent_edge[a] == eid:
            child = a
        else:
            return []

        children, parent, parent_edge, stamp = self.children, self.parent, self.parent_edge, self._stamp
        subtree = []
        stack = [child]
        while stack:
            x = stack.pop()
            subtree.append(x)
            stack.extend(children[x])
        children[parent[child]].discard(child)
        for x in subtree:
            children[x].clear()
            parent[x] = -1
            parent_edge[x] = -1
            stamp[x] += 1
        sub = np.array(subtree, dtype=np.int64)
        self.g[sub] = INF
        self.rhs[sub] = INF
        self._closed_np[sub] = 0

        # best settled parent outside the subtree; unsettled vertices have g = inf
        indptr, nbr, eids, wts = self._in
        starts = indptr[sub]
        lens = indptr[sub + 1] - starts
        seg = np.cumsum(lens) - lens
        total = int(lens.sum())
        flat = np.repeat(starts - seg, lens) + np.arange(total)
        nb = nbr[flat]
        ee = eids[flat]
        vals = self.g[nb] + wts[flat]
        vals[self._status_np[ee] == INVALID] = INF
        best = np.minimum.reduceat(vals, seg)
        pos = np.where(vals == np.repeat(best, lens), np.arange(total), total)
        first = np.minimum.reduceat(pos, seg)  # first minimum in adjacency order
        ok = np.isfinite(best)
        if ok.any():
            pick = first[ok]
            rhs = self.rhs
            for x, c, u, e in zip(sub[ok].tolist(), best[ok].tolist(), nb[pick].tolist(), ee[pick].tolist()):
                rhs[x] = c
                parent[x] = u
                parent_edge[x] = e
                children[u].add(x)
                self._push(x, c)
        return subtree

    # -- queries --------------------------------------------------------------

    def subpath_stats(self, v: int) -> tuple[int, float]:
        """(number of unevaluated edges, product of their priors) on the tree
        path from the source to ``v``."""
        parent, parent_edge, closed = self.parent, self.parent_edge, self.closed
        ep, su, sp = self._stats_epoch, self._stats_unknown, self._stats_prob
        epoch = self._epoch
        status = self.status
        priors = self.graph.prior_list

        chain = []
        x = v
        while x != self.source and not (closed[x] and ep[x] == epoch):
            if parent[x] < 0:
                raise ValueError(f"vertex {v} is not in the tree")
            chain.append(x)
            x = parent[x]
        if x == self.source:
            unk, prob = 0, 1.0
        else:
            unk, prob = su[x], sp[x]
        for x in reversed(chain):
            e = parent_edge[x]
            if status[e] == UNKNOWN:
                unk += 1
                prob *= priors[e]
            if closed[x]:
                ep[x], su[x], sp[x] = epoch, unk, prob
        return unk, prob

    def shortest_subpath(self, leaf: int) -> Path:
        """Tree path from the source to ``leaf`` (parent-pointer walk)."""
        if self.rhs[leaf] == INF:
            raise ValueError(f"vertex {leaf} is not in the tree")
        verts = [leaf]
        edges = []
        x = leaf
        while x != self.source:
            edges.append(self.parent_edge[x])
            x = self.parent[x]
            verts.append(x)
        verts.reverse()
        edges.reverse()
        total = 0.0
        wl = self.graph.weight_list
        for e in edges:
            total += wl[e]
        return Path(tuple(verts), tuple(edges), total)

    def check_invariants(self) -> None:
        """Assert the tree invariants; meant for tests."""
        wl = self.graph.weight_list
        assert self.rhs[self.source] == 0.0 and self.parent[self.source] == -1
        for v in range(self.graph.num_vertices):
            if v == self.source or self.rhs[v] == INF:
                continue
            p, e = self.parent[v], self.parent_edge[v]
            assert p >= 0 and self.closed[p], f"parent of {v} is not settled"
            assert self.status[e] != INVALID, f"invalid edge {e} on the tree"
            assert self.rhs[v] == self.g[p] + wl[e], f"rhs of {v} disagrees with its parent"
            if self.closed[v]:
                assert self.g[v] == self.rhs[v]
            assert v in self.children[p]


# ---------------------------------------------------------------------------
# heuristics


def zero_heuristic(graph: Graph, target: int | None = None) -> list[float]:
    return [0.0] * graph.num_vertices


def euclidean_heuristic(graph: Graph, target: int) -> list[float]:
    d = graph.positions - graph.positions[target]
    return np.sqrt(np.einsum("ij,ij->i", d, d)).tolist()


def graph_distance_heuristic(graph: Graph, target: int) -> list[float]:
    """Exact distance to ``target`` on the graph with every edge assumed valid.

    Removing edges can only lengthen distances, so this stays admissible and
    consistent whatever is later found invalid.
    """
    n = graph.num_vertices
    if not 0 <= target < n:
        raise ValueError(f"target {target} is not a vertex")
    dist = [INF] * n
    dist[target] = 0.0
    done = bytearray(n)
    heap = [(0.0, target)]
    in_adj = graph.in_adj
    while heap:
        d, x = heapq.heappop(heap)
        if done[x]:
            continue
        done[x] = 1
        for u, _, w in in_adj[x]:
            c = d + w
            if c < dist[u]:
                dist[u] = c
                heapq.heappush(heap, (c, u))
    return dist


HEURISTICS = {
    "euclidean": euclidean_heuristic,
    "graph": graph_distance_heuristic,
    "zero": zero_heuristic,
}


def resolve_heuristic(graph: Graph, target: int, heuristic) -> list[float]:
    if heuristic is None:
        heuristic = "euclidean"
    if isinstance(heuristic, str):
        try:
            return HEURISTICS[heuristic](graph, target)
        except KeyError:
            raise ValueError(f"unknown heuristic {heuristic!r}") from None
    return list(heuristic)
