"""Events decide when tree growth stops; selectors decide which edge to evaluate.

Every event also fires at the target, and never fires at another vertex whose
subpath is already fully evaluated, so each halt leaves something to evaluate
or ends the search.
"""
from __future__ import annotations

import logging
import math
from typing import Sequence

from .graph import Path
from .lazy_tree import UNKNOWN, LazyTree

log = logging.getLogger(__name__)

EVENT_TAGS = ("sp", "cd", "hp", "se")
SELECTOR_TAGS = ("f", "a", "ff")
PRESETS = ("lazysp", "lwa", "lra", "gls-se")


class Event:
    tag = ""

    def reset(self) -> None:
        pass

    def triggered(self, tree: LazyTree, v: int, target: int) -> bool:
        raise NotImplementedError

    def notify_evaluated(self, tree: LazyTree, eid: int, child: int, valid: bool) -> None:
        """Called after each evaluation; ``child`` is the edge endpoint farther
        from the source along the subpath."""

    def describe(self) -> str:
        return self.tag


class ShortestPath(Event):
    tag = "sp"

    def triggered(self, tree, v, target):
        return v == target

    def __repr__(self):
        return "ShortestPath()"


class ConstantDepth(Event):
    tag = "cd"

    def __init__(self, alpha: int = 1):
        if isinstance(alpha, bool) or int(alpha) != alpha or alpha < 1:
            raise ValueError(f"alpha must be a positive integer, got {alpha!r}")
        self.alpha = int(alpha)

    def triggered(self, tree, v, target):
        if v == target:
            return True
        # the tree settles one edge at a time, so the first vertex with at
        # least alpha unknown edges has exactly alpha of them
        return tree.subpath_stats(v)[0] >= self.alpha

    def describe(self):
        return f"cd({self.alpha})"

    def __repr__(self):
        return f"ConstantDepth({self.alpha})"


class HeuristicProgress(Event):
    tag = "hp"

    def __init__(self):
        self.h_min = math.inf

    def reset(self):
        self.h_min = math.inf

    def triggered(self, tree, v, target):
        if v == target:
            return True
        return tree.h[v] < self.h_min and tree.subpath_stats(v)[0] > 0

    def notify_evaluated(self, tree, eid, child, valid):
        h = tree.h[child]
        if h < self.h_min:
            self.h_min = h

    def __repr__(self):
        return "HeuristicProgress()"


class SubpathExistence(Event):
    tag = "se"

    def __init__(self, delta: float):
        delta = float(delta)
        if not 0.0 < delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {delta}")
        if delta == 1.0:
            log.warning("delta = 1 fires on every subpath with an unevaluated edge")
        self.delta = delta

    def triggered(self, tree, v, target):
        if v == target:
            return True
        unknown, prob = tree.subpath_stats(v)
        return unknown > 0 and prob <= self.delta

    def describe(self):
        return f"se({self.delta:g})"

    def __repr__(self):
        return f"SubpathExistence({self.delta!r})"


class Selector:
    tag = ""

    def reset(self) -> None:
        pass

    def select(self, path: Path, status: Sequence[int], priors: Sequence[float]) -> int:
        raise NotImplementedError


def _unknown(path: Path, status: Sequence[int]) -> list[int]:
    edges = [e for e in path.edges if status[e] == UNKNOWN]
    if not edges:
        raise ValueError("subpath has no unevaluated edge")
    return edges


class Forward(Selector):
    tag = "f"

    def select(self, path, status, priors):
        return _unknown(path, status)[0]

    def __repr__(self):
        return "Forward()"


class Alternate(Selector):
    tag = "a"

    def __init__(self):
        self.calls = 0

    def reset(self):
        self.calls = 0

    def select(self, path, status, priors):
        edges = _unknown(path, status)
        self.calls += 1
        return edges[0] if self.calls % 2 == 1 else edges[-1]

    def __repr__(self):
        return "Alternate()"


class FailFast(Selector):
    tag = "ff"

    def select(self, path, status, priors):
        # min() keeps the first minimum, i.e. the one nearest the source
        return min(_unknown(path, status), key=lambda e: priors[e])

    def __repr__(self):
        return "FailFast()"


def make_event(tag: str, alpha: int = 1, delta: float = 0.01) -> Event:
    if tag == "sp":
        return ShortestPath()
    if tag == "cd":
        return ConstantDepth(alpha)
    if tag == "hp":
        return HeuristicProgress()
    if tag == "se":
        return SubpathExistence(delta)
    raise ValueError(f"unknown event {tag!r}; expected one of {', '.join(EVENT_TAGS)}")


def make_selector(tag: str) -> Selector:
    if tag == "f":
        return Forward()
    if tag == "a":
        return Alternate()
    if tag == "ff":
        return FailFast()
    raise ValueError(f"unknown selector {tag!r}; expected one of {', '.join(SELECTOR_TAGS)}")


def preset(name: str, *, alpha: int = 1, delta: float = 0.01,
           selector: str = "f") -> tuple[Event, Selector]:
    """Named (event, selector) pairs matching well-known lazy planners."""
    if name == "lazysp":
        return ShortestPath(), make_selector(selector)
    if name == "lwa":
        return ConstantDepth(1), Forward()
    if name == "lra":
        return ConstantDepth(alpha), Forward()
    if name == "gls-se":
        return SubpathExistence(delta), FailFast()
    raise ValueError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
