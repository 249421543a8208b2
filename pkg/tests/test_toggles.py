import logging

import pytest

from gls.graph import Graph, Path
from gls.lazy_tree import INVALID, UNKNOWN, VALID, LazyTree, zero_heuristic
from gls.toggles import (
    EVENT_TAGS,
    SELECTOR_TAGS,
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


def line_graph(n, priors=None):
    """0 - 1 - ... - (n-1) with unit weights."""
    return Graph([(i, 0) for i in range(n)], [(i, i + 1) for i in range(n - 1)],
                 [1.0] * (n - 1), priors)


PATH5 = Path((0, 1, 2, 3, 4, 5), (0, 1, 2, 3, 4), 5.0)


class TestSelectors:
    def test_forward_skips_evaluated(self):
        status = [VALID, UNKNOWN, UNKNOWN, VALID, UNKNOWN]
        assert Forward().select(PATH5, status, [0.5] * 5) == 1

    def test_alternate_sequence(self):
        sel = Alternate()
        status = [UNKNOWN] * 5
        picks = []
        for _ in range(4):
            e = sel.select(PATH5, status, [0.5] * 5)
            picks.append(e)
            status[e] = VALID
        assert picks == [0, 4, 1, 3]
        sel.reset()
        assert sel.select(PATH5, [UNKNOWN] * 5, [0.5] * 5) == 0

    def test_failfast_picks_least_likely(self):
        priors = [0.9, 0.4, 0.2, 0.7, 0.2]
        assert FailFast().select(PATH5, [UNKNOWN] * 5, priors) == 2
        status = [UNKNOWN, UNKNOWN, VALID, UNKNOWN, UNKNOWN]
        assert FailFast().select(PATH5, status, priors) == 4

    def test_failfast_tie_goes_to_source(self):
        assert FailFast().select(PATH5, [UNKNOWN] * 5, [0.3] * 5) == 0

    @pytest.mark.parametrize("tag", SELECTOR_TAGS)
    def test_nothing_to_select(self, tag):
        with pytest.raises(ValueError):
            make_selector(tag).select(PATH5, [VALID] * 5, [0.5] * 5)

    @pytest.mark.parametrize("tag", SELECTOR_TAGS)
    def test_ignores_invalid_status(self, tag):
        status = [INVALID, UNKNOWN, INVALID, INVALID, INVALID]
        assert make_selector(tag).select(PATH5, status, [0.1] * 5) == 1


class TestEvents:
    def grown(self, n=6, priors=None):
        g = line_graph(n, priors)
        return LazyTree(g, 0, zero_heuristic(g))

    def test_shortest_path_runs_to_target(self):
        assert self.grown().extend(ShortestPath(), 5) == 5

    @pytest.mark.parametrize("alpha", [1, 2, 3])
    def test_constant_depth_stops_at_alpha(self, alpha):
        assert self.grown().extend(ConstantDepth(alpha), 5) == alpha

    def test_constant_depth_counts_only_unknown(self):
        tree = self.grown()
        tree.apply_evaluation(0, True)
        tree.apply_evaluation(1, True)
        assert tree.extend(ConstantDepth(2), 5) == 4

    def test_constant_depth_still_fires_at_target(self):
        assert self.grown(3).extend(ConstantDepth(10), 2) == 2

    def test_existence_threshold(self):
        tree = self.grown(priors=[0.9] * 5)
        # 0.9^k <= 0.75 first at k = 3
        assert tree.extend(SubpathExistence(0.75), 5) == 3

    def test_existence_ignores_evaluated_edges(self):
        tree = self.grown(priors=[0.9] * 5)
        tree.apply_evaluation(0, True)
        assert tree.extend(SubpathExistence(0.75), 5) == 4

    def test_existence_delta_one_fires_immediately(self, caplog):
        with caplog.at_level(logging.WARNING):
            ev = SubpathExistence(1.0)
        assert "delta" in caplog.text
        assert self.grown(priors=[0.9] * 5).extend(ev, 5) == 1

    def test_heuristic_progress(self):
        g = line_graph(6)
        h = [5.0, 4.0, 3.0, 2.0, 1.0, 0.0]
        tree = LazyTree(g, 0, h)
        ev = HeuristicProgress()
        # h_min starts at infinity, so the first vertex with an unknown edge fires
        assert tree.extend(ev, 5) == 1
        tree.apply_evaluation(0, True)
        ev.notify_evaluated(tree, 0, 1, True)
        assert ev.h_min == 4.0
        assert tree.extend(ev, 5) == 2
        ev.reset()
        assert ev.h_min == float("inf")

    @pytest.mark.parametrize("tag", EVENT_TAGS)
    def test_never_fires_on_evaluated_subpath(self, tag):
        g = line_graph(6, [0.5] * 5)
        tree = LazyTree(g, 0, zero_heuristic(g))
        tree.apply_evaluation(0, True)
        tree.apply_evaluation(1, True)
        leaf = tree.extend(make_event(tag, alpha=1, delta=0.9), 5)
        # vertices 1 and 2 sit behind evaluated edges only
        assert leaf == (5 if tag == "sp" else 3)


class TestFactories:
    @pytest.mark.parametrize("alpha", [0, -1, 1.5, True])
    def test_bad_alpha(self, alpha):
        with pytest.raises(ValueError):
            ConstantDepth(alpha)

    @pytest.mark.parametrize("delta", [0.0, -0.1, 1.01])
    def test_bad_delta(self, delta):
        with pytest.raises(ValueError):
            SubpathExistence(delta)

    def test_unknown_tags(self):
        with pytest.raises(ValueError):
            make_event("xx")
        with pytest.raises(ValueError):
            make_selector("b")
        with pytest.raises(ValueError):
            preset("dijkstra")

    def test_presets(self):
        ev, sel = preset("lazysp")
        assert isinstance(ev, ShortestPath) and isinstance(sel, Forward)
        ev, sel = preset("lwa")
        assert isinstance(ev, ConstantDepth) and ev.alpha == 1
        ev, _ = preset("lra", alpha=4)
        assert ev.alpha == 4
        ev, sel = preset("gls-se", delta=0.2)
        assert ev.delta == 0.2 and isinstance(sel, FailFast)

    def test_describe(self):
        assert make_event("cd", alpha=3).describe() == "cd(3)"
        assert make_event("se", delta=0.25).describe() == "se(0.25)"
        assert make_event("sp").describe() == "sp"
