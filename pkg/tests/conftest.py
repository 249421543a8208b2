import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gls.graph import Graph  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def diamond():
    """s=0 -> a=1 -> t=3 (cost 2) and s -> b=2 -> t (cost 3)."""
    pos = [(0, 0), (1, 1), (1, -1), (2, 0)]
    ends = [(0, 1), (1, 3), (0, 2), (2, 3)]
    weights = [1.0, 1.0, 1.5, 1.5]
    return Graph(pos, ends, weights)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
