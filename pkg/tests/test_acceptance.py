"""End-to-end acceptance run.  Each test prints one PASS/FAIL line; the lines
are repeated in the pytest terminal summary.  Run directly with
``python3 -m pytest tests/test_acceptance.py -v``."""
import itertools
import math
import time

import numpy as np

from gls import bench
from gls.analysis import (
    bound_value,
    build_counterexample,
    critical_delta,
    critical_eta,
    expected_evals,
    optimal_order,
    simulate_elimination,
)
from gls.cli import gap_correlation, main
from gls.engine import CostModel, gls_run, oracle_shortest, verify_certificate
from gls.toggles import EVENT_TAGS, SELECTOR_TAGS, Forward, HeuristicProgress, ShortestPath, make_event, make_selector

from oracles import random_instance, shortest_weight

RESULTS: dict[int, str] = {}


def report(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[k] = line
    print(line)


def instances(seed: int, count: int):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        inst = random_instance(rng)
        if inst is not None:
            out.append(inst + (rng,))
    return out


# ---------------------------------------------------------------------------


def test_c1_correctness():
    t0 = time.perf_counter()
    runs = bad = cert_bad = 0
    for g, w, s, t, rng in instances(101, 500):
        best = oracle_shortest(g, w, s, t)
        # second, unrelated oracle guards the first
        assert (best is None) == math.isinf(shortest_weight(g, w.validity, s, t))
        alpha, delta = int(rng.integers(1, 4)), float(rng.uniform(0.05, 0.95))
        for ev, sel in itertools.product(EVENT_TAGS, SELECTOR_TAGS):
            r = gls_run(g, w, s, t, make_event(ev, alpha, delta), make_selector(sel))
            runs += 1
            if best is None:
                bad += r.feasible
            else:
                bad += not (r.feasible and abs(r.path.weight - best.weight) <= 1e-9)
                cert_bad += r.feasible and not verify_certificate(g, r)
    secs = time.perf_counter() - t0
    ok = bad == 0 and cert_bad == 0 and secs < 120
    report(1, ok, f"{runs} runs on 500 graphs, {bad} weight mismatches, {cert_bad} certificate failures, {secs:.1f}s")
    assert ok


def test_c2_edge_optimality():
    t0 = time.perf_counter()
    same = fewer = strict = 0
    for g, w, s, t, _ in instances(202, 200):
        sp = gls_run(g, w, s, t, ShortestPath(), Forward(), "graph")
        hp = gls_run(g, w, s, t, HeuristicProgress(), Forward(), "graph")
        same += sp.evaluation_order == hp.evaluation_order
        fewer += hp.num_rewires <= sp.num_rewires
        strict += hp.num_rewires < sp.num_rewires and not all(w.validity)
    secs = time.perf_counter() - t0
    ok = same == 200 and fewer == 200 and strict >= 1 and secs < 60
    report(2, ok, f"identical evaluation order {same}/200, rewires(hp)<=rewires(sp) {fewer}/200, "
                  f"strictly fewer on {strict}, {secs:.1f}s")
    assert ok


def test_c3_counterexample():
    t0 = time.perf_counter()
    x, y, hp_max, edges_ok = [], [], 0, True
    for N in (25, 50, 100, 200):
        for l in (4, 8, 16, 32):
            ce = build_counterexample(N, l)
            edges_ok &= ce.graph.num_edges == 3 * N + 2 * l - 1
            args = (ce.graph, ce.world, ce.source, ce.target)
            sp = gls_run(*args, ShortestPath(), Forward(), "zero")
            hp = gls_run(*args, HeuristicProgress(), Forward(), "graph")
            x.append(N * l)
            y.append(sp.num_rewires)
            hp_max = max(hp_max, hp.num_rewires)
    x, y = np.array(x, float), np.array(y, float)
    c = x @ y / (x @ x)
    r2 = 1 - ((y - c * x) ** 2).sum() / ((y - y.mean()) ** 2).sum()
    secs = time.perf_counter() - t0
    ok = r2 >= 0.99 and hp_max == 0 and edges_ok and secs < 30
    report(3, ok, f"rewires ~ {c:.4f}*N*l with R^2={r2:.5f}, max heuristic-progress rewires {hp_max}, "
                  f"edge counts {'exact' if edges_ok else 'WRONG'}, {secs:.1f}s")
    assert ok


def scaled_expected_evals(ks, D):
    """expected_evals of priors k/D times D**n, in integers."""
    n = len(ks)
    total, prefix = 0, 1
    for i, k in enumerate(ks, start=1):
        total += prefix * (D - k) * i * D ** (n - i)
        prefix *= k
    return total


def test_c4_failfast_order():
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    D = 1000
    agree = 0
    for _ in range(1000):
        n = int(rng.integers(1, 8))
        ks = [int(k) for k in rng.integers(0, D + 1, size=n)]
        if rng.random() < 0.3:  # force ties now and then
            ks[int(rng.integers(n))] = ks[0]
        sorted_val = scaled_expected_evals([ks[i] for i in optimal_order(ks)], D)
        best = min(scaled_expected_evals(list(p), D) for p in set(itertools.permutations(ks)))
        # the package's own float answer must agree with the exact one
        assert math.isclose(expected_evals([k / D for k in sorted(ks)]), sorted_val / D ** n, rel_tol=1e-12, abs_tol=1e-12)
        agree += sorted_val == best
    secs = time.perf_counter() - t0
    ok = agree == 1000 and secs < 30
    report(4, ok, f"ascending order optimal on {agree}/1000 prior vectors (exact integer arithmetic), {secs:.1f}s")
    assert ok


def golden_section(f, a, b, tol=1e-11):
    inv = (math.sqrt(5) - 1) / 2
    c, d = b - inv * (b - a), a + inv * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return (a + b) / 2


def test_c5_critical_delta():
    t0 = time.perf_counter()
    rng = np.random.default_rng(505)
    inside = flat = agree = 0
    worst_deriv = worst_gap = 0.0
    for _ in range(100):
        r, b, p = float(rng.uniform(1, 100)), int(rng.integers(2, 33)), float(rng.uniform(0.5, 0.99))
        d = critical_delta(r, 1.0, b, p)
        inside += 0 < d < 1
        f = lambda x: bound_value(x, r, 1.0, b, p)
        h = 1e-6
        deriv = abs(f(d + h) - f(d - h)) / (2 * h)
        worst_deriv = max(worst_deriv, deriv)
        flat += deriv < 1e-6
        gap = abs(golden_section(f, 1e-9, 1 - 1e-9) - d)
        worst_gap = max(worst_gap, gap)
        agree += gap <= 1e-6
    # the ranges above top out near eta = 37, so the large-eta limit gets its own tuples
    large = 0
    worst_limit = 0.0
    for _ in range(100):
        r, b, p = float(rng.uniform(1e3, 1e5)), int(rng.integers(2, 33)), float(rng.uniform(0.5, 0.99))
        eta = critical_eta(r, 1.0, b, p)
        if eta < 50:
            continue
        large += 1
        worst_limit = max(worst_limit, abs(critical_delta(r, 1.0, b, p) - 1 / eta))
    secs = time.perf_counter() - t0
    ok = inside == flat == agree == 100 and large > 0 and worst_limit <= 1e-3 and secs < 10
    report(5, ok, f"in (0,1) {inside}/100, |dB/d delta|<1e-6 {flat}/100 (worst {worst_deriv:.1e}), "
                  f"golden-section within 1e-6 {agree}/100 (worst {worst_gap:.1e}), "
                  f"max |delta-1/eta| {worst_limit:.1e} over {large} tuples with eta>=50, {secs:.1f}s")
    assert ok


def test_c6_evaluation_term():
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    parts, ok = [], True
    for delta in (0.1, 0.3, 0.5):
        x = simulate_elimination(delta, 8, 10_000, rng)
        se = x.std(ddof=1) / math.sqrt(len(x))
        limit = 1 / (1 - delta) + 3 * se
        ok &= x.mean() <= limit
        parts.append(f"delta={delta}: {x.mean():.4f} <= {limit:.4f}")
    secs = time.perf_counter() - t0
    ok &= secs < 60
    report(6, ok, "; ".join(parts) + f", {secs:.1f}s")
    assert ok


# ---------------------------------------------------------------------------
# desk-scale trends

C7_SEED = 2024
C7_ALPHAS = (1, 2, 4, 8, 16, 32)
C7_DELTAS = (0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5)
C7_TUNE_WORLDS = 10
C7_SIZES = (250, 500, 1000, 2000, 4000)
C7_SCALING_WORLDS = 6


def beats(a, b):
    return sum(x < y for x, y in zip(a, b))


def test_c7_trends():
    t0 = time.perf_counter()
    cost = CostModel()  # ratio 29.04
    ds = bench.generate_dataset("twowall", 1000, C7_SEED, 50, 50)
    graph = ds.graph.with_priors(bench.train_priors(ds.graph, ds.train).priors)

    # alpha* and delta* by median cost on training worlds
    tune_cases = ds.train[:C7_TUNE_WORLDS]
    cd_best, _ = bench.tune(graph, tune_cases, [bench.RunConfig("cd", "ff", alpha=a) for a in C7_ALPHAS], cost)
    se_best, _ = bench.tune(graph, tune_cases, [bench.RunConfig("se", "ff", delta=d) for d in C7_DELTAS], cost)
    alpha, delta = cd_best.alpha, se_best.delta

    costs = {}
    for ev in ("sp", "cd", "se"):
        for sel in ("f", "a", "ff"):
            cfg = bench.RunConfig(ev, sel, alpha=alpha, delta=delta)
            rows = bench.run_bench(graph, ds.test, [cfg], cost)
            costs[ev, sel] = [r.cost_total if r.feasible else math.inf for r in rows]
    W = len(ds.test)
    se_ff = costs["se", "ff"]
    wins_sp = beats(se_ff, costs["sp", "ff"])
    wins_cd = beats(se_ff, costs["cd", "ff"])
    wins_both = sum(x < min(y, z) for x, y, z in zip(se_ff, costs["sp", "ff"], costs["cd", "ff"]))
    h1 = wins_both >= 0.7 * W
    sel_parts, h2 = [], True
    for ev in ("sp", "cd", "se"):
        vf, va = beats(costs[ev, "ff"], costs[ev, "f"]), beats(costs[ev, "ff"], costs[ev, "a"])
        h2 &= vf >= 0.6 * W and va >= 0.6 * W
        sel_parts.append(f"{ev}: ff<f {vf}/{W}, ff<a {va}/{W}")

    points = bench.scaling_sweep("twowall", C7_SIZES, C7_SEED, 50, C7_SCALING_WORLDS,
                                 [bench.RunConfig("sp", "ff"), bench.RunConfig("se", "ff", delta=delta)],
                                 cost=cost)
    rho, pval = gap_correlation(points)
    h3 = rho > 0 and pval < 0.05
    secs = time.perf_counter() - t0
    medians = ", ".join(f"{ev}+ff {np.median(costs[ev, 'ff']):.4f}s" for ev in ("sp", "cd", "se"))
    ok = h1 and h2 and h3 and secs < 900
    report(7, ok,
           f"alpha*={alpha} delta*={delta:g}; medians {medians}; "
           f"[{'ok' if h1 else 'miss'}] se+ff cheaper than both sp+ff and cd+ff on {wins_both}/{W} "
           f"(vs sp {wins_sp}/{W}, vs cd {wins_cd}/{W}); "
           f"[{'ok' if h2 else 'miss'}] {'; '.join(sel_parts)}; "
           f"[{'ok' if h3 else 'miss'}] spearman(n, gap)={rho:.3f} p={pval:.2g}; {secs:.0f}s")
    assert ok


def test_c8_determinism(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        assert main(["generate", "--graph", str(d / "g.txt"), "--worlds", str(d / "w"), "--n", "300",
                     "--train", "8", "--test", "4", "--seed", "77"]) == 0
        assert main(["train", "--graph", str(d / "g.txt"), "--worlds", str(d / "w" / "train"),
                     "--out", str(d / "p.txt")]) == 0
        assert main(["bench", "--graph", str(d / "g.txt"), "--priors", str(d / "p.txt"),
                     "--worlds", str(d / "w" / "test"), "--event", "sp,cd,hp,se", "--selector", "f,a,ff",
                     "--alpha", "3", "--delta", "0.1", "--seed", "77",
                     "--out", str(d / "b.csv"), "--summary", str(d / "s.txt")]) == 0
        lines = (d / "b.csv").read_text().splitlines()
        assert lines[0].endswith(",wall_ms")
        outs.append("\n".join(ln.rsplit(",", 1)[0] for ln in lines).encode())
    ok = outs[0] == outs[1]
    rows = outs[0].count(b"\n")
    report(8, ok, f"two bench runs, {rows} rows each, "
                  f"{'byte-identical' if ok else 'DIFFERENT'} with wall_ms removed")
    assert ok
