"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v``; the lines are
written straight to the terminal so they show without ``-s``.
"""

from __future__ import annotations

import itertools
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from vbqc.adversary import (
    depolarizing_noise,
    estimate_p_bounds,
    exact_failure_probability,
    sample_sigma_m_outcomes,
)
from vbqc.bounds import (
    BoundParams,
    InfeasibleError,
    RobustnessParams,
    abort_probability_bound,
    asymptotic_rate,
    binomial_cdf_exact,
    binomial_sf_exact,
    binomial_tail_bound,
    correctness_epsilon,
    feasible_omega_sup,
    hypergeom_cdf_exact,
    hypergeom_lower_tail_bound,
    hypergeom_sf_exact,
    hypergeom_upper_tail_bound,
    log_verifiability_bound,
    optimize_verifiability_bound,
)
from vbqc.graph import (
    Graph,
    bipartite_colouring,
    colouring_from_classes,
    greedy_colouring,
    validate_colouring,
)
from vbqc.harness import ExperimentConfig, blindness_test, monte_carlo, sigma_m_sweep
from vbqc.library import BUILTINS, builtin
from vbqc.protocol import ProtocolParams, presample_count
from vbqc.ubqc import (
    execute_run,
    expected_trap_outcome,
    reference_output,
    sample_test_secrets,
)

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        assert ok, detail

    return emit


def sigma(p: float, trials: int) -> float:
    return math.sqrt(p * (1 - p) / trials)


# 1 -------------------------------------------------------------------------------


def test_criterion_01_honest_determinism(report):
    start = time.perf_counter()
    problems = []
    for name in sorted(BUILTINS):
        p = builtin(name)
        x = tuple(1 for _ in p.graph.inputs)
        ref = reference_output(p, x)
        for d in (1, 3, 5):
            cfg = ExperimentConfig(pattern=name, params={"n": d + 2, "d": d, "t": 2, "w": 1}, trials=1000,
                                   seed=d, input=x)
            s = monte_carlo(cfg)
            if s.correct_accept != 1000 or s.mean_c_fail != 0.0:
                problems.append((name, d, s.to_dict()))
            assert ref == reference_output(p, x)
    elapsed = time.perf_counter() - start
    ok = not problems and elapsed < 60
    report(1, ok, f"12000 honest executions, all accept with reference output, 0 trap failures; "
                  f"{elapsed:.1f}s (< 60s); problems={problems}")


# 2 -------------------------------------------------------------------------------


def random_colouring(p, rng: random.Random):
    """A proper colouring from greedy on a shuffled order, with classes randomly split."""
    order = list(p.vertices)
    rng.shuffle(order)
    classes = [list(cl) for cl in greedy_colouring(p.graph, order).classes()]
    out = []
    for cl in classes:
        if len(cl) > 1 and rng.random() < 0.3:
            cut = rng.randint(1, len(cl) - 1)
            out += [cl[:cut], cl[cut:]]
        else:
            out.append(cl)
    c = colouring_from_classes(out)
    assert validate_colouring(p.graph, c)
    return c


def test_criterion_02_trap_relation(report):
    rng = random.Random(2)
    nrng = np.random.default_rng(2)
    names = sorted(BUILTINS)
    traps = mismatches = 0
    for i in range(10_000):
        p = builtin(names[i % len(names)])
        c = random_colouring(p, rng)
        s = sample_test_secrets(p, c, rng.randrange(c.k), nrng)
        tr = execute_run(p, s, None, None, nrng)
        for v in s.traps:
            traps += 1
            # independent recomputation of r_v xor the neighbour dummy bits
            want = s.r[v] ^ (sum(s.dummies[u] for u in p.graph.neighbours(v)) % 2)
            assert want == expected_trap_outcome(v, s, p.graph)
            mismatches += tr.outcomes[v] != want
    report(2, mismatches == 0, f"10^4 honest test runs, {traps} traps, {mismatches} relation violations")


# 3 -------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_03_blindness(report):
    rep = blindness_test(ExperimentConfig(pattern="five_vertex", seed=3), samples=10_000)
    d = rep.to_dict()
    report(3, rep.passed(), f"five_vertex, 10^4 transcripts: min Bonferroni p {d['uniformity_min_adjusted_p']}, "
                            f"AUC {d['auc']}, control p {d['control_min_p']:.2e}")


# 4 -------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_04_verifiability_bound(report):
    p = builtin("brickwork")
    c = bipartite_colouring(p.graph, p.order)
    omega, trials = 0.2, 100_000
    lines, ok = [], True
    for n in (8, 16, 32):
        d = n // 2
        t = n - d
        params = ProtocolParams(n, d, t, math.ceil(omega * t), c.k)
        bound = optimize_verifiability_bound(n, d, t, c.k, omega).value
        cells = sigma_m_sweep(p, c, params, trials, seed=n)
        worst = max(cell.frequency for cell in cells)
        ok &= worst <= bound
        lines.append(f"n={n}: {len(cells)} cells, max freq {worst:.4f} <= bound {bound:.3f}")
        if n == 8:
            off = []
            for cell in cells:
                exact = exact_failure_probability(n, d, c.k, params.w, cell.m).strict
                if abs(cell.frequency - exact) > 3 * sigma(exact, trials):
                    off.append((cell.m, cell.target, cell.frequency, exact))
            ok &= not off
            lines.append(f"n=8 exact vs MC outside 3 sigma: {off}")
    report(4, ok, "; ".join(lines))


# 5 -------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_05_exponential_decay(report):
    k, omega, trials = 2, 0.1, 100_000
    rng = np.random.default_rng(5)
    worst_emp, worst_exact = [], []
    for n in (8, 16, 32, 64):
        d = n // 2
        w = math.ceil(omega * (n - d))
        freqs = []
        for m in range(n + 1):
            y, z = sample_sigma_m_outcomes(n, d, k, m, trials, rng)
            freqs.append(float(np.mean((y < w) & (2 * z >= d))))
        worst_emp.append(max(freqs))
        if n <= 16:
            worst_exact.append(max(exact_failure_probability(n, d, k, w, m).strict for m in range(n + 1)))
    mono = all(a >= b for a, b in zip(worst_emp, worst_emp[1:]))

    rate, triple = asymptotic_rate(k, omega, 0.5)
    # fixed triple: the closed form is linear in n, so consecutive slopes equal the rate
    logs = [log_verifiability_bound(BoundParams(n, n // 2, n // 2, k, triple["eps1"], triple["eps2"], triple["phi"]))
            for n in (8, 16, 32, 64)]
    slopes = [-(b - a) / (n // 2) for (a, b), n in zip(zip(logs, logs[1:]), (16, 32, 64))]
    fixed_ok = all(abs(s / rate - 1) <= 0.10 for s in slopes)
    # optimised bound: slope approaches the rate once n is large
    lo = optimize_verifiability_bound(1 << 14, 1 << 13, 1 << 13, k, omega).log_value
    hi = optimize_verifiability_bound(1 << 15, 1 << 14, 1 << 14, k, omega).log_value
    opt_slope = -(hi - lo) / (1 << 14)
    opt_ok = abs(opt_slope / rate - 1) <= 0.10
    ok = mono and fixed_ok and opt_ok
    report(5, ok, f"omega=0.1 worst-case-over-m empirical {np.round(worst_emp, 4).tolist()} "
                  f"(exact n<=16 {np.round(worst_exact, 4).tolist()}) nonincreasing={mono}; "
                  f"rate {rate:.6f}, fixed-triple slopes {np.round(slopes, 6).tolist()}, "
                  f"optimised slope at n=2^14..2^15 {opt_slope:.6f}")


# 6 -------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_06_noise_robustness(report):
    p = builtin("brickwork")
    c = bipartite_colouring(p.graph, p.order)
    # per-colour failure 1 - (1 - level/2)^5 = 0.1 for five vertices per colour
    level = 2 * (1 - 0.9 ** (1 / 5))
    noise = depolarizing_noise(level)
    est = estimate_p_bounds(noise, p, c, trials=4000, seed=6)
    lines = [f"measured p_min {est.p_min:.4f} p_max {est.p_max:.4f}"]
    ok = abs(est.p_max - 0.10) <= 0.01 and 0.05 < est.p_min
    behaviour = {"kind": "depolarizing", "p": level}

    def run(n, omega, trials, engine):
        cfg = ExperimentConfig(pattern="brickwork", colouring="bipartite", params={"n": n, "omega": omega},
                               behaviour=behaviour, trials=trials, seed=n, engine=engine)
        return monte_carlo(cfg)

    # w = ceil(omega t): abort means Y >= w >= omega t, accept means Y <= w - 1 < omega t,
    # so both bounds hold at the nominal omega
    for n, engine, trials in ((100, "classical", 1000), (16, "quantum", 400)):
        hi = run(n, 0.2, trials, engine)
        eps = min(1.0, correctness_epsilon(RobustnessParams(est.p_min, est.p_max, 0.2, 0.5, 0.5, n)))
        ok &= hi.correct_accept_rate >= 1 - eps
        lo = run(n, 0.05, trials, engine)
        bound = abort_probability_bound(est.p_min, 0.05, 0.5, n)
        ok &= lo.accept_rate <= bound
        lines.append(f"{engine} n={n}: omega=0.2 accept-and-correct {hi.correct_accept_rate:.3f} >= "
                     f"1 - {eps:.3f}; omega=0.05 accept {lo.accept_rate:.3f} <= {bound:.3f}")
    report(6, ok, "; ".join(lines))


# 7 -------------------------------------------------------------------------------


def test_criterion_07_tail_bounds(report):
    rng = random.Random(7)
    slack = 1e-12
    bad = {"hypergeometric lower": 0, "hypergeometric upper": 0, "binomial": 0}
    counts = dict.fromkeys(bad, 0)

    def draw():
        N = rng.randint(2, 300)
        K = rng.randint(1, N - 1)
        n = rng.randint(1, N)
        return N, K, n, n * K / N

    while counts["hypergeometric lower"] < 1000:
        N, K, n, mean = draw()
        lam = rng.uniform(0, mean)
        if lam <= 0:
            continue
        counts["hypergeometric lower"] += 1
        bad["hypergeometric lower"] += hypergeom_cdf_exact(N, K, n, lam) > hypergeom_lower_tail_bound(N, K, n, lam) + slack
    while counts["hypergeometric upper"] < 1000:
        N, K, n, mean = draw()
        lam = rng.uniform(mean, n)
        if lam <= mean:
            continue
        counts["hypergeometric upper"] += 1
        bad["hypergeometric upper"] += hypergeom_sf_exact(N, K, n, lam) > hypergeom_upper_tail_bound(N, K, n, lam) + slack
    while counts["binomial"] < 1000:
        n = rng.randint(1, 500)
        q = rng.random()
        side = rng.choice(["lower", "upper"])
        cutoff = rng.uniform(0, n * q) if side == "lower" else rng.uniform(n * q, n)
        exact = binomial_cdf_exact(n, q, cutoff) if side == "lower" else binomial_sf_exact(n, q, cutoff)
        counts["binomial"] += 1
        bad["binomial"] += exact > binomial_tail_bound(n, q, cutoff, side) + slack
    # swapping marked and unmarked items turns an upper tail into a lower tail
    sym_bad = checked = 0
    while checked < 1000:
        N, K, n, mean = draw()
        lam = rng.uniform(mean, n)
        if not mean < lam < n:
            continue
        checked += 1
        up = hypergeom_upper_tail_bound(N, K, n, lam)
        low = hypergeom_lower_tail_bound(N, N - K, n, n - lam)
        x = math.ceil(lam)
        sym_bad += not math.isclose(up, low, rel_tol=1e-12)
        sym_bad += not math.isclose(hypergeom_sf_exact(N, K, n, x), hypergeom_cdf_exact(N, N - K, n, n - x),
                                    rel_tol=1e-12, abs_tol=1e-300)
    ok = not any(bad.values()) and sym_bad == 0
    report(7, ok, f"1000 instances per bound, violations {bad}; symmetry violations {sym_bad}/1000")


# 8 -------------------------------------------------------------------------------


def test_criterion_08_threshold_feasibility(report):
    ok = feasible_omega_sup(2) == 0.25 and feasible_omega_sup(4) == 0.125
    details = []
    for k, sup in ((2, 0.25), (4, 0.125)):
        inside = optimize_verifiability_bound(64, 32, 32, k, sup - 1e-6)
        details.append(f"k={k} sup {feasible_omega_sup(k)} feasible just below (bound {inside.value:.3g})")
        try:
            optimize_verifiability_bound(64, 32, 32, k, sup)
        except InfeasibleError:
            details.append(f"k={k} infeasible at {sup}")
        else:
            ok = False
    report(8, ok, "; ".join(details))


# 9 -------------------------------------------------------------------------------


def bipartite_bruteforce(g: Graph) -> bool:
    for bits in itertools.product((0, 1), repeat=len(g.vertices)):
        col = dict(zip(g.vertices, bits))
        if all(col[a] != col[b] for a, b in g.edges):
            return True
    return False


def test_criterion_09_colouring(report):
    rng = random.Random(9)
    greedy_bad = 0
    for _ in range(100):
        n = rng.randint(1, 30)
        g = Graph(tuple(range(n)), tuple(e for e in itertools.combinations(range(n), 2) if rng.random() < rng.random()))
        order = list(g.vertices)
        rng.shuffle(order)
        c = greedy_colouring(g, order)
        greedy_bad += not (c.k <= g.max_degree + 1 and validate_colouring(g, c))
    graphs = disagree = 0
    for n in range(1, 11):
        for _ in range(60):
            density = rng.random()
            g = Graph(tuple(range(n)), tuple(e for e in itertools.combinations(range(n), 2) if rng.random() < density))
            found = bipartite_colouring(g)
            graphs += 1
            disagree += (found is not None) != bipartite_bruteforce(g)
            if found is not None:
                disagree += not (found.k <= 2 and validate_colouring(g, found))
    ok = greedy_bad == 0 and disagree == 0
    report(9, ok, f"greedy degree-bound violations {greedy_bad}/100; bipartite disagreements {disagree}/{graphs}")


# 10 ------------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_10_redo_neutrality(report):
    trials = 10_000
    base = ExperimentConfig(pattern="brickwork", colouring="bipartite", params={"n": 10, "d": 5, "t": 5, "w": 1},
                            behaviour={"kind": "depolarizing", "p": 0.04}, trials=trials, seed=10,
                            engine="classical")
    a = monte_carlo(base)
    b = monte_carlo(ExperimentConfig(**{**base.to_dict(), "redo": {"server_rate": 0.1}, "seed": 11,
                                        "classes": None}))
    checks = {}
    for name, x, y in (("accept", a.accept_rate, b.accept_rate),
                       ("correct_accept", a.correct_accept_rate, b.correct_accept_rate)):
        pooled = (x + y) / 2
        checks[name] = (x, y, abs(x - y) <= 3 * math.sqrt(2) * sigma(pooled, trials))
    # failed traps per execution: compare means with the sample spread of a Binomial(t, q)
    q = a.mean_c_fail / 5
    spread = math.sqrt(2 * 5 * q * (1 - q) / trials)
    checks["mean_c_fail"] = (a.mean_c_fail, b.mean_c_fail, abs(a.mean_c_fail - b.mean_c_fail) <= 3 * spread)
    grid_bad = [(n, ps) for n in range(1, 60) for ps in ("0.05", "0.1", "0.25", "0.3", "0.5", "0.7", "0.9", "1")
                if presample_count(n, float(ps)) != math.ceil(Fraction(n) / Fraction(ps))]
    ok = all(v[2] for v in checks.values()) and not grid_bad and b.redo_total > 0
    report(10, ok, f"10^4 trials each, redo total {b.redo_total}: "
                   + ", ".join(f"{k} {x:.4f} vs {y:.4f}" for k, (x, y, _) in checks.items())
                   + f"; presample grid mismatches {grid_bad}")
