"""Acceptance criteria 1-10, one PASS/FAIL line each in the terminal summary."""

import itertools
import math
import time

import numpy as np
import pytest

from simplicial_percolation import (
    build_complex,
    build_main_urn,
    critical_probability,
    dominant_eigenpair,
    lambda_star,
    ran_config,
    run_star_process,
    two_point_config,
    validate,
)
from simplicial_percolation.bootstrap import naive_oracle_step, run_to_fixpoint, seed_infection, seed_vertices, step
from simplicial_percolation.experiments import (
    ExperimentPlan,
    check_degree_growth,
    check_splitting_times,
    check_type_frequencies,
    check_z_convergence,
    sweep_percolation,
)

from oracles import two_point_discriminant, two_point_lambda, two_point_lambda_star

MASTER_SEED = 20261015


def criterion(label):
    def wrap(fn):
        fn.criterion = label
        return fn

    return wrap


@pytest.fixture(scope="module", autouse=True)
def warm_kernels():
    # compile (or load cached) kernels outside the timed sections
    cfg = two_point_config(0.5, 0.5)
    build_complex(cfg, 10, np.random.default_rng(0))
    run_star_process(cfg, 1.0, 10, np.random.default_rng(0))


def random_valid_config(rng, d_max=5, K_max=3):
    d = int(rng.integers(3, d_max + 1))
    K = int(rng.integers(1, K_max + 1))
    values = np.sort(rng.choice(np.arange(1, 101), size=K, replace=False) / 100.0)
    probs = rng.dirichlet(np.ones(K))
    probs[-1] = 1.0 - probs[:-1].sum()
    kind = str(rng.choice(["sum", "product", "min", "max", "constant"]))
    fitness = {"kind": kind, "value": float(rng.uniform(0.5, 3))} if kind == "constant" else {"kind": kind}
    pairs = [(r, k) for r in range(1, d + 1) for k in range(1, d + 1) if r * k <= d]
    r, k = pairs[int(rng.integers(len(pairs)))]
    return validate({
        "d": d,
        "variant": str(rng.choice(["A", "B"])),
        "weights": [{"value": float(v), "prob": float(p)} for v, p in zip(values, probs)],
        "fitness": fitness,
        "r": r,
        "k": k,
        "seed": int(rng.integers(2**32)),
    })


@criterion("1 spectral exactness (RAN)")
def test_c1_ran_spectra(acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    for d in (3, 4, 5):
        for gamma in (1.0, 3.0):
            cfg = ran_config(d, gamma=gamma)
            lam = dominant_eigenpair(build_main_urn(cfg)).lam
            lam_x = lambda_star(cfg).lambda_star
            worst = max(worst, abs(lam - (d - 1) * gamma), abs(lam_x - (d - 2) * gamma))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 1.0
    acceptance("1 spectral exactness (RAN)", ok, f"max error {worst:.2e} (tol 1e-10), {elapsed:.3f}s (< 1s)")
    assert ok


@criterion("2 spectral vs closed forms")
def test_c2_two_point_grid(acceptance):
    t0 = time.perf_counter()
    grid = [0.1, 0.3, 0.5, 0.7, 0.9]
    err_lam = err_star = 0.0
    ordering_ok = ineq_ok = True
    for alpha, beta in itertools.product(grid, grid):
        cfg = two_point_config(alpha, beta)
        lam = dominant_eigenpair(build_main_urn(cfg)).lam
        star = lambda_star(cfg)
        err_lam = max(err_lam, abs(lam - two_point_lambda(alpha, beta)))
        err_star = max(err_star, abs(star.lambda_star - two_point_lambda_star(alpha, beta)))
        ordering_ok &= star.per_weight[1.0] >= star.per_weight[alpha]
        ineq_ok &= math.sqrt(two_point_discriminant(alpha, beta)) < 3 + beta - alpha * beta
    elapsed = time.perf_counter() - t0
    ok = err_lam <= 1e-9 and err_star <= 1e-9 and ordering_ok and ineq_ok and elapsed < 5.0
    acceptance("2 spectral vs closed forms", ok,
               f"25 points: |dlambda| {err_lam:.1e}, |dlambda*| {err_star:.1e} (tol 1e-9), "
               f"lambda_1>=lambda_a {ordering_ok}, strict inequality {ineq_ok}, {elapsed:.2f}s (< 5s)")
    assert ok


@criterion("3 profile bookkeeping")
def test_c3_profile_sums(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(MASTER_SEED)
    worst = 0.0
    for _ in range(50):
        cfg = random_valid_config(rng)
        rho = dominant_eigenpair(build_main_urn(cfg)).rho
        worst = max(worst, abs(rho.sum() - (cfg.d - 1 if cfg.is_model_b else cfg.d)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10.0
    acceptance("3 profile bookkeeping", ok, f"50 configs: max |sum rho - target| {worst:.1e} (tol 1e-9), {elapsed:.2f}s (< 10s)")
    assert ok


@criterion("4 growth accounting")
def test_c4_growth_accounting(acceptance):
    t0 = time.perf_counter()
    n = 10_000
    counts_ok = True
    worst = 0.0
    rng = np.random.default_rng(MASTER_SEED)
    for variant in ("A", "B"):
        for d in (3, 4, 5):
            cfg = two_point_config(0.5, 0.5, variant=variant).replace(d=d)
            cx = build_complex(cfg, n, rng)
            expected = d * n + d + 1 if variant == "A" else (d - 1) * n + d + 1
            counts_ok &= cx.alive_count == expected
            worst = max(worst, abs(cx.total_fitness - cx.recomputed_total()) / cx.recomputed_total())
    elapsed = time.perf_counter() - t0
    ok = counts_ok and worst <= 1e-6 and elapsed < 5.0
    acceptance("4 growth accounting", ok,
               f"alive counts exact {counts_ok}, max Z rel error {worst:.1e} (tol 1e-6), {elapsed:.2f}s (< 5s)")
    assert ok


@pytest.mark.slow
@criterion("5 limit laws")
def test_c5_limit_laws(acceptance):
    cfg = two_point_config(0.5, 0.5)
    n = 200_000
    plan = ExperimentPlan(cfg, n, 20, frozenset(), master_seed=MASTER_SEED, checkpoints=(n,))
    z = check_z_convergence(plan)
    tv = check_type_frequencies(plan)
    z_rel = z.summary["z_convergence"]["relative_error"]
    star_mean = z.detail[1.0].mean[-1]
    star_rel = abs(star_mean - 2.5) / 2.5
    tv_mean = tv.summary["type_frequencies"]["estimate"]
    ok = z_rel < 0.02 and tv_mean < 0.02 and star_rel < 0.02
    acceptance("5 limit laws", ok,
               f"Z/n rel err {z_rel:.2e}, mean TV {tv_mean:.4f}, Z*/n={star_mean:.4f} rel err {star_rel:.2e} (each < 0.02)")
    assert ok


@pytest.mark.slow
@criterion("6 degree exponent")
def test_c6_degree_exponent(acceptance):
    plan = ExperimentPlan(ran_config(3), 100_000, 50, frozenset(), master_seed=MASTER_SEED)
    res = check_degree_growth(plan)
    slope = res.detail.slope
    ok = 0.45 <= slope <= 0.55
    acceptance("6 degree exponent", ok, f"slope {slope:.4f} in [0.45, 0.55], checkpoints {res.detail.checkpoints}")
    assert ok


@criterion("7 bootstrap oracle equivalence")
def test_c7_oracle_equivalence(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(MASTER_SEED)
    mismatches = 0
    rounds = 0
    pairs_seen = set()
    for _ in range(500):
        cfg = random_valid_config(rng)
        pairs_seen.add((cfg.d, cfg.r, cfg.k))
        steps = int(rng.integers(0, 50 - cfg.d))
        cx = build_complex(cfg, steps, rng)
        state = seed_infection(cx, float(rng.uniform(0.0, 0.8)), rng)
        while True:
            fast = step(cx, state)
            slow = naive_oracle_step(cx, state)
            rounds += 1
            if not np.array_equal(fast.infected, slow.infected):
                mismatches += 1
                break
            if fast.frontier.size == 0:
                break
            state = fast
    elapsed = time.perf_counter() - t0
    all_pairs = {(d, r, k) for d in (3, 4, 5) for r in range(1, d + 1) for k in range(1, d + 1) if r * k <= d}
    ok = mismatches == 0 and elapsed < 30.0
    acceptance("7 bootstrap oracle equivalence", ok,
               f"500 complexes, {rounds} rounds compared, {mismatches} mismatches, "
               f"{len(pairs_seen)}/{len(all_pairs)} (d,r,k) combos, {elapsed:.1f}s (< 30s)")
    assert ok


@criterion("8 deterministic percolation")
def test_c8_seeded_simplex_percolates(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(MASTER_SEED + 8)
    hits = 0
    for _ in range(100):
        cfg = random_valid_config(rng)
        cx = build_complex(cfg, 200, rng)
        hits += run_to_fixpoint(cx, seed_vertices(cx, range(cfg.d + 1))).percolated
    elapsed = time.perf_counter() - t0
    ok = hits == 100 and elapsed < 10.0
    acceptance("8 deterministic percolation", ok, f"{hits}/100 percolated, {elapsed:.2f}s (< 10s)")
    assert ok


@pytest.mark.slow
@criterion("9 threshold behaviour")
def test_c9_threshold(acceptance):
    cfg = ran_config(4, r=2, k=1)
    n = 100_000
    pc = critical_probability(n, cfg)
    plan = ExperimentPlan(cfg, n, 200, frozenset({"sweep"}), master_seed=MASTER_SEED,
                          p_grid=(pc.p_c / 10, pc.p_c * 10))
    low, high = sweep_percolation(plan).detail
    ok = high.fraction_percolated >= 0.9 and low.fraction_percolated <= 0.1 and low.fraction_stable_at_one >= 0.9
    acceptance("9 threshold behaviour", ok,
               f"p_c={pc.p_c:.3e} ({pc.regime}); at 10p_c {high.fraction_percolated:.3f} (>= 0.9); "
               f"at p_c/10 {low.fraction_percolated:.3f} (<= 0.1), stable {low.fraction_stable_at_one:.3f} (>= 0.9)")
    assert ok


@pytest.mark.slow
@criterion("10 splitting times")
def test_c10_splitting_times(acceptance):
    cfg = two_point_config(0.5, 0.5)
    plan = ExperimentPlan(cfg, 100_000, 50, frozenset(), master_seed=MASTER_SEED, checkpoints=(10_000, 100_000))
    res = check_splitting_times(plan)
    sd = dict(zip(res.detail.checkpoints, res.detail.centered_sd))
    ratio = sd[100_000] / sd[10_000]
    mean, se = res.detail.pairwise_mean, res.detail.pairwise_se
    ok = ratio <= 1.5 and abs(mean) <= 3 * se
    acceptance("10 splitting times", ok,
               f"sd ratio {ratio:.3f} (<= 1.5); pairwise mean {mean:.2e} vs 3 SE {3 * se:.2e}")
    assert ok
