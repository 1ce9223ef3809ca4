import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simplicial_percolation import (
    build_main_urn,
    build_star_urn,
    critical_probability,
    dominant_eigenpair,
    lambda_star,
    ran_config,
    two_point_config,
    validate,
)
from simplicial_percolation.config import WeightDistribution, enumerate_face_types
from simplicial_percolation.urn import (
    NoConvergence,
    NotIrreducible,
    UrnSpec,
    WeightNotInSupport,
    is_irreducible,
    spectra_report,
)

from oracles import (
    exact_offspring_row_sums,
    largest_root_by_bisection,
    two_point_lambda,
    two_point_lambda_star,
    two_point_matrices,
)

GRID = [(a, b) for a in (0.1, 0.35, 0.5, 0.8, 1.0) for b in (0.05, 0.3, 0.5, 0.7, 0.95)]


def random_config(seed: int, d_max: int = 5, K_max: int = 3, table: bool = True):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(3, d_max + 1))
    K = int(rng.integers(1, K_max + 1))
    values = np.sort(rng.choice(np.arange(1, 101), size=K, replace=False) / 100.0)
    probs = rng.dirichlet(np.ones(K))
    probs[-1] = 1.0 - probs[:-1].sum()
    mu = WeightDistribution.from_atoms(list(zip(values.tolist(), probs.tolist())))
    doc = {
        "d": d,
        "variant": str(rng.choice(["A", "B"])),
        "weights": [{"value": v, "prob": p} for v, p in mu.atoms],
    }
    if table:
        types = enumerate_face_types(d, mu)
        doc["fitness"] = {
            "kind": "table",
            "table": [{"weights": list(t.weights), "value": float(rng.uniform(0.1, 5.0))} for t in types],
        }
    else:
        doc["fitness"] = {"kind": str(rng.choice(["sum", "product", "min", "max"]))}
    return validate(doc)


# --- worked example matrices -------------------------------------------------

def test_main_urn_first_row(half_half):
    B = build_main_urn(half_half).replacement
    assert B[0] == pytest.approx([2 - 1.5, 1.5, 0, 0], abs=1e-15)


def test_generator_second_row(half_half):
    A = build_main_urn(half_half).generator
    a, b = 0.5, 0.5
    assert A[1] == pytest.approx([(2 * a + 1) * (1 - b), (2 * a + 1) * (1 - b), 2 * (2 * a + 1) * b, 0], abs=1e-15)


@pytest.mark.parametrize("alpha,beta", [(0.3, 0.2), (0.5, 0.5), (0.9, 0.75)])
def test_full_matrices_match_hand_written(alpha, beta):
    cfg = two_point_config(alpha, beta)
    ref = two_point_matrices(alpha, beta)
    main = build_main_urn(cfg)
    star = build_star_urn(cfg, 1.0)
    np.testing.assert_allclose(main.replacement, ref["B"], atol=1e-14)
    np.testing.assert_allclose(main.generator, ref["A"], atol=1e-14)
    np.testing.assert_allclose(star.replacement, ref["B_star"], atol=1e-14)
    np.testing.assert_allclose(star.generator, ref["A_star"], atol=1e-14)


def test_star_urn_rows(half_half):
    star = build_star_urn(half_half, 1.0)
    assert star.replacement[0] == pytest.approx([1 - 1.0, 1.0, 0], abs=1e-15)
    assert star.generator[2] == pytest.approx([0, 6 * 0.5, 3 * (1.0 - 1)], abs=1e-15)


def test_single_weight_urns():
    cfg = ran_config(3, gamma=2.5)
    main = build_main_urn(cfg)
    assert main.replacement.tolist() == [[2.0]]
    assert main.generator.tolist() == [[5.0]]
    for d in (3, 4, 6):
        assert build_star_urn(ran_config(d), 1.0).replacement.tolist() == [[d - 2.0]]


def test_star_urn_rejects_foreign_weight(half_half):
    with pytest.raises(WeightNotInSupport):
        build_star_urn(half_half, 0.7)


# --- eigenpairs --------------------------------------------------------------

@pytest.mark.parametrize("d", [3, 4, 5, 6])
@pytest.mark.parametrize("gamma", [1.0, 3.0, 0.25])
def test_ran_rates(d, gamma):
    cfg = ran_config(d, gamma=gamma)
    assert dominant_eigenpair(build_main_urn(cfg)).lam == pytest.approx((d - 1) * gamma, abs=1e-12)
    assert lambda_star(cfg).lambda_star == pytest.approx((d - 2) * gamma, abs=1e-12)


@pytest.mark.parametrize("beta", [0.1, 0.5, 0.9])
def test_alpha_one_reduces_to_ran(beta):
    cfg = two_point_config(1.0, beta)
    assert dominant_eigenpair(build_main_urn(cfg)).lam == pytest.approx(6.0, abs=1e-10)
    assert lambda_star(cfg).lambda_star == pytest.approx(3.0, abs=1e-10)


def test_half_half_values(half_half):
    lam = dominant_eigenpair(build_main_urn(half_half)).lam
    assert lam == pytest.approx((6.75 + math.sqrt(6.5625)) / 2, abs=1e-12)
    assert lam == pytest.approx(4.655868845744939, abs=1e-12)
    star = lambda_star(half_half)
    assert star.lambda_star == pytest.approx(2.5, abs=1e-12)
    assert star.argmax_weight == 1.0
    assert star.per_weight[0.5] == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("alpha,beta", GRID)
def test_closed_forms_on_grid(alpha, beta):
    cfg = two_point_config(alpha, beta)
    assert dominant_eigenpair(build_main_urn(cfg)).lam == pytest.approx(two_point_lambda(alpha, beta), abs=1e-9)
    star = lambda_star(cfg)
    assert star.lambda_star == pytest.approx(two_point_lambda_star(alpha, beta), abs=1e-9)
    assert star.per_weight[1.0] >= star.per_weight[alpha] - 1e-12


def test_single_weight_lambda_star_is_its_only_rate():
    star = lambda_star(ran_config(4, gamma=2.0))
    assert list(star.per_weight) == [1.0]
    assert star.lambda_star == star.per_weight[1.0]
    assert star.ties == ()


def test_ties_go_to_largest_weight():
    cfg = validate({
        "d": 3, "variant": "B",
        "weights": [{"value": 0.2, "prob": 0.5}, {"value": 0.9, "prob": 0.5}],
        "fitness": {"kind": "constant", "value": 1.0},
    })
    star = lambda_star(cfg)
    assert star.argmax_weight == 0.9
    assert star.ties == (0.2, 0.9)


@pytest.mark.parametrize("seed", range(20))
def test_profile_normalisation_and_residuals(seed):
    cfg = random_config(seed)
    urn = build_main_urn(cfg)
    res = dominant_eigenpair(urn)
    A = urn.generator
    norm = np.abs(A).sum(axis=1).max()
    assert np.max(np.abs(A @ res.v - res.lam * res.v)) <= 1e-9 * norm
    assert np.max(np.abs(res.u @ A - res.lam * res.u)) <= 1e-9 * norm
    assert res.v.sum() == pytest.approx(1.0, abs=1e-12)
    assert res.u @ res.v == pytest.approx(1.0, abs=1e-12)
    assert np.all(res.v > 0) and np.all(res.u > 0)
    assert res.rho.sum() == pytest.approx(cfg.d - (1 if cfg.is_model_b else 0), abs=1e-9)
    assert res.type_distribution.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(40))
def test_power_iteration_matches_characteristic_polynomial(seed):
    cfg = random_config(1000 + seed, d_max=4, K_max=2)
    urn = build_main_urn(cfg)
    if urn.q > 4:
        cfg = random_config(1000 + seed, d_max=3, K_max=2)
        urn = build_main_urn(cfg)
    assert urn.q <= 4
    ref = largest_root_by_bisection(urn.generator)
    assert dominant_eigenpair(urn).lam == pytest.approx(ref, abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_row_sum_law(seed):
    cfg = random_config(seed, d_max=6, K_max=4)
    B = build_main_urn(cfg).replacement
    expected = cfg.d - (1 if cfg.is_model_b else 0)
    np.testing.assert_allclose(B.sum(axis=1), expected, atol=1e-12)
    types = [t.atoms for t in cfg.face_types]
    exact = exact_offspring_row_sums(types, cfg.mu.probs, cfg.is_model_b)
    np.testing.assert_allclose(B.sum(axis=1), [float(x) for x in exact], atol=1e-12)


def test_reducible_urn_reported():
    types = tuple(enumerate_face_types(3, WeightDistribution.from_atoms([(0.5, 0.5), (1.0, 0.5)])))
    B = np.eye(4) * 2.0
    urn = UrnSpec(types, np.ones(4), B, "B")
    assert not is_irreducible(urn)
    with pytest.raises(NotIrreducible):
        dominant_eigenpair(urn)


def test_iteration_cap_reported(half_half):
    with pytest.raises(NoConvergence):
        dominant_eigenpair(build_main_urn(half_half), max_iter=2)


# --- critical probability ----------------------------------------------------

def test_ran3_r2_is_log_corrected():
    pc = critical_probability(10_000, ran_config(3, r=2))
    assert pc.exponent == pytest.approx(-0.5, abs=1e-12)
    assert pc.regime == "log_corrected"
    assert pc.p_c == pytest.approx(0.01, rel=1e-9)


def test_ran4_r2_is_strict():
    pc = critical_probability(10**5, ran_config(4, r=2))
    assert pc.exponent == pytest.approx(-2 / 3, abs=1e-12)
    assert pc.regime == "strict"


def test_equal_rates_give_one_over_n(monkeypatch):
    from simplicial_percolation import urn as urn_mod
    from simplicial_percolation.urn import StarSpectralSummary

    monkeypatch.setattr(urn_mod, "lambda_main", lambda cfg: 3.0)
    monkeypatch.setattr(urn_mod, "lambda_star", lambda cfg: StarSpectralSummary({1.0: 3.0}, 3.0, 1.0))
    pc = urn_mod.critical_probability(500, ran_config(3, r=1, k=1))
    assert pc.exponent == -1.0
    assert pc.p_c == pytest.approx(1 / 500, rel=1e-15)
    assert pc.regime == "log_corrected"


def test_two_point_ratio_condition_strict_below_one():
    for alpha, beta in GRID:
        disc = (16 * alpha**2 - 8 * alpha + 1 + alpha**2 * beta**2 - 2 * alpha * beta**2 + beta**2
                + 14 * beta + 2 * alpha * beta - 16 * alpha**2 * beta)
        if alpha < 1:
            assert math.sqrt(disc) < 3 + beta - alpha * beta
        cfg = two_point_config(alpha, beta)
        assert critical_probability(1000, cfg).ratio >= 1.0 - 1e-12


def test_spectra_report_keys(half_half):
    rep = spectra_report(half_half, n=1000)
    assert set(rep) >= {"lambda", "lambda_x", "lambda_star", "argmax_weight", "rho", "u", "v",
                        "pc_exponent", "regime", "p_c"}
    assert set(rep["lambda_x"]) == {"0.5", "1.0"}
    assert rep["regime"] == "strict"
