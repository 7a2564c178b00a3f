"""Acceptance gate: ten end-to-end properties the package must satisfy.

Each test pins its tolerances and seeds; the conftest hook prints one
PASS/FAIL line per criterion in the terminal summary. Oracles are
independent constructions (closed forms, finite differences, grid
quadrature, dense matrix identities), not the package's own formulas.
"""

import csv
import json
import time

import numpy as np
import pytest
from scipy.special import logit

from orbandit import (
    ContinuousScenario,
    ExperimentConfig,
    GaussianBelief,
    PolicyKind,
    RoundData,
    ScenarioRound,
    UpdateMode,
    allocation_proportions,
    build_c_f,
    build_c_ind,
    compose_reindex,
    drift_environment,
    fit_map,
    hessian_lambda,
    laplace_update,
    make_flat_belief,
    marginalize_drop_last,
    run_continuous,
    run_replications,
    sample,
    transform,
    two_regime_schedule,
)
from orbandit.cli import main as cli_main
from oracles import dense_objective, fd_hessian, grid_allocation_probs

ALL_POLICIES = (PolicyKind.BETA_TS, PolicyKind.FULL_TS, PolicyKind.OR_TS)


def random_proper_belief(k, rng, ridge=0.5):
    root = rng.normal(size=(k, k))
    return GaussianBelief(rng.normal(size=k), root @ root.T + ridge * np.eye(k))


def test_acceptance_01_posterior_mode_oracle():
    """Flat-prior MAP equals the closed-form saturated-model logits and the
    posterior precision equals the weighted arrow matrix at the mode."""
    started = time.perf_counter()
    n = np.array([100, 100, 100, 100])
    c = np.array([30, 31, 28, 35])
    data = RoundData(n, c)

    mode = fit_map(data, make_flat_belief(4))
    rates = c / 100.0
    expected = np.array(
        [
            logit(rates[0]) - logit(rates[3]),
            logit(rates[1]) - logit(rates[3]),
            logit(rates[2]) - logit(rates[3]),
            logit(rates[3]),
        ]
    )
    np.testing.assert_allclose(mode, expected, atol=1e-8)

    posterior = laplace_update(make_flat_belief(4), data)
    # independent entry-by-entry arrow table with weights n * p * (1 - p)
    weights = n * rates * (1.0 - rates)
    table = np.zeros((4, 4))
    for i in range(3):
        table[i, i] = weights[i]
        table[i, 3] = weights[i]
        table[3, i] = weights[i]
    table[3, 3] = weights.sum()
    np.testing.assert_allclose(posterior.precision, table, atol=1e-10)
    np.testing.assert_allclose(posterior.mean, expected, atol=1e-8)

    assert time.perf_counter() - started < 1.0


def test_acceptance_02_hessian_finite_difference_oracle():
    """Analytic curvature matches the finite-difference Hessian of the
    flat-prior objective at 20 random points, within 1e-4 relative."""
    started = time.perf_counter()
    rng = np.random.default_rng(20240201)
    cases = [2] * 7 + [5] * 7 + [10] * 6
    for k in cases:
        n = rng.integers(20, 300, size=k)
        c = rng.binomial(n, rng.uniform(0.1, 0.9))
        data = RoundData(n, c)
        mu = rng.normal(size=k)
        analytic = hessian_lambda(mu, data)
        numeric = fd_hessian(dense_objective(n, c), mu, h=1e-3)
        scale = max(1.0, float(np.linalg.norm(analytic)))
        assert np.linalg.norm(numeric - analytic) / scale < 1e-4
    assert time.perf_counter() - started < 5.0


def test_acceptance_03_reference_invariance():
    """Relabeling arms permutes allocation proportions and commutes with
    the map to per-arm-logit coordinates."""
    started = time.perf_counter()
    rng = np.random.default_rng(20240301)
    k = 5
    c_ind = build_c_ind(k)
    for _ in range(20):
        belief = random_proper_belief(k, rng)
        perm = tuple(int(i) for i in rng.permutation(k))

        moved = transform(belief, compose_reindex(perm, k))
        base = allocation_proportions(belief, 100_000, np.random.default_rng(7))
        relabeled = allocation_proportions(moved, 100_000, np.random.default_rng(8))
        expected = np.empty(k)
        expected[list(perm)] = base.p
        np.testing.assert_allclose(relabeled.p, expected, atol=0.01)

        # both routes to per-arm logits must agree: reindex-then-map
        # versus map-then-permute
        route_a = transform(moved, c_ind)
        route_b = transform(transform(belief, c_ind), build_c_f(perm))
        np.testing.assert_allclose(route_a.mean, route_b.mean, atol=1e-8)
        np.testing.assert_allclose(route_a.precision, route_b.precision, atol=1e-8)
    assert time.perf_counter() - started < 30.0


def test_acceptance_04_marginalization_consistency():
    """Dropping the last coordinate reproduces the leading covariance block."""
    rng = np.random.default_rng(20240401)
    for index in range(100):
        k = 2 + index % 9
        belief = random_proper_belief(k, rng)
        marginal = marginalize_drop_last(belief)
        np.testing.assert_allclose(
            marginal.covariance(), belief.covariance()[:-1, :-1], atol=1e-10
        )
        np.testing.assert_allclose(marginal.mean, belief.mean[:-1], atol=1e-12)


def test_acceptance_05_allocation_quadrature_oracle():
    """Monte Carlo proportions for three arms match 2-D grid quadrature of
    the argmax probabilities within 0.01."""
    rng = np.random.default_rng(20240501)
    for _ in range(10):
        belief = random_proper_belief(3, rng)
        mc = allocation_proportions(belief, 100_000, np.random.default_rng(11))
        cov = belief.covariance()
        quad = grid_allocation_probs(belief.mean[:2], cov[:2, :2])
        np.testing.assert_allclose(mc.p, quad, atol=0.01)


def test_acceptance_06_stationary_regret_parity():
    """Ten stationary arms (0.31 vs nine at 0.30): the two full-rank
    policies land within 25% of each other, and the odds-ratio policy pays
    at most a factor-two premium over full-rank."""
    started = time.perf_counter()
    config = ExperimentConfig(
        arms=10,
        rounds=50,
        trials_per_round=10_000,
        replications=20,
        policy=PolicyKind.OR_TS,
        seed=1001,
        n_draws=10_000,
        d=0.0,
    )
    spec = drift_environment(10, 0.31, 0.30, 0.0)
    summary = run_replications(config, spec, policies=ALL_POLICIES, jobs=4)
    final = {p: float(summary.mean_cumulative_regret(p)[-1]) for p in ALL_POLICIES}
    beta = final[PolicyKind.BETA_TS]
    full = final[PolicyKind.FULL_TS]
    odds = final[PolicyKind.OR_TS]

    assert max(beta, full) <= 1.25 * min(beta, full), (beta, full)
    assert full <= odds <= 2.0 * full, (full, odds)
    assert time.perf_counter() - started < 600.0


def test_acceptance_07_drift_robustness():
    """Under shared drift of twenty logit gaps the odds-ratio policy has the
    lowest mean cumulative regret and wins most paired replications."""
    config = ExperimentConfig(
        arms=10,
        rounds=50,
        trials_per_round=10_000,
        replications=20,
        policy=PolicyKind.OR_TS,
        seed=1001,
        n_draws=10_000,
        d=20.0,
    )
    spec = drift_environment(10, 0.31, 0.30, 20.0)
    summary = run_replications(config, spec, policies=ALL_POLICIES, jobs=4)
    final_curves = {p: summary.cumulative_regret(p)[:, -1] for p in ALL_POLICIES}
    means = {p: float(curve.mean()) for p, curve in final_curves.items()}

    assert means[PolicyKind.OR_TS] < means[PolicyKind.BETA_TS], means
    assert means[PolicyKind.OR_TS] < means[PolicyKind.FULL_TS], means
    wins = np.sum(
        (final_curves[PolicyKind.OR_TS] < final_curves[PolicyKind.BETA_TS])
        & (final_curves[PolicyKind.OR_TS] < final_curves[PolicyKind.FULL_TS])
    )
    assert wins >= 16, f"odds-ratio policy lowest in only {wins} of 20 replications"


def test_acceptance_08_two_regime_uplift():
    """A large shared logit drop mid-experiment (with day-to-day jitter):
    the odds-ratio policy collects at least as many expected clicks as each
    baseline, with a positive mean uplift."""
    spec = two_regime_schedule(
        (0.035, 0.030, 0.030, 0.030),
        block_rounds=(10, 8),
        boundary_shift=-1.0,
        daily_sigma=0.25,
        trials=20_000,
        seed=0,
    )
    config = ExperimentConfig(
        arms=4,
        rounds=18,
        trials_per_round=20_000,
        replications=20,
        policy=PolicyKind.OR_TS,
        seed=42,
        n_draws=10_000,
    )
    summary = run_replications(config, spec, policies=ALL_POLICIES, jobs=4)
    clicks = {p: summary.total_expected_clicks(p) for p in ALL_POLICIES}
    for baseline in (PolicyKind.BETA_TS, PolicyKind.FULL_TS):
        assert clicks[PolicyKind.OR_TS].sum() >= clicks[baseline].sum(), baseline
        uplift = float(np.mean(clicks[PolicyKind.OR_TS] - clicks[baseline]))
        assert uplift > 0.0, (baseline, uplift)


def test_acceptance_09_continuous_transitivity():
    """Arms never observed together are still comparable through shared
    arms: after {A,B,C} then {B,C,D}, the posterior puts high probability
    on A beating D even though the two never ran concurrently."""
    hits = 0
    for seed in range(20):
        rounds = (
            ScenarioRound(("A", "B", "C"), {"A": 0.35, "B": 0.30, "C": 0.30}, 5000),
            ScenarioRound(("B", "C", "D"), {"B": 0.30, "C": 0.30, "D": 0.25}, 5000),
        )
        scenario = ContinuousScenario(
            rounds, mode=UpdateMode.ODDS_RATIO, seed=seed, n_draws=10_000
        )
        result = run_continuous(scenario)
        registry = result.registry
        draws = sample(registry.belief, 4096, np.random.default_rng(seed + 10_000))
        idx_a = registry.arms.index("A")
        idx_d = registry.arms.index("D")
        if float(np.mean(draws[:, idx_a] > draws[:, idx_d])) > 0.9:
            hits += 1
    assert hits >= 18, f"ordering recovered in only {hits} of 20 seeds"


def test_acceptance_10_manifest_determinism(tmp_path):
    """Rerunning a simulation from its own manifest reproduces the CSV
    outputs byte for byte."""
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "arms": 3,
                "rounds": 5,
                "trials": 1000,
                "replications": 2,
                "policy": "all",
                "seed": 7,
                "n_draws": 2000,
                "d": 0.0,
            }
        ),
        encoding="utf-8",
    )
    first = tmp_path / "first"
    second = tmp_path / "second"
    assert cli_main(["simulate", "--config", str(config_path), "--out", str(first)]) == 0
    assert (
        cli_main(
            ["simulate", "--config", str(first / "manifest.json"), "--out", str(second)]
        )
        == 0
    )
    for name in ("regret.csv", "summary.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
