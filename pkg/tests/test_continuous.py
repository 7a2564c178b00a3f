"""Continuous experiments: registries, continuity, re-anchoring, planning."""

import numpy as np
import pytest

from orbandit import (
    ArmRegistry,
    Continuity,
    ContinuityError,
    ContinuousScenario,
    GaussianBelief,
    RoundData,
    ScenarioRound,
    UnknownArmError,
    UpdateMode,
    absorb_round,
    check_continuity,
    marginalize_keep,
    plan_round,
    reanchor_reference,
    run_continuous,
    sample,
)


def seeded_registry(successes=(20, 15, 10), trials=(50, 50, 50)):
    registry = ArmRegistry.empty()
    data = RoundData(np.array(trials), np.array(successes))
    return absorb_round(registry, ("A", "B", "C"), data, UpdateMode.ODDS_RATIO)


# --- continuity --------------------------------------------------------------


def test_fresh_registry_reports_reinitialize():
    assert check_continuity(("A", "B"), ArmRegistry.empty()) is Continuity.REINITIALIZE


def test_two_shared_arms_continue_the_bandit():
    registry = seeded_registry()
    assert check_continuity(("B", "C", "D"), registry) is Continuity.CONTINUE_BANDIT


def test_single_shared_arm_breaks_continuity():
    registry = seeded_registry()
    assert check_continuity(("C", "D", "E"), registry) is Continuity.REINITIALIZE


def test_absorb_round_raises_on_broken_continuity():
    registry = seeded_registry()
    data = RoundData(np.array([10, 10]), np.array([2, 3]))
    with pytest.raises(ContinuityError):
        absorb_round(registry, ("D", "E"), data, UpdateMode.ODDS_RATIO)


# --- registry bookkeeping -----------------------------------------------------


def test_first_round_tracks_arms_with_last_as_reference():
    registry = seeded_registry()
    assert registry.arms == ("A", "B", "C")
    assert registry.reference == "C"
    assert registry.round == 1
    assert registry.belief.is_proper()


def test_new_arms_insert_before_reference():
    registry = seeded_registry()
    data = RoundData(np.array([60, 60, 60]), np.array([25, 20, 15]))
    registry = absorb_round(registry, ("B", "C", "D"), data, UpdateMode.ODDS_RATIO)
    assert registry.arms == ("A", "B", "D", "C")
    assert registry.reference == "C"
    assert registry.round == 2


def test_untracked_arm_keeps_flat_marginal_until_observed():
    registry = seeded_registry()
    data = RoundData(np.array([60, 60, 60]), np.array([25, 20, 15]))
    registry = absorb_round(registry, ("A", "B", "C"), data, UpdateMode.ODDS_RATIO)
    # absorb a third round introducing D but giving it no successes yet
    data3 = RoundData(np.array([40, 40, 0, 40]), np.array([15, 12, 0, 10]))
    registry = absorb_round(
        registry, ("A", "B", "D", "C"), data3, UpdateMode.ODDS_RATIO
    )
    d_index = registry.arms.index("D")
    assert registry.belief.precision[d_index, d_index] == 0.0


def test_reanchor_moves_reference_and_preserves_distribution():
    registry = seeded_registry()
    moved = reanchor_reference(registry, "A")
    assert moved.reference == "A"
    assert set(moved.arms) == {"A", "B", "C"}
    # the joint law is unchanged: compare per-arm logit beliefs via sampling
    rng = np.random.default_rng(0)
    def arm_logits(reg, draws):
        scores = sample(reg.belief, draws, rng)
        logits = scores.copy()
        logits[:, :-1] += logits[:, -1:]
        return {arm: logits[:, i] for i, arm in enumerate(reg.arms)}
    old = arm_logits(registry, 200_000)
    new = arm_logits(moved, 200_000)
    for arm in ("A", "B", "C"):
        assert abs(old[arm].mean() - new[arm].mean()) < 0.01
        assert abs(old[arm].std() - new[arm].std()) < 0.01


def test_reanchor_to_unknown_arm_raises():
    with pytest.raises(UnknownArmError):
        reanchor_reference(seeded_registry(), "Z")


def test_reanchor_to_current_reference_is_identity():
    registry = seeded_registry()
    same = reanchor_reference(registry, "C")
    assert same.arms == registry.arms
    np.testing.assert_array_equal(same.belief.mean, registry.belief.mean)


def test_reference_reanchors_when_it_leaves_the_active_set():
    registry = seeded_registry()
    data = RoundData(np.array([70, 70]), np.array([30, 25]))
    registry = absorb_round(registry, ("A", "B"), data, UpdateMode.ODDS_RATIO)
    # C left; the lowest-registry-index overlap arm (A) becomes the anchor
    assert registry.reference == "A"
    assert set(registry.arms) == {"A", "B", "C"}


# --- round planning -----------------------------------------------------------


def test_plan_on_fresh_registry_is_uniform():
    rng = np.random.default_rng(1)
    plan = plan_round(ArmRegistry.empty(), ("A", "B", "C"), 1000, rng)
    np.testing.assert_allclose(plan.proportions.p, np.full(3, 1 / 3))
    assert plan.observed == ()
    assert plan.unobserved == ("A", "B", "C")


def test_plan_splits_between_observed_and_new_arms():
    registry = seeded_registry((40, 15, 10), (80, 50, 50))
    rng = np.random.default_rng(2)
    plan = plan_round(registry, ("A", "B", "C", "D"), 20_000, rng)
    assert plan.observed == ("A", "B", "C")
    assert plan.unobserved == ("D",)
    # the new arm gets exactly 1/|active|
    assert plan.proportions.p[3] == pytest.approx(0.25)
    # observed arms share the remaining 3/4 by Thompson proportions
    assert plan.proportions.p[:3].sum() == pytest.approx(0.75)
    # arm A dominates the observed block
    assert plan.proportions.p[0] > plan.proportions.p[1]


def test_plan_marginalizes_to_the_active_subset():
    """Planning over a subset matches allocation on the marginal belief."""
    registry = seeded_registry((40, 15, 10), (80, 50, 50))
    plan = plan_round(registry, ("A", "C"), 100_000, np.random.default_rng(3))
    from orbandit import allocation_proportions

    marginal = marginalize_keep(registry.belief, [0, 2])
    direct = allocation_proportions(marginal, 100_000, np.random.default_rng(4))
    np.testing.assert_allclose(plan.proportions.p, direct.p, atol=0.01)


def test_plan_proportions_sum_to_one():
    registry = seeded_registry()
    plan = plan_round(registry, ("B", "C", "D", "E", "F"), 5000, np.random.default_rng(5))
    assert plan.proportions.p.sum() == pytest.approx(1.0)


def test_plan_falls_back_to_uniform_when_marginal_is_improper():
    """A tracked-but-never-observed arm has a flat marginal; planning a
    round over it cannot sample, so the split is uniform."""
    registry = seeded_registry()
    data = RoundData(np.array([60, 60, 0, 60]), np.array([25, 20, 0, 15]))
    registry = absorb_round(registry, ("A", "B", "D", "C"), data, UpdateMode.ODDS_RATIO)
    plan = plan_round(registry, ("B", "D"), 2000, np.random.default_rng(6))
    assert plan.observed == ("B", "D")
    np.testing.assert_allclose(plan.proportions.p, [0.5, 0.5])


# --- scenario runner -----------------------------------------------------------


def scenario_rounds():
    return (
        ScenarioRound(("A", "B", "C"), {"A": 0.32, "B": 0.30, "C": 0.28}, 2000),
        ScenarioRound(("A", "B", "C"), {"A": 0.32, "B": 0.30, "C": 0.28}, 2000),
        ScenarioRound(("B", "C", "D"), {"B": 0.30, "C": 0.28, "D": 0.34}, 2000),
    )


def test_run_continuous_records_each_round():
    scenario = ContinuousScenario(scenario_rounds(), seed=11, n_draws=2000)
    result = run_continuous(scenario)
    assert len(result.rounds) == 3
    assert result.rounds[0].decision is Continuity.REINITIALIZE  # fresh start
    assert result.rounds[1].decision is Continuity.CONTINUE_BANDIT
    assert result.rounds[2].decision is Continuity.CONTINUE_BANDIT
    for outcome, spec_round in zip(result.rounds, scenario_rounds()):
        assert outcome.allocated.sum() == spec_round.trials
        assert np.all(outcome.successes <= outcome.allocated)
    assert set(result.registry.arms) == {"A", "B", "C", "D"}


def test_run_continuous_is_deterministic_in_seed():
    scenario = ContinuousScenario(scenario_rounds(), seed=12, n_draws=2000)
    a = run_continuous(scenario)
    b = run_continuous(scenario)
    for ra, rb in zip(a.rounds, b.rounds):
        np.testing.assert_array_equal(ra.allocated, rb.allocated)
        np.testing.assert_array_equal(ra.successes, rb.successes)


def test_run_continuous_reinitializes_on_break():
    rounds = (
        ScenarioRound(("A", "B"), {"A": 0.32, "B": 0.30}, 1000),
        ScenarioRound(("C", "D"), {"C": 0.30, "D": 0.28}, 1000),
    )
    scenario = ContinuousScenario(rounds, seed=13, n_draws=1000)
    result = run_continuous(scenario)
    assert result.rounds[1].decision is Continuity.REINITIALIZE
    # the new registry only tracks the arms active after the break
    assert set(result.registry.arms) == {"C", "D"}


def test_run_continuous_full_rank_fallback_keeps_shared_history():
    rounds = (
        ScenarioRound(("A", "B", "C"), {"A": 0.32, "B": 0.30, "C": 0.28}, 2000),
        ScenarioRound(("C", "D"), {"C": 0.28, "D": 0.31}, 2000),
    )
    scenario = ContinuousScenario(
        rounds, seed=14, n_draws=1000, on_break="full_rank"
    )
    result = run_continuous(scenario)
    assert result.rounds[1].decision is Continuity.REINITIALIZE
    # with the full-rank fallback the registry still remembers A and B
    assert set(result.registry.arms) == {"A", "B", "C", "D"}


def test_scenario_round_validates_probabilities():
    with pytest.raises(ValueError):
        ScenarioRound(("A", "B"), {"A": 0.5}, 100)
    with pytest.raises(ValueError):
        ScenarioRound(("A", "B"), {"A": 0.5, "B": 1.5}, 100)


def test_scenario_rejects_unknown_break_strategy():
    with pytest.raises(ValueError):
        ContinuousScenario(scenario_rounds(), on_break="carry_on")
