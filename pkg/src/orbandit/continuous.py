"""Running experiments whose arm set changes between rounds.

A registry tracks every arm seen so far, with the reference arm pinned to
the last parameter position. Each round the caller brings an arbitrary
active set: arms already tracked keep their accumulated belief, new arms
join with flat coordinates, and the reference is re-anchored whenever the
current one sits out the round. A round that shares fewer than two arms
with the tracked set cannot transfer any relative information, so the
registry either restarts from flat beliefs or, optionally, falls back to a
full-rank update through the single shared arm.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable, Mapping, Sequence

import numpy as np

from .errors import ContinuityError, InvalidDimensionError, InvalidRoundError, UnknownArmError
from .gaussian_belief import (
    GaussianBelief,
    compose_reindex,
    make_flat_belief,
    marginalize_keep,
    transform,
)
from .logistic_model import RoundData
from .policy import (
    AllocationProportions,
    LogisticPolicyState,
    UpdateMode,
    allocation_proportions,
    full_ts_update,
    or_ts_update,
)

__all__ = [
    "Continuity",
    "ArmRegistry",
    "RoundPlan",
    "check_continuity",
    "reanchor_reference",
    "plan_round",
    "absorb_round",
    "ScenarioRound",
    "ContinuousScenario",
    "RoundOutcome",
    "ContinuousResult",
    "run_continuous",
]

ArmId = Hashable


class Continuity(Enum):
    """Whether a new round can extend the running experiment."""

    CONTINUE_BANDIT = "continue_bandit"
    REINITIALIZE = "reinitialize"


def _validated_active(active: Sequence[ArmId]) -> tuple[ArmId, ...]:
    active = tuple(active)
    if not active:
        raise InvalidRoundError("a round must include at least one arm")
    if len(set(active)) != len(active):
        raise InvalidRoundError(f"active arm identifiers must be unique, got {active!r}")
    return active


@dataclass(frozen=True)
class ArmRegistry:
    """Arms tracked so far, their joint belief, and the update count.

    ``arms`` fixes the parameter order; the reference arm is always the
    last position. The registry is immutable: every operation returns a
    new one.
    """

    arms: tuple[ArmId, ...]
    belief: GaussianBelief
    round: int = 0

    def __post_init__(self):
        arms = tuple(self.arms)
        if len(set(arms)) != len(arms):
            raise InvalidRoundError(f"arm identifiers must be unique, got {arms!r}")
        if self.belief.dim != len(arms):
            raise InvalidDimensionError(
                f"belief dimension {self.belief.dim} does not match arm count {len(arms)}"
            )
        if self.round < 0:
            raise ValueError("round must be non-negative")
        object.__setattr__(self, "arms", arms)

    @property
    def reference(self) -> ArmId | None:
        """Identifier of the reference arm, or None for an empty registry."""
        return self.arms[-1] if self.arms else None

    @classmethod
    def empty(cls) -> "ArmRegistry":
        return cls((), GaussianBelief(np.zeros(0), np.zeros((0, 0))), 0)

    @classmethod
    def fresh(cls, active: Sequence[ArmId]) -> "ArmRegistry":
        """New registry over the given arms with a flat joint belief."""
        active = _validated_active(active)
        return cls(active, make_flat_belief(len(active)), 0)


@dataclass(frozen=True)
class RoundPlan:
    """Traffic plan for one round over the active arms, in active order."""

    active: tuple[ArmId, ...]
    observed: tuple[ArmId, ...]
    unobserved: tuple[ArmId, ...]
    proportions: AllocationProportions

    def __post_init__(self):
        if set(self.observed) | set(self.unobserved) != set(self.active):
            raise InvalidRoundError("observed and unobserved must partition the active set")
        if set(self.observed) & set(self.unobserved):
            raise InvalidRoundError("observed and unobserved must be disjoint")
        if self.proportions.arms != len(self.active):
            raise InvalidDimensionError("proportions must cover the active set")


def check_continuity(active: Sequence[ArmId], registry: ArmRegistry) -> Continuity:
    """Continue only when at least two active arms are already tracked.

    One shared arm is not enough: relative information is carried by odds
    ratios, and a single anchor cannot transfer any ordering among the
    arms actually competing this round.
    """
    active = _validated_active(active)
    overlap = set(active) & set(registry.arms)
    return Continuity.CONTINUE_BANDIT if len(overlap) >= 2 else Continuity.REINITIALIZE


def reanchor_reference(registry: ArmRegistry, new_reference: ArmId) -> ArmRegistry:
    """Move the reference role to another tracked arm.

    The arms are reordered so the new reference sits last (others keep
    their relative order) and the belief is pushed through the matching
    parameter transform, so per-arm probabilities are unchanged.
    """
    arms = registry.arms
    if new_reference not in arms:
        raise UnknownArmError(f"arm {new_reference!r} is not tracked")
    if registry.reference == new_reference:
        return registry
    k = len(arms)
    r = arms.index(new_reference)
    new_arms = arms[:r] + arms[r + 1 :] + (new_reference,)
    perm = list(range(r)) + [k - 1] + list(range(r, k - 1))
    matrix = compose_reindex(perm, k)
    return ArmRegistry(new_arms, transform(registry.belief, matrix), registry.round)


def plan_round(
    registry: ArmRegistry,
    active: Sequence[ArmId],
    n_draws: int,
    rng: np.random.Generator,
) -> RoundPlan:
    """Split traffic between manual exploration and Thompson sampling.

    Arms never seen before get a manual 1/|active| share. Already-tracked
    arms share the remaining |observed|/|active| of the traffic according
    to Thompson winner frequencies computed on the belief marginalized to
    exactly those arms (re-anchoring first if the reference sits out). If
    that marginal is not yet proper in every direction, all active arms
    fall back to the manual 1/|active| share.
    """
    active = _validated_active(active)
    tracked = set(registry.arms)
    observed = tuple(a for a in active if a in tracked)
    unobserved = tuple(a for a in active if a not in tracked)
    m = len(active)
    proportions = np.full(m, 1.0 / m)
    if observed:
        working = registry
        if working.reference not in set(active):
            anchor = next(a for a in working.arms if a in set(observed))
            working = reanchor_reference(working, anchor)
        keep = [i for i, a in enumerate(working.arms) if a in set(observed)]
        marginal = marginalize_keep(working.belief, keep)
        if marginal.is_proper():
            base = allocation_proportions(marginal, n_draws, rng)
            share = len(observed) / m
            ts_share = {working.arms[i]: share * w for i, w in zip(keep, base.p)}
            proportions = np.array([ts_share.get(a, 1.0 / m) for a in active])
    return RoundPlan(active, observed, unobserved, AllocationProportions(proportions))


def absorb_round(
    registry: ArmRegistry,
    active: Sequence[ArmId],
    data: RoundData,
    mode: UpdateMode,
    *,
    require_continuity: bool = True,
) -> ArmRegistry:
    """Fold one round of counts into the registry.

    New arms are inserted immediately before the reference position with
    flat coordinates, arms sitting out the round contribute zero counts,
    and the reference is re-anchored into the overlap when it sits out.
    A registry that has never been updated absorbs any round; otherwise
    fewer than two shared arms raises unless the caller explicitly opts
    out of the continuity requirement.
    """
    active = _validated_active(active)
    mode = UpdateMode(mode)
    if data.arms != len(active):
        raise InvalidRoundError(
            f"count vectors cover {data.arms} arms but the round has {len(active)}"
        )
    working = registry if registry.arms else ArmRegistry.fresh(active)
    active_set = set(active)
    overlap = [a for a in working.arms if a in active_set]
    if require_continuity and working.round > 0 and len(overlap) < 2:
        raise ContinuityError(
            f"round shares {len(overlap)} arm(s) with the tracked set; reinitialize instead"
        )
    if working.reference not in active_set and overlap:
        working = reanchor_reference(working, overlap[0])
    new_arms = tuple(a for a in active if a not in set(working.arms))
    if new_arms:
        old_k = len(working.arms)
        arms = working.arms[:-1] + new_arms + working.arms[-1:]
        k = len(arms)
        mean = np.insert(working.belief.mean, old_k - 1, np.zeros(len(new_arms)))
        precision = np.zeros((k, k))
        old_pos = list(range(old_k - 1)) + [k - 1]
        precision[np.ix_(old_pos, old_pos)] = working.belief.precision
        belief = GaussianBelief(mean, precision)
    else:
        arms = working.arms
        belief = working.belief
    position = {a: i for i, a in enumerate(active)}
    n_full = np.zeros(len(arms), dtype=np.int64)
    c_full = np.zeros(len(arms), dtype=np.int64)
    for pos, arm in enumerate(arms):
        if arm in position:
            n_full[pos] = data.n[position[arm]]
            c_full[pos] = data.c[position[arm]]
    state = LogisticPolicyState(belief, mode, working.round)
    if mode is UpdateMode.ODDS_RATIO:
        state = or_ts_update(state, RoundData(n_full, c_full))
    else:
        state = full_ts_update(state, RoundData(n_full, c_full))
    return ArmRegistry(arms, state.belief, working.round + 1)


@dataclass(frozen=True)
class ScenarioRound:
    """One round of a scripted changing-arms experiment."""

    active: tuple[ArmId, ...]
    p: Mapping[ArmId, float]
    trials: int

    def __post_init__(self):
        active = _validated_active(self.active)
        object.__setattr__(self, "active", active)
        object.__setattr__(self, "p", dict(self.p))
        for arm in active:
            if arm not in self.p:
                raise InvalidRoundError(f"no success probability given for arm {arm!r}")
            value = float(self.p[arm])
            if not 0.0 < value < 1.0:
                raise InvalidRoundError(
                    f"success probability for arm {arm!r} must be in (0, 1), got {value}"
                )
        if self.trials < 0:
            raise InvalidRoundError("trials must be non-negative")


@dataclass(frozen=True)
class ContinuousScenario:
    """A scripted sequence of rounds with possibly changing arm sets."""

    rounds: tuple[ScenarioRound, ...]
    mode: UpdateMode = UpdateMode.ODDS_RATIO
    seed: int = 0
    n_draws: int = 10_000
    on_break: str = "reinitialize"

    def __post_init__(self):
        object.__setattr__(self, "rounds", tuple(self.rounds))
        object.__setattr__(self, "mode", UpdateMode(self.mode))
        if not self.rounds:
            raise InvalidRoundError("scenario must contain at least one round")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.n_draws < 1:
            raise ValueError("n_draws must be positive")
        if self.on_break not in ("reinitialize", "full_rank"):
            raise ValueError(
                f"on_break must be 'reinitialize' or 'full_rank', got {self.on_break!r}"
            )


@dataclass(frozen=True)
class RoundOutcome:
    """What happened in one executed scenario round."""

    round: int
    decision: Continuity
    plan: RoundPlan
    allocated: np.ndarray
    successes: np.ndarray
    true_p: np.ndarray


@dataclass(frozen=True)
class ContinuousResult:
    rounds: tuple[RoundOutcome, ...] = field(default_factory=tuple)
    registry: ArmRegistry = field(default_factory=ArmRegistry.empty)


def run_continuous(scenario: ContinuousScenario) -> ContinuousResult:
    """Execute a scripted changing-arms experiment end to end.

    Each round: decide continuity, reinitialize if required (or fall back
    to one full-rank update through the overlap when the scenario opts
    in), plan traffic, draw rewards, and absorb the counts. Deterministic
    for a fixed scenario seed, with separate streams for allocation noise,
    rewards, and policy sampling.
    """
    from .simulation import allocate_trials, draw_rewards

    streams = np.random.SeedSequence(scenario.seed).spawn(3)
    rng_alloc, rng_reward, rng_policy = (np.random.default_rng(s) for s in streams)
    registry = ArmRegistry.empty()
    outcomes = []
    for index, rnd in enumerate(scenario.rounds, start=1):
        decision = check_continuity(rnd.active, registry)
        mode = scenario.mode
        require = True
        if decision is Continuity.REINITIALIZE:
            shared = len(set(rnd.active) & set(registry.arms))
            if scenario.on_break == "full_rank" and registry.round > 0 and shared >= 1:
                mode = UpdateMode.FULL
                require = False
            else:
                registry = ArmRegistry.fresh(rnd.active)
        plan = plan_round(registry, rnd.active, scenario.n_draws, rng_policy)
        allocated = allocate_trials(plan.proportions, rnd.trials, rng_alloc)
        true_p = np.array([rnd.p[a] for a in rnd.active], dtype=float)
        successes = draw_rewards(allocated, true_p, rng_reward)
        registry = absorb_round(
            registry,
            rnd.active,
            RoundData(allocated, successes),
            mode,
            require_continuity=require,
        )
        outcomes.append(RoundOutcome(index, decision, plan, allocated, successes, true_p))
    return ContinuousResult(tuple(outcomes), registry)
