"""Synthetic environments and the batch-experiment harness.

Environments produce per-arm success probabilities per round: a constant
vector, a logit-space random walk where one shared draw shifts every arm
together each round, or an explicit per-round schedule. The harness runs a
policy against an environment round by round, records allocations and
regret, and aggregates paired replications across policies.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Sequence, Union

import numpy as np
from scipy.special import expit, logit

from .errors import BanditError, InvalidDimensionError, InvalidRoundError, SimulationError
from .logistic_model import ProbVector, RoundData
from .policy import (
    AllocationProportions,
    BetaState,
    LogisticPolicyState,
    UpdateMode,
    allocation_proportions,
    beta_ts_proportions,
    beta_ts_update,
    full_ts_update,
    initial_proportions,
    or_ts_update,
)

__all__ = [
    "Stationary",
    "LogitDrift",
    "RegimeSchedule",
    "EnvironmentSpec",
    "PolicyKind",
    "ExperimentConfig",
    "RoundRecord",
    "SimulationSummary",
    "sigma_from_d",
    "env_step",
    "allocate_trials",
    "draw_rewards",
    "run_experiment",
    "run_replications",
    "single_best_arm_logits",
    "drift_environment",
    "two_regime_schedule",
]


@dataclass(frozen=True)
class Stationary:
    """Success probabilities fixed for every round."""

    p: ProbVector


@dataclass(frozen=True)
class LogitDrift:
    """Fixed per-arm logits plus one shared Gaussian shift per round.

    The shift is common to all arms, so the identity of the best arm never
    changes even though every success probability moves each round.
    """

    base_beta: np.ndarray
    sigma: float

    def __post_init__(self):
        base = np.array(self.base_beta, dtype=float).reshape(-1)
        if base.size < 1 or not np.all(np.isfinite(base)):
            raise InvalidDimensionError("base logits must be a non-empty finite vector")
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"drift scale must be non-negative, got {self.sigma}")
        base.setflags(write=False)
        object.__setattr__(self, "base_beta", base)
        object.__setattr__(self, "sigma", float(self.sigma))


@dataclass(frozen=True)
class RegimeSchedule:
    """Explicit (probabilities, trials) per round; trials override the
    experiment config's per-round total."""

    rounds: tuple[tuple[ProbVector, int], ...]

    def __post_init__(self):
        rounds = tuple((p, int(t)) for p, t in self.rounds)
        if not rounds:
            raise InvalidRoundError("schedule must contain at least one round")
        width = rounds[0][0].arms
        for p, trials in rounds:
            if p.arms != width:
                raise InvalidDimensionError("all schedule rounds must cover the same arms")
            if trials < 0:
                raise ValueError("scheduled trials must be non-negative")
        object.__setattr__(self, "rounds", rounds)


EnvironmentSpec = Union[Stationary, LogitDrift, RegimeSchedule]


class PolicyKind(str, Enum):
    BETA_TS = "beta_ts"
    FULL_TS = "full_ts"
    OR_TS = "or_ts"


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a single simulated experiment needs besides the environment."""

    arms: int
    rounds: int
    trials_per_round: int
    replications: int
    policy: PolicyKind
    seed: int
    n_draws: int = 10_000
    d: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "policy", PolicyKind(self.policy))
        for name in ("arms", "rounds", "trials_per_round", "replications", "n_draws"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if not np.isfinite(self.d) or self.d < 0:
            raise ValueError(f"d must be a non-negative real, got {self.d}")


@dataclass(frozen=True)
class RoundRecord:
    """Everything recorded about one simulated round."""

    round: int
    proportions: AllocationProportions
    allocated: np.ndarray
    successes: np.ndarray
    true_p: ProbVector
    regret: float
    expected_clicks: float


def sigma_from_d(d: float, p_optimal: float, p_suboptimal: float) -> float:
    """Drift scale calibrated to the optimality gap.

    ``d`` is the shared drift's standard deviation measured in units of the
    logit gap between the best and runner-up success probabilities.
    """
    if not 0.0 < p_suboptimal < p_optimal < 1.0:
        raise ValueError(
            f"need 0 < p_suboptimal < p_optimal < 1, got {p_suboptimal} and {p_optimal}"
        )
    return float(d) * float(logit(p_optimal) - logit(p_suboptimal))


def env_step(spec: EnvironmentSpec, round_index: int, rng: np.random.Generator) -> ProbVector:
    """Success probabilities for the given 1-based round."""
    round_index = int(round_index)
    if round_index < 1:
        raise InvalidRoundError(f"round index must be >= 1, got {round_index}")
    if isinstance(spec, Stationary):
        return spec.p
    if isinstance(spec, LogitDrift):
        shift = rng.normal(0.0, spec.sigma)
        return ProbVector(expit(spec.base_beta + shift))
    if isinstance(spec, RegimeSchedule):
        if round_index > len(spec.rounds):
            raise InvalidRoundError(
                f"round {round_index} is beyond the {len(spec.rounds)}-round schedule"
            )
        return spec.rounds[round_index - 1][0]
    raise TypeError(f"unknown environment spec {type(spec).__name__}")


def allocate_trials(
    proportions,
    total: int,
    rng: np.random.Generator,
    method: str = "multinomial",
) -> np.ndarray:
    """Split a round's trial budget across arms.

    Accepts AllocationProportions or any non-negative weight vector. The
    default multinomial draw matches how traffic actually splits when each
    visitor is routed independently; the deterministic alternative assigns
    floors and hands leftovers to the largest remainders, breaking ties
    toward the lowest arm index.
    """
    total = int(total)
    if total < 0:
        raise ValueError(f"trial total must be non-negative, got {total}")
    weights = (
        proportions.p
        if isinstance(proportions, AllocationProportions)
        else np.asarray(proportions, dtype=float).reshape(-1)
    )
    if weights.size < 1 or not np.all(np.isfinite(weights)) or np.any(weights < 0):
        raise ValueError("allocation weights must be non-negative finite numbers")
    if weights.sum() <= 0:
        raise ValueError("allocation weights must not all be zero")
    shares = weights / weights.sum()
    if method == "multinomial":
        return rng.multinomial(total, shares).astype(np.int64)
    if method == "largest_remainder":
        exact = total * shares
        base = np.floor(exact).astype(np.int64)
        leftover = total - int(base.sum())
        order = np.argsort(-(exact - base), kind="stable")
        base[order[:leftover]] += 1
        return base
    raise ValueError(f"unknown allocation method {method!r}")


def draw_rewards(allocated: np.ndarray, true_p, rng: np.random.Generator) -> np.ndarray:
    """Binomial successes per arm for the given trial counts."""
    allocated = np.asarray(allocated, dtype=np.int64).reshape(-1)
    p = true_p.p if isinstance(true_p, ProbVector) else np.asarray(true_p, dtype=float).reshape(-1)
    if allocated.shape != p.shape:
        raise InvalidDimensionError(
            f"allocated shape {allocated.shape} does not match probabilities {p.shape}"
        )
    if np.any(allocated < 0) or np.any(p < 0) or np.any(p > 1):
        raise ValueError("trial counts must be non-negative and probabilities within [0, 1]")
    return rng.binomial(allocated, p).astype(np.int64)


class _BetaRunner:
    def __init__(self, arms: int, n_draws: int):
        self.state = BetaState.uniform_prior(arms)
        self.n_draws = n_draws
        self.updates = 0

    def propose(self, rng: np.random.Generator) -> AllocationProportions:
        if self.updates == 0:
            return initial_proportions(self.state.arms)
        return beta_ts_proportions(self.state, self.n_draws, rng)

    def observe(self, data: RoundData) -> None:
        self.state = beta_ts_update(self.state, data)
        self.updates += 1


class _LogisticRunner:
    def __init__(self, arms: int, n_draws: int, mode: UpdateMode):
        self.state = LogisticPolicyState.flat_start(arms, mode)
        self.n_draws = n_draws

    def propose(self, rng: np.random.Generator) -> AllocationProportions:
        if not self.state.belief.is_proper():
            return initial_proportions(self.state.belief.dim)
        return allocation_proportions(self.state.belief, self.n_draws, rng)

    def observe(self, data: RoundData) -> None:
        if self.state.mode is UpdateMode.ODDS_RATIO:
            self.state = or_ts_update(self.state, data)
        else:
            self.state = full_ts_update(self.state, data)


def _make_runner(config: ExperimentConfig):
    if config.policy is PolicyKind.BETA_TS:
        return _BetaRunner(config.arms, config.n_draws)
    mode = UpdateMode.ODDS_RATIO if config.policy is PolicyKind.OR_TS else UpdateMode.FULL
    return _LogisticRunner(config.arms, config.n_draws, mode)


def _environment_arms(spec: EnvironmentSpec) -> int:
    if isinstance(spec, Stationary):
        return spec.p.arms
    if isinstance(spec, LogitDrift):
        return spec.base_beta.size
    return spec.rounds[0][0].arms


def run_experiment(config: ExperimentConfig, spec: EnvironmentSpec) -> list[RoundRecord]:
    """One policy against one environment for the configured rounds.

    Per round: propose proportions (uniform until the first posterior
    exists), split the trial budget, step the environment, draw rewards,
    update the policy, and record regret against that round's best arm.
    Four independent substreams (environment, allocation, rewards, policy
    sampling) are derived from the seed, so two policies run with the same
    seed face identical environments and differ only through their own
    decisions.
    """
    if _environment_arms(spec) != config.arms:
        raise InvalidDimensionError(
            f"environment covers {_environment_arms(spec)} arms, config expects {config.arms}"
        )
    if isinstance(spec, RegimeSchedule) and config.rounds > len(spec.rounds):
        raise InvalidRoundError(
            f"config asks for {config.rounds} rounds but the schedule has {len(spec.rounds)}"
        )
    streams = np.random.SeedSequence(config.seed).spawn(4)
    rng_env, rng_alloc, rng_reward, rng_policy = (np.random.default_rng(s) for s in streams)
    runner = _make_runner(config)
    records = []
    for round_index in range(1, config.rounds + 1):
        try:
            proportions = runner.propose(rng_policy)
        except BanditError as exc:
            raise SimulationError(config.policy.value, round_index, str(exc)) from exc
        trials = (
            spec.rounds[round_index - 1][1]
            if isinstance(spec, RegimeSchedule)
            else config.trials_per_round
        )
        allocated = allocate_trials(proportions, trials, rng_alloc)
        true_p = env_step(spec, round_index, rng_env)
        successes = draw_rewards(allocated, true_p, rng_reward)
        try:
            runner.observe(RoundData(allocated, successes))
        except BanditError as exc:
            raise SimulationError(config.policy.value, round_index, str(exc)) from exc
        best = float(np.max(true_p.p))
        regret = float(np.sum(allocated * (best - true_p.p)))
        clicks = float(np.sum(allocated * true_p.p))
        records.append(
            RoundRecord(round_index, proportions, allocated, successes, true_p, regret, clicks)
        )
    return records


def _replication_task(args: tuple[ExperimentConfig, EnvironmentSpec]) -> list[RoundRecord]:
    return run_experiment(*args)


@dataclass(frozen=True)
class SimulationSummary:
    """Per-replication records plus the aggregates the reports need."""

    policies: tuple[PolicyKind, ...]
    rounds: int
    records: Mapping[PolicyKind, tuple[tuple[RoundRecord, ...], ...]]

    def cumulative_regret(self, policy: PolicyKind) -> np.ndarray:
        """Cumulative regret curves, shape (replications, rounds)."""
        per_round = np.array(
            [[record.regret for record in rep] for rep in self.records[PolicyKind(policy)]]
        )
        return per_round.cumsum(axis=1)

    def mean_cumulative_regret(self, policy: PolicyKind) -> np.ndarray:
        return self.cumulative_regret(policy).mean(axis=0)

    def stderr_cumulative_regret(self, policy: PolicyKind) -> np.ndarray:
        curves = self.cumulative_regret(policy)
        if curves.shape[0] < 2:
            return np.zeros(curves.shape[1])
        return curves.std(axis=0, ddof=1) / np.sqrt(curves.shape[0])

    def total_expected_clicks(self, policy: PolicyKind) -> np.ndarray:
        """Expected clicks summed over rounds, one entry per replication."""
        return np.array(
            [
                sum(record.expected_clicks for record in rep)
                for rep in self.records[PolicyKind(policy)]
            ]
        )


def run_replications(
    config: ExperimentConfig,
    spec: EnvironmentSpec,
    policies: Sequence[PolicyKind] | None = None,
    jobs: int = 1,
) -> SimulationSummary:
    """Paired replications, optionally across several policies.

    Replication r runs with seed ``config.seed + r`` for every policy, so
    policies can be compared pairwise on identical environment draws.
    """
    chosen = tuple(PolicyKind(p) for p in (policies if policies is not None else (config.policy,)))
    if not chosen:
        raise ValueError("at least one policy is required")
    tasks = [
        (replace(config, policy=policy, seed=config.seed + rep), spec)
        for policy in chosen
        for rep in range(config.replications)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_replication_task, tasks))
    else:
        results = [_replication_task(task) for task in tasks]
    records: dict[PolicyKind, tuple[tuple[RoundRecord, ...], ...]] = {}
    for index, policy in enumerate(chosen):
        start = index * config.replications
        records[policy] = tuple(
            tuple(results[start + rep]) for rep in range(config.replications)
        )
    return SimulationSummary(chosen, config.rounds, records)


def single_best_arm_logits(arms: int, p_optimal: float, p_suboptimal: float) -> np.ndarray:
    """Per-arm logits with arm 0 at the optimal rate and the rest tied."""
    arms = int(arms)
    if arms < 1:
        raise InvalidDimensionError(f"arm count must be positive, got {arms}")
    if not 0.0 < p_suboptimal < p_optimal < 1.0:
        raise ValueError(
            f"need 0 < p_suboptimal < p_optimal < 1, got {p_suboptimal} and {p_optimal}"
        )
    base = np.full(arms, float(logit(p_suboptimal)))
    base[0] = float(logit(p_optimal))
    return base


def drift_environment(
    arms: int, p_optimal: float, p_suboptimal: float, d: float
) -> EnvironmentSpec:
    """Standard benchmark environment: one best arm, optional shared drift.

    With ``d == 0`` the rates are constant; otherwise every round shifts
    all logits together by a Gaussian draw whose scale is ``d`` logit gaps.
    """
    base = single_best_arm_logits(arms, p_optimal, p_suboptimal)
    if d == 0:
        return Stationary(ProbVector(expit(base)))
    return LogitDrift(base, sigma_from_d(d, p_optimal, p_suboptimal))


def two_regime_schedule(
    base_p: Sequence[float],
    block_rounds: Sequence[int] = (10, 8),
    boundary_shift: float = -1.0,
    daily_sigma: float = 0.0,
    trials: int | Sequence[int] = 20_000,
    seed: int = 0,
) -> RegimeSchedule:
    """Schedule with a large shared logit shift between blocks.

    Every arm's logit moves by ``boundary_shift`` at each block boundary,
    on top of optional day-to-day shared jitter of scale ``daily_sigma``;
    relative arm quality never changes. ``trials`` may be a scalar or one
    total per block. Deterministic for a fixed seed.
    """
    base = logit(np.asarray(base_p, dtype=float).reshape(-1))
    if base.size < 1 or not np.all(np.isfinite(base)):
        raise ValueError("base probabilities must be a non-empty vector inside (0, 1)")
    blocks = [int(b) for b in block_rounds]
    if any(b < 1 for b in blocks):
        raise ValueError("each block must contain at least one round")
    if np.isscalar(trials):
        per_block = [int(trials)] * len(blocks)
    else:
        per_block = [int(t) for t in trials]
        if len(per_block) != len(blocks):
            raise ValueError("need one trial total per block")
    rng = np.random.default_rng(seed)
    rounds = []
    for block_index, block_len in enumerate(blocks):
        offset = boundary_shift * block_index
        for _ in range(block_len):
            jitter = rng.normal(0.0, daily_sigma) if daily_sigma > 0 else 0.0
            rounds.append((ProbVector(expit(base + offset + jitter)), per_block[block_index]))
    return RegimeSchedule(tuple(rounds))
