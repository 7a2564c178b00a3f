"""Command-line front end: batch simulations and scripted scenarios.

``orbandit simulate`` runs the replication harness from a JSON config and
writes regret.csv, summary.csv, and manifest.json; feeding an emitted
manifest back in as the config reproduces the CSV output byte for byte.
``orbandit continuous`` executes a changing-arms scenario file and writes
rounds.csv plus the per-round continuity decisions.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import __version__
from .continuous import ContinuousScenario, ScenarioRound, run_continuous
from .errors import BanditError, ConfigError
from .logistic_model import ProbVector
from .policy import UpdateMode
from .simulation import (
    EnvironmentSpec,
    ExperimentConfig,
    LogitDrift,
    PolicyKind,
    RegimeSchedule,
    Stationary,
    drift_environment,
    run_replications,
)

__all__ = ["RunManifest", "main", "cmd_simulate", "cmd_continuous"]

_ALL_POLICIES = (PolicyKind.BETA_TS, PolicyKind.FULL_TS, PolicyKind.OR_TS)

_CONFIG_DEFAULTS: dict[str, Any] = {
    "n_draws": 10_000,
    "d": 0.0,
    "p_optimal": 0.31,
    "p_suboptimal": 0.30,
}

_REQUIRED_FIELDS = ("arms", "rounds", "trials", "replications", "policy", "seed")


@dataclass(frozen=True)
class RunManifest:
    """Self-contained record of a simulate run, reusable as its config."""

    config: dict[str, Any]
    environment: dict[str, Any]
    seed: int
    version: str
    duration_seconds: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "artifact": "orbandit",
            "version": self.version,
            "config": self.config,
            "environment": self.environment,
            "seed": self.seed,
            "duration_seconds": self.duration_seconds,
        }


def _fmt(value: Any) -> str:
    """CSV cell: floats at 10 significant digits, everything else as-is."""
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def _load_json(path: str) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON (line {exc.lineno}, column {exc.colno})") from exc


def _require_int(cfg: Mapping[str, Any], field: str, minimum: int) -> int:
    if field not in cfg:
        raise ConfigError(f"field '{field}' is required")
    value = cfg[field]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"field '{field}' must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"field '{field}' must be >= {minimum}, got {value}")
    return value


def _require_number(cfg: Mapping[str, Any], field: str, low: float, high: float) -> float:
    if field not in cfg:
        raise ConfigError(f"field '{field}' is required")
    value = cfg[field]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field '{field}' must be a number, got {value!r}")
    if not low <= float(value) <= high:
        raise ConfigError(f"field '{field}' must be within [{low}, {high}], got {value}")
    return float(value)


def _parse_environment(block: Mapping[str, Any]) -> EnvironmentSpec:
    if not isinstance(block, Mapping) or "kind" not in block:
        raise ConfigError("field 'environment' must be an object with a 'kind'")
    kind = block["kind"]
    try:
        if kind == "stationary":
            return Stationary(ProbVector(np.asarray(block["p"], dtype=float)))
        if kind == "logit_drift":
            return LogitDrift(
                np.asarray(block["base_beta"], dtype=float), float(block["sigma"])
            )
        if kind == "regime_schedule":
            rounds = tuple(
                (ProbVector(np.asarray(r["p"], dtype=float)), int(r["trials"]))
                for r in block["rounds"]
            )
            return RegimeSchedule(rounds)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"field 'environment' ({kind}): {exc}") from exc
    raise ConfigError(f"field 'environment.kind' must be one of stationary, "
                      f"logit_drift, regime_schedule; got {kind!r}")


def _serialize_environment(spec: EnvironmentSpec) -> dict[str, Any]:
    if isinstance(spec, Stationary):
        return {"kind": "stationary", "p": spec.p.p.tolist()}
    if isinstance(spec, LogitDrift):
        return {"kind": "logit_drift", "base_beta": spec.base_beta.tolist(), "sigma": spec.sigma}
    return {
        "kind": "regime_schedule",
        "rounds": [{"p": p.p.tolist(), "trials": trials} for p, trials in spec.rounds],
    }


def _resolve_simulate_config(args: argparse.Namespace) -> tuple[dict[str, Any], EnvironmentSpec]:
    """Merge defaults, the config file (or a manifest), and flag overrides."""
    raw = _load_json(args.config)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if isinstance(raw.get("config"), dict):  # an emitted manifest doubles as a config
        manifest = raw
        raw = dict(manifest["config"])
        if "environment" not in raw and isinstance(manifest.get("environment"), dict):
            raw["environment"] = manifest["environment"]
    cfg = dict(_CONFIG_DEFAULTS)
    cfg.update(raw)
    overrides = {
        "policy": args.policy,
        "rounds": args.rounds,
        "trials": args.trials,
        "replications": args.replications,
        "d": args.d,
        "seed": args.seed,
        "n_draws": args.n_draws,
        "arms": args.arms,
        "p_optimal": args.p_optimal,
        "p_suboptimal": args.p_suboptimal,
    }
    cfg.update({k: v for k, v in overrides.items() if v is not None})

    for field in _REQUIRED_FIELDS:
        if field not in cfg:
            raise ConfigError(f"field '{field}' is required")
    resolved = {
        "arms": _require_int(cfg, "arms", 1),
        "rounds": _require_int(cfg, "rounds", 1),
        "trials": _require_int(cfg, "trials", 1),
        "replications": _require_int(cfg, "replications", 1),
        "seed": _require_int(cfg, "seed", 0),
        "n_draws": _require_int(cfg, "n_draws", 1),
        "d": _require_number(cfg, "d", 0.0, float("inf")),
        "p_optimal": _require_number(cfg, "p_optimal", 0.0, 1.0),
        "p_suboptimal": _require_number(cfg, "p_suboptimal", 0.0, 1.0),
    }
    policy = cfg["policy"]
    valid_policies = {p.value for p in _ALL_POLICIES} | {"all"}
    if policy not in valid_policies:
        raise ConfigError(
            f"field 'policy' must be one of {sorted(valid_policies)}, got {policy!r}"
        )
    resolved["policy"] = policy

    if "environment" in cfg and cfg["environment"] is not None:
        spec = _parse_environment(cfg["environment"])
    else:
        try:
            spec = drift_environment(
                resolved["arms"], resolved["p_optimal"], resolved["p_suboptimal"], resolved["d"]
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    resolved["environment"] = _serialize_environment(spec)
    return resolved, spec


def _write_csv(path: Path, header: list[str], rows: list[list[Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


def cmd_simulate(args: argparse.Namespace) -> int:
    resolved, spec = _resolve_simulate_config(args)
    policies = (
        _ALL_POLICIES if resolved["policy"] == "all" else (PolicyKind(resolved["policy"]),)
    )
    config = ExperimentConfig(
        arms=resolved["arms"],
        rounds=resolved["rounds"],
        trials_per_round=resolved["trials"],
        replications=resolved["replications"],
        policy=policies[0],
        seed=resolved["seed"],
        n_draws=resolved["n_draws"],
        d=resolved["d"],
    )
    started = time.perf_counter()
    summary = run_replications(config, spec, policies=policies, jobs=args.jobs)
    duration = time.perf_counter() - started

    regret_rows = []
    summary_rows = []
    for policy in policies:
        for rep_index, rep in enumerate(summary.records[policy]):
            cumulative = 0.0
            for record in rep:
                cumulative += record.regret
                regret_rows.append(
                    [
                        policy.value,
                        rep_index,
                        record.round,
                        record.regret,
                        cumulative,
                        record.expected_clicks,
                    ]
                )
        means = summary.mean_cumulative_regret(policy)
        stderrs = summary.stderr_cumulative_regret(policy)
        for round_index in range(config.rounds):
            summary_rows.append(
                [
                    policy.value,
                    round_index + 1,
                    float(means[round_index]),
                    float(stderrs[round_index]),
                ]
            )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out_dir / "regret.csv",
        ["policy", "replication", "round", "regret", "cumulative_regret", "expected_clicks"],
        regret_rows,
    )
    _write_csv(
        out_dir / "summary.csv",
        ["policy", "round", "mean_cum_regret", "stderr_cum_regret"],
        summary_rows,
    )
    manifest = RunManifest(
        config={k: v for k, v in resolved.items() if k != "environment"},
        environment=resolved["environment"],
        seed=resolved["seed"],
        version=__version__,
        duration_seconds=duration,
    )
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for policy in policies:
        final = summary.mean_cumulative_regret(policy)[-1]
        print(f"{policy.value}: mean cumulative regret {final:.10g} after {config.rounds} rounds")
    print(f"wrote {out_dir / 'regret.csv'}, {out_dir / 'summary.csv'}, {out_dir / 'manifest.json'}")
    return 0


def _parse_scenario(path: str) -> ContinuousScenario:
    raw = _load_json(path)
    if not isinstance(raw, dict):
        raise ConfigError("scenario must be a JSON object")
    rounds_block = raw.get("rounds")
    if not isinstance(rounds_block, list) or not rounds_block:
        raise ConfigError("field 'rounds' must be a non-empty list")
    default_trials = raw.get("trials")
    rounds = []
    for index, block in enumerate(rounds_block, start=1):
        if not isinstance(block, dict):
            raise ConfigError(f"round {index} must be an object")
        active = block.get("active")
        if not isinstance(active, list) or not active:
            raise ConfigError(f"round {index}: field 'active' must be a non-empty list")
        p = block.get("p")
        if not isinstance(p, dict):
            raise ConfigError(f"round {index}: field 'p' must map arm ids to probabilities")
        trials = block.get("trials", default_trials)
        if not isinstance(trials, int) or isinstance(trials, bool) or trials < 0:
            raise ConfigError(f"round {index}: field 'trials' must be a non-negative integer")
        try:
            rounds.append(ScenarioRound(tuple(active), p, trials))
        except BanditError as exc:
            raise ConfigError(f"round {index}: {exc}") from exc
    mode = raw.get("mode", UpdateMode.ODDS_RATIO.value)
    try:
        mode = UpdateMode(mode)
    except ValueError as exc:
        raise ConfigError(f"field 'mode' must be 'full' or 'odds_ratio', got {mode!r}") from exc
    seed = raw.get("seed", 0)
    n_draws = raw.get("n_draws", 10_000)
    on_break = raw.get("on_continuity_break", "reinitialize")
    try:
        return ContinuousScenario(
            tuple(rounds), mode=mode, seed=seed, n_draws=n_draws, on_break=on_break
        )
    except (BanditError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_continuous(args: argparse.Namespace) -> int:
    scenario = _parse_scenario(args.config)
    result = run_continuous(scenario)
    round_rows = []
    decision_rows = []
    for outcome in result.rounds:
        decision_rows.append([outcome.round, outcome.decision.value])
        for position, arm in enumerate(outcome.plan.active):
            round_rows.append(
                [
                    outcome.round,
                    arm,
                    float(outcome.plan.proportions.p[position]),
                    int(outcome.allocated[position]),
                    int(outcome.successes[position]),
                    float(outcome.true_p[position]),
                ]
            )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out_dir / "rounds.csv",
        ["round", "arm_id", "proportion", "allocated", "successes", "true_p"],
        round_rows,
    )
    _write_csv(out_dir / "continuity.csv", ["round", "decision"], decision_rows)
    print(f"wrote {out_dir / 'rounds.csv'} and {out_dir / 'continuity.csv'}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orbandit",
        description="Batch Thompson sampling simulations for binary rewards.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run the replication harness from a JSON config")
    simulate.add_argument("--config", required=True, help="JSON config or a previously emitted manifest.json")
    simulate.add_argument("--policy", choices=["beta_ts", "full_ts", "or_ts", "all"], default=None)
    simulate.add_argument("--rounds", type=int, default=None)
    simulate.add_argument("--trials", type=int, default=None)
    simulate.add_argument("--replications", type=int, default=None)
    simulate.add_argument("--d", type=float, default=None)
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--n-draws", dest="n_draws", type=int, default=None)
    simulate.add_argument("--arms", type=int, default=None)
    simulate.add_argument("--p-optimal", dest="p_optimal", type=float, default=None)
    simulate.add_argument("--p-suboptimal", dest="p_suboptimal", type=float, default=None)
    simulate.add_argument("--jobs", type=int, default=1)
    simulate.add_argument("--out", required=True, help="output directory")
    simulate.set_defaults(handler=cmd_simulate)

    continuous = sub.add_parser("continuous", help="run a changing-arms scenario file")
    continuous.add_argument("--config", required=True, help="JSON scenario file")
    continuous.add_argument("--out", required=True, help="output directory")
    continuous.set_defaults(handler=cmd_continuous)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except BanditError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
