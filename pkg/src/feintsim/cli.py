"""Batch entry points: template precomputation, composition queries, scripted
simulation, training, diversity evaluation, and overhead benchmarking.

Every run writes its artifacts into ``--out-dir`` plus a ``manifest.json``
naming them.  All data artifacts are byte-reproducible given identical flags
and seed; wall-clock measurements are isolated in the manifest timestamps
and the timing artifacts (``timing.csv``, ``bench_timing.json``).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .catalog import load_catalog
from .dbm import compose_dbms
from .diversity import (
    MatrixGame,
    PayoffMatrix,
    PolicyPool,
    exploitability,
    population_efficacy,
    response_diversity,
)
from .env import CombatEnv, load_scenario, config_hash, events_to_jsonl, run_scripted_episode, start_behavior, start_dbm
from .errors import ConfigError, FeintsimError, ParseError
from .feint_templates import precompute_templates, save_templates, templates_to_dict
from .learning import Trainer, bench_overhead

LEARNERS = ("tabular-ac",)
DIVERGENCES = ("kl", "tv", "hellinger")


@dataclass
class RunManifest:
    subcommand: str
    config: str | None
    seed: int
    out_dir: str
    build_id: str
    started_at: str
    finished_at: str = ""
    artifacts: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "subcommand": self.subcommand,
            "config": self.config,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "build_id": self.build_id,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "artifacts": sorted(self.artifacts),
        }


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_json(out_dir: Path, name: str, data: Any, manifest: RunManifest) -> None:
    (out_dir / name).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    manifest.artifacts.append(name)


def _write_text(out_dir: Path, name: str, text: str, manifest: RunManifest) -> None:
    (out_dir / name).write_text(text)
    manifest.artifacts.append(name)


def _write_csv(out_dir: Path, name: str, rows: list[dict[str, Any]], manifest: RunManifest) -> None:
    path = out_dir / name
    with path.open("w", newline="") as fh:
        if rows:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    manifest.artifacts.append(name)


# --- subcommands ---------------------------------------------------------------


def cmd_templates(args: argparse.Namespace, out_dir: Path, manifest: RunManifest) -> None:
    cat = load_catalog(args.catalog)
    ts = precompute_templates(cat, common_mode=args.common_mode)
    _write_json(out_dir, "templates.json", templates_to_dict(ts), manifest)
    summary = {
        "catalog": str(args.catalog),
        "behaviors": len(cat.behaviors),
        "templates": len(ts),
        "by_variant": ts.counts_by_variant(),
    }
    _write_json(out_dir, "template_summary.json", summary, manifest)
    print(json.dumps(summary, sort_keys=True))


def cmd_compose(args: argparse.Namespace, out_dir: Path, manifest: RunManifest) -> None:
    cat = load_catalog(args.catalog)
    ts = precompute_templates(cat, common_mode=args.common_mode)
    dbms = compose_dbms(args.a_t, args.a_target, ts, cat)
    records = [
        {
            "behavior_i": d.behavior_i,
            "target_behavior": d.target_behavior_id,
            "junction": d.junction,
            "key": list(d.key()),
            "t_f": d.t_f,
            "t_s": d.t_s,
            "feint_actions": [a.id for a in d.feint.actions],
            "select_i": list(d.select_i),
            "select_j": list(d.select_j),
        }
        for d in dbms
    ]
    _write_json(out_dir, "dbms.json", {"a_t": args.a_t, "a_target": args.a_target, "models": records}, manifest)
    print(json.dumps({"a_t": args.a_t, "a_target": args.a_target, "count": len(records)}, sort_keys=True))


def _load_script(path: str | Path) -> tuple[int, dict[str, dict[int, dict[str, Any]]]]:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    schedule: dict[str, dict[int, dict[str, Any]]] = {}
    for entry in data.get("entries", []):
        schedule.setdefault(str(entry["agent"]), {})[int(entry["step"])] = entry
    return int(data.get("episode_length", 0)), schedule


def cmd_simulate(args: argparse.Namespace, out_dir: Path, manifest: RunManifest) -> None:
    cfg = load_scenario(args.config)
    env = CombatEnv(cfg)
    templates = precompute_templates(env.catalog)
    length, raw_schedule = _load_script(args.script)
    episode_length = length or cfg.episode_length

    schedule: dict[str, dict[int, tuple]] = {}
    for aid, per_step in raw_schedule.items():
        schedule[aid] = {}
        for t, entry in per_step.items():
            if "start" in entry:
                schedule[aid][t] = start_behavior(str(entry["start"]))
            elif "dbm" in entry:
                spec = entry["dbm"]
                key = tuple(spec["key"])
                match = [
                    d
                    for d in compose_dbms(str(spec["a_t"]), str(spec["a_target"]), templates, env.catalog)
                    if d.key() == key
                ]
                if not match:
                    raise ConfigError(f"script names unknown dual-behavior key {key}")
                schedule[aid][t] = start_dbm(match[0])
            else:
                raise ConfigError(f"script entry for {aid!r} at step {t} has no action")
    final, totals, events = run_scripted_episode(env, schedule, episode_length, seed=args.seed)
    _write_text(out_dir, "events.jsonl", events_to_jsonl(events), manifest)
    _write_json(
        out_dir,
        "simulation_summary.json",
        {
            "episode_length": episode_length,
            "reward_totals": {k: totals[k] for k in sorted(totals)},
            "final_scores": {aid: final.agents[aid].score for aid in sorted(final.agents)},
            "events": len(events),
        },
        manifest,
    )
    print(json.dumps({"events": len(events), "reward_totals": {k: totals[k] for k in sorted(totals)}}, sort_keys=True))


def cmd_train(args: argparse.Namespace, out_dir: Path, manifest: RunManifest) -> None:
    cfg = load_scenario(args.config)
    if args.learner not in LEARNERS:
        raise ConfigError(f"unknown learner {args.learner!r}; available: {LEARNERS}")
    if args.f_divergence not in DIVERGENCES:
        raise ConfigError(f"unknown f-divergence {args.f_divergence!r}; available: {DIVERGENCES}")
    feint_agents = None
    if args.feint_agents is not None:
        feint_agents = tuple(a for a in args.feint_agents.split(",") if a)
    trainer = Trainer(cfg, seed=args.seed, feint_agents=feint_agents)
    log = trainer.run(args.episodes)
    _write_csv(out_dir, "training_log.csv", log.rows, manifest)
    _write_csv(
        out_dir,
        "timing.csv",
        [{"episode": i, "wall_time_s": t} for i, t in enumerate(log.wall_times)],
        manifest,
    )
    _write_json(
        out_dir,
        "training_meta.json",
        {
            "seed": log.seed,
            "episodes": args.episodes,
            "config_hash": log.config_digest,
            "learner": args.learner,
            "feint_agents": sorted(aid for aid, on in trainer.feint_enabled.items() if on),
            "inference_violations": trainer.inference_violations,
        },
        manifest,
    )
    tail = max(1, args.episodes // 5)
    summary = {
        f"tail_mean_reward_{aid}": float(np.mean(log.column(f"reward_{aid}")[-tail:]))
        for aid in trainer.agent_ids
    }
    print(json.dumps(summary, sort_keys=True))


def _load_policy_file(path: str | Path) -> dict[str, np.ndarray]:
    data = json.loads(Path(path).read_text())
    return {str(k): np.asarray(v, dtype=float) for k, v in data["policies"].items()}


def cmd_evaluate(args: argparse.Namespace, out_dir: Path, manifest: RunManifest) -> None:
    game_data = json.loads(Path(args.game).read_text())
    payoffs_a = np.asarray(game_data["payoffs_a"], dtype=float)
    payoffs_b = np.asarray(game_data["payoffs_b"], dtype=float)
    game = MatrixGame(payoffs=(payoffs_a, payoffs_b))
    pool = _load_policy_file(args.pool)
    opponents = _load_policy_file(args.opponents)

    pool_ids = tuple(sorted(pool))
    opp_ids = tuple(sorted(opponents))
    values = np.array(
        [[pool[r] @ payoffs_a @ opponents[c] for c in opp_ids] for r in pool_ids]
    )
    matrix = PayoffMatrix(row_ids=pool_ids, col_ids=opp_ids, values=values)

    uniform_profile = [
        np.full(payoffs_a.shape[0], 1.0 / payoffs_a.shape[0]),
        np.full(payoffs_a.shape[1], 1.0 / payoffs_a.shape[1]),
    ]
    diversity = {}
    for i, rid in enumerate(pool_ids):
        rest = np.delete(values, i, axis=0)
        diversity[rid] = float(response_diversity(values[i], rest)) if len(pool_ids) > 1 else float(
            np.linalg.norm(values[i])
        )
    metrics = {
        "population_efficacy": float(population_efficacy(matrix)),
        "exploitability_uniform_profile": float(exploitability(uniform_profile, game)),
        "response_diversity": diversity,
        "pool": list(pool_ids),
        "opponents": list(opp_ids),
    }
    _write_json(out_dir, "metrics.json", metrics, manifest)
    lines = [",".join(["policy"] + list(opp_ids))]
    for rid, row in zip(pool_ids, values):
        lines.append(",".join([rid] + [repr(float(v)) for v in row]))
    _write_text(out_dir, "payoff_matrix.csv", "\n".join(lines) + "\n", manifest)
    print(json.dumps({k: metrics[k] for k in ("population_efficacy", "exploitability_uniform_profile")}, sort_keys=True))


def cmd_bench_overhead(args: argparse.Namespace, out_dir: Path, manifest: RunManifest) -> None:
    cfg = load_scenario(args.config)
    report = bench_overhead(cfg, episodes=args.episodes, seed=args.seed)
    deterministic = {
        k: report[k]
        for k in (
            "episodes",
            "seed",
            "inference_violations_on",
            "inference_violations_off",
            "feint_activations",
            "dbms_completed_on",
            "mean_reward_on",
            "mean_reward_off",
        )
    }
    timing = {
        k: report[k] for k in ("wall_time_feint_on", "wall_time_feint_off", "overhead_ratio")
    }
    _write_json(out_dir, "bench_counters.json", deterministic, manifest)
    _write_json(out_dir, "bench_timing.json", timing, manifest)
    print(json.dumps({"overhead_ratio": timing["overhead_ratio"], **{k: deterministic[k] for k in ("inference_violations_on", "inference_violations_off")}}, sort_keys=True))


# --- argument plumbing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="feintsim", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", default="out")

    p = sub.add_parser("templates", help="precompute feint templates from a catalog")
    common(p)
    p.add_argument("--catalog", required=True)
    p.add_argument("--common-mode", choices=("id", "similar"), default="id")

    p = sub.add_parser("compose", help="compose dual-behavior models for an action pair")
    common(p)
    p.add_argument("--catalog", required=True)
    p.add_argument("--a-t", required=True, dest="a_t")
    p.add_argument("--a-target", required=True, dest="a_target")
    p.add_argument("--common-mode", choices=("id", "similar"), default="id")

    p = sub.add_parser("simulate", help="run a scripted episode and log events")
    common(p)
    p.add_argument("--config", required=True)
    p.add_argument("--script", required=True)

    p = sub.add_parser("train", help="run the learning loop")
    common(p)
    p.add_argument("--config", required=True)
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--feint-agents", default=None, help="comma list; overrides config flags")
    p.add_argument("--learner", default="tabular-ac")
    p.add_argument("--f-divergence", default="kl", choices=DIVERGENCES)

    p = sub.add_parser("evaluate", help="diversity metrics over policy pools")
    common(p)
    p.add_argument("--pool", required=True)
    p.add_argument("--opponents", required=True)
    p.add_argument("--game", required=True)

    p = sub.add_parser("bench-overhead", help="paired feint on/off timing runs")
    common(p)
    p.add_argument("--config", required=True)
    p.add_argument("--episodes", type=int, default=1000)
    return parser


HANDLERS = {
    "templates": cmd_templates,
    "compose": cmd_compose,
    "simulate": cmd_simulate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "bench-overhead": cmd_bench_overhead,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        subcommand=args.subcommand,
        config=getattr(args, "config", None) or getattr(args, "catalog", None),
        seed=args.seed,
        out_dir=str(out_dir),
        build_id=f"feintsim-{__version__}",
        started_at=_now(),
    )
    try:
        HANDLERS[args.subcommand](args, out_dir, manifest)
    except FeintsimError as exc:
        record = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1
    manifest.finished_at = _now()
    (out_dir / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
