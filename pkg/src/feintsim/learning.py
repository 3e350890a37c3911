"""Training harness: per-agent regular and feint policies, imaginary play,
and the two update schedules.

Each agent carries a tabular softmax actor-critic over discrete behavior
choices (the regular policy) plus a preference table over composable
dual-behavior models (the feint policy).  Exactly one of the two selects
the agent's action on any step: the feint policy owns every step of a
committed dual-behavior plan, the regular policy owns all other steps.
An inference counter asserts this one-model-per-step property for every
actionable agent step; work done inside imaginary rollouts happens on
cloned states and is accounted as overhead, not as per-step inference.

Imaginary play triggers only for idle feint-enabled agents, at most once
per cooldown window: a high-reward target whose launch state is near the
agent's current pose but unlikely under the regular policy is selected,
one candidate dual-behavior model is drawn from the feint policy, and two
cloned rollouts (plan versus regular policy) are scored with the
collective reward.  The plan is committed only if it scores strictly
higher.

Update schedules: the regular policy updates once per episode from all of
its decision steps; the feint policy updates once per *completed*
dual-behavior model from the real rewards accumulated over that window.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .catalog import Catalog, load_catalog
from .dbm import DualBehaviorModel, TimingClass, classify_timing, compose_dbms
from .env import (
    ATTACK,
    wrap_angle,
    CONTINUE,
    CombatEnv,
    GameState,
    IDLE,
    ScenarioConfig,
    StepEvent,
    config_hash,
    start_behavior,
    start_dbm,
)
from .errors import SnapshotFailure, ValidationError
from .feint_templates import TemplateSet, precompute_templates
from .rewards import (
    OccupancyMeasure,
    Trajectory,
    TrajectoryStep,
    WeightSchedule,
    rew_collective,
    rew_long,
    rew_short,
    rew_temporal,
)

DELTA_NEAR_FACTOR = 2.0  # delta_near = factor * epsilon_state
P_LOW = 0.2
HORIZON_EXTRA = 8
ACTIVATION_COOLDOWN = 8
GAMMA = 0.95


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Categorical draw via inverse CDF; cheaper than Generator.choice."""
    u = rng.random()
    return int(min(np.searchsorted(np.cumsum(probs), u), len(probs) - 1))


def softmax_policy_gradient(logits: np.ndarray, action: int, advantage: float) -> np.ndarray:
    """Gradient of ``advantage * log pi(action)`` w.r.t. the logits."""
    probs = softmax(logits)
    grad = -advantage * probs
    grad[action] += advantage
    return grad


class SoftmaxTable:
    """Tabular softmax actor with a learned state-value baseline."""

    def __init__(self, n_actions: int, lr: float = 0.15, value_lr: float = 0.2):
        self.n_actions = n_actions
        self.lr = lr
        self.value_lr = value_lr
        self.logits: dict[tuple, np.ndarray] = {}
        self.values: dict[tuple, float] = {}
        self._probs_cache: dict[tuple, np.ndarray] = {}

    def probs(self, bucket: tuple, mask: np.ndarray | None = None) -> np.ndarray:
        # logits only move at episode boundaries, so cache within an episode
        cache_key = (bucket, None if mask is None else mask.tobytes())
        cached = self._probs_cache.get(cache_key)
        if cached is not None:
            return cached
        logits = self.logits.get(bucket)
        if logits is None:
            logits = np.zeros(self.n_actions)
        if mask is not None:
            logits = np.where(mask, logits, -1e9)
        p = softmax(logits)
        p = p / p.sum()
        self._probs_cache[cache_key] = p
        return p

    def sample(self, bucket: tuple, rng: np.random.Generator, mask: np.ndarray | None = None) -> int:
        return sample_index(self.probs(bucket, mask), rng)

    def update_episode(self, entries: Sequence[tuple[tuple, int, float]]) -> None:
        """One batch update from (bucket, action, return) decision steps."""
        for bucket, action, ret in entries:
            baseline = self.values.get(bucket, 0.0)
            advantage = ret - baseline
            self.values[bucket] = baseline + self.value_lr * advantage
            logits = self.logits.setdefault(bucket, np.zeros(self.n_actions))
            logits += self.lr * softmax_policy_gradient(logits, action, advantage)
        if entries:
            self._probs_cache.clear()


class FeintPolicy:
    """Preference table over dual-behavior model keys."""

    def __init__(self, lr: float = 0.25, baseline_lr: float = 0.1):
        self.lr = lr
        self.baseline_lr = baseline_lr
        self.preferences: dict[tuple, float] = {}
        self.baseline = 0.0

    def distribution(self, keys: Sequence[tuple]) -> np.ndarray:
        logits = np.array([self.preferences.get(k, 0.0) for k in keys])
        return softmax(logits)

    def choose(self, candidates: Sequence[DualBehaviorModel], rng: np.random.Generator) -> DualBehaviorModel:
        ordered = sorted(candidates, key=lambda d: d.key())
        probs = self.distribution([d.key() for d in ordered])
        return ordered[sample_index(probs, rng)]

    def update_completed(self, key: tuple, window_reward: float) -> None:
        advantage = window_reward - self.baseline
        self.baseline += self.baseline_lr * advantage
        self.preferences[key] = self.preferences.get(key, 0.0) + self.lr * advantage


@dataclass
class AgentPolicies:
    regular: SoftmaxTable
    feint: FeintPolicy


@dataclass(frozen=True)
class ImaginaryPlayDecision:
    activated: bool
    a_target: str | None = None
    candidate_keys: tuple = ()
    chosen_key: tuple | None = None
    feint_value: float = 0.0
    baseline_value: float = 0.0
    timing: TimingClass | None = None

    def __post_init__(self) -> None:
        if self.chosen_key is not None:
            if not self.activated or not self.feint_value > self.baseline_value:
                raise ValidationError(
                    "a dual-behavior plan may be chosen only when imaginary play "
                    "activated and the feint value beats the baseline"
                )


@dataclass
class TrainingLog:
    seed: int
    config_digest: str
    rows: list[dict[str, Any]] = field(default_factory=list)
    wall_times: list[float] = field(default_factory=list)

    def column(self, name: str) -> list[Any]:
        return [row[name] for row in self.rows]


def bucket_observation(obs: np.ndarray) -> tuple[int, ...]:
    """Coarse discretization of the relative-kinematics observation.

    Per opponent: distance band, approach sign (closing / steady / parting),
    and whether the opponent faces the observer.
    """
    out: list[int] = []
    for base in range(0, len(obs), 6):
        px, py, rel_o, vx, vy, _ = obs[base : base + 6]
        out.extend(_bucket_features(px, py, rel_o, vx, vy))
    return tuple(out)


def _bucket_features(px: float, py: float, rel_o: float, vx: float, vy: float) -> tuple[int, int, int]:
    dist = math.hypot(px, py)
    band = 0 if dist <= 1.25 else (1 if dist <= 2.5 else 2)
    radial = (px * vx + py * vy) / dist if dist > 1e-9 else 0.0
    approach = 0 if abs(radial) <= 0.02 else (1 if radial < 0 else 2)
    facing = 1 if abs(rel_o) >= math.pi / 2 else 0
    return band, approach, facing


# --- the trainer ---------------------------------------------------------------


class Trainer:
    """Runs the full loop: imaginary play, real steps, scheduled updates."""

    def __init__(
        self,
        config: ScenarioConfig,
        seed: int = 0,
        catalog: Catalog | None = None,
        templates: TemplateSet | None = None,
        feint_agents: Sequence[str] | None = None,
    ):
        self.config = config
        self.catalog = catalog if catalog is not None else load_catalog(config.catalog_path)
        self.env = CombatEnv(config, self.catalog)
        self.templates = templates if templates is not None else precompute_templates(self.catalog)
        self.seed = seed
        learner = config.learner
        self.gamma = float(learner.get("gamma", GAMMA))
        self.p_low = float(learner.get("p_low", P_LOW))
        self.delta_near = float(
            learner.get("delta_near", DELTA_NEAR_FACTOR * self.catalog.epsilon_state)
        )
        self.horizon_extra = int(learner.get("horizon_extra", HORIZON_EXTRA))
        self.cooldown = int(learner.get("activation_cooldown", ACTIVATION_COOLDOWN))
        lr = float(learner.get("lr", 0.15))
        value_lr = float(learner.get("value_lr", 0.2))
        feint_lr = float(learner.get("feint_lr", 0.25))

        weights = config.weights
        self.alpha_feint = float(weights.get("alpha_feint", 0.1))
        self.alpha_attack = float(weights.get("alpha_attack", 1.0))
        self.beta = float(weights.get("beta", 1.0))
        self.lambda_short = float(weights.get("lambda_short", 0.67))
        self.lambda_long = float(weights.get("lambda_long", 0.33))
        self.mu1 = float(weights.get("mu1", 0.5))
        self.mu2 = float(weights.get("mu2", 0.5))

        self.agent_ids = tuple(sorted(a.id for a in config.agents))
        spec_by_id = {a.id: a for a in config.agents}
        if feint_agents is None:
            self.feint_enabled = {aid: spec_by_id[aid].feint for aid in self.agent_ids}
        else:
            self.feint_enabled = {aid: aid in set(feint_agents) for aid in self.agent_ids}

        # action choices: idle plus every tagged behavior, in sorted id order
        self.choices: list[tuple] = [IDLE] + [
            start_behavior(bid) for bid in sorted(config.behavior_tags)
        ]
        self.choice_behaviors = [None] + sorted(config.behavior_tags)
        self.policies = {
            aid: AgentPolicies(
                regular=SoftmaxTable(len(self.choices), lr=lr, value_lr=value_lr),
                feint=FeintPolicy(lr=feint_lr),
            )
            for aid in self.agent_ids
        }
        # high-reward launch points: (behavior, first reward action id), best first
        self.targets = sorted(
            (
                (b.reward_value, b.id, b.actions[b.stretch_end].id, b.actions[0].start_state)
                for b in self.catalog.behaviors
                if b.stretch_end < b.reward_end
                and b.reward_value > 0
                and config.behavior_tags[b.id].kind == ATTACK
            ),
            key=lambda item: (-item[0], item[1]),
        )
        self._rng = np.random.default_rng(np.random.SeedSequence(seed))
        self.inference_counts: dict[str, int] = {aid: 0 for aid in self.agent_ids}
        self.inference_violations = 0
        self._global_step = 0
        self._cooldown_until: dict[str, int] = {aid: 0 for aid in self.agent_ids}
        # caches keyed by interned physical states; all pure derivations
        self._mask_cache: dict[Any, np.ndarray] = {}
        self._anchor_cache: dict[Any, tuple[str, ...]] = {}
        self._near_target_cache: dict[Any, tuple] = {}
        self._dbm_cache: dict[tuple[str, str], tuple[DualBehaviorModel, ...]] = {}

    # -- imaginary play -----------------------------------------------------

    def _bucket(self, state: GameState, aid: str) -> tuple[int, ...]:
        """Discretized observation, computed without the frame rotation.

        Distance, radial closing speed, and relative orientation are
        rotation invariants of the observation, so the bucket can be read
        straight off world coordinates.
        """
        me = state.agents[aid]
        out: list[int] = []
        for oid in self.agent_ids:
            if oid == aid:
                continue
            opp = state.agents[oid]
            out.extend(
                _bucket_features(
                    opp.x - me.x,
                    opp.y - me.y,
                    wrap_angle(opp.orientation - me.orientation),
                    opp.vx - me.vx,
                    opp.vy - me.vy,
                )
            )
        return tuple(out)

    def _policy_command(
        self, state: GameState, aid: str, rng: np.random.Generator
    ) -> tuple:
        """One regular-policy action selection on a (possibly cloned) state."""
        ag = state.agents[aid]
        if ag.stun_remaining > 0:
            return IDLE
        if ag.plan is not None:
            return CONTINUE
        bucket = self._bucket(state, aid)
        mask = self._start_mask(state, aid)
        idx = self.policies[aid].regular.sample(bucket, rng, mask)
        return self.choices[idx]

    def _start_mask(self, state: GameState, aid: str) -> np.ndarray:
        physical = state.agents[aid].physical
        cached = self._mask_cache.get(physical)
        if cached is not None:
            return cached
        mask = np.zeros(len(self.choices), dtype=bool)
        mask[0] = True  # idle is always legal
        for i, bid in enumerate(self.choice_behaviors[1:], start=1):
            first = self.catalog.behavior(bid).actions[0].start_state
            mask[i] = self.catalog.state_distance(physical, first) <= self.catalog.epsilon_state
        self._mask_cache[physical] = mask
        return mask

    def imaginary_rollout(
        self,
        state: GameState,
        aid: str,
        plan: DualBehaviorModel | None,
        horizon: int,
        seed_key: int,
    ) -> tuple[Trajectory, OccupancyMeasure]:
        """Simulate ``horizon`` steps on a cloned state.

        The focal agent executes ``plan`` first (when given) and falls back
        to its regular policy; all other agents follow their regular
        policies.  Returns the imagined trajectory and the focal agent's
        empirical (bucket, choice) occupancy under it.
        """
        try:
            sim = state.clone()
        except Exception as exc:  # noqa: BLE001
            raise SnapshotFailure(f"could not clone environment state: {exc}") from exc
        rng = np.random.default_rng(np.random.SeedSequence(entropy=self.seed, spawn_key=(seed_key,)))
        steps: list[TrajectoryStep] = []
        counts: dict[tuple, int] = {}
        plan_started = False
        for k in range(horizon):
            commands = {}
            bucket = self._bucket(sim, aid)
            for other in self.agent_ids:
                if other == aid:
                    continue
                commands[other] = self._policy_command(sim, other, rng)
            ag = sim.agents[aid]
            if plan is not None and not plan_started and ag.stun_remaining == 0:
                commands[aid] = start_dbm(plan)
                plan_started = True
            elif plan is not None and plan_started and ag.plan is not None:
                commands[aid] = CONTINUE
            else:
                commands[aid] = self._policy_command(sim, aid, rng)
            counts[(bucket, self._executed_action_label(ag, commands[aid]))] = (
                counts.get((bucket, self._executed_action_label(ag, commands[aid])), 0) + 1
            )
            sim, rewards, _events = self.env.step(sim, commands, inplace=True)
            steps.append(
                TrajectoryStep(
                    state_key=bucket,
                    joint_actions=(),
                    rewards=tuple(rewards[a] for a in self.agent_ids),
                )
            )
        total = sum(counts.values())
        support = tuple(sorted(counts, key=repr))
        probs = np.array([counts[k] / total for k in support], dtype=float)
        traj = Trajectory(t_0=0, steps=tuple(steps))
        return traj, OccupancyMeasure(support=support, probs=probs)

    def _executed_action_label(self, ag, command: tuple) -> str:
        """Unit-action id the focal agent runs under this command.

        Occupancy is measured over executed unit actions, so feints overlap
        real attacks exactly where they reuse the same openings.
        """
        verb = command[0]
        if verb == "continue" and ag.plan is not None:
            return ag.plan.actions[ag.plan.progress].id
        if verb == "start":
            return self.catalog.behavior(command[1]).actions[0].id
        if verb == "start_dbm":
            return command[1].actions[0].id
        return "idle"

    def _estimate_opponent_windows(self, state: GameState, aid: str) -> tuple[int, int]:
        """(defense end, reward start) estimate for the nearest opponent."""
        opp_id = self.env.nearest_opponent(state, aid)
        attack_stretch = min(
            b.stretch_end for b in self.catalog.behaviors if b.stretch_end < b.reward_end
        )
        t_b1, t_b2 = 0, attack_stretch + 1
        if opp_id is not None:
            opp = state.agents[opp_id]
            if opp.plan is not None and opp.plan.defend_direction is not None:
                t_b1 = len(opp.plan.actions) - opp.plan.progress
                t_b2 = t_b1 + attack_stretch + 1
            elif opp.plan is not None:
                remaining = [o - opp.plan.progress for o in opp.plan.reward_offsets if o >= opp.plan.progress]
                if remaining:
                    t_b2 = max(1, min(remaining))
                    t_b1 = 0
        return t_b1, max(t_b2, t_b1 + 1)

    def should_activate(
        self, state: GameState, aid: str, regular_probs: np.ndarray, step: int, rng: np.random.Generator
    ) -> ImaginaryPlayDecision:
        """Imaginary-play gate: near a high-reward launch state the regular
        policy is unlikely to use, compose and evaluate one candidate plan."""
        ag = state.agents[aid]
        if ag.plan is not None and ag.plan.kind == "dbm":
            return ImaginaryPlayDecision(activated=False)
        target = None
        for reward_value, bid, target_action, choice_idx in self._near_targets(ag.physical):
            if regular_probs[choice_idx] >= self.p_low:
                continue
            target = (reward_value, bid, target_action)
            break
        if target is None:
            return ImaginaryPlayDecision(activated=False)
        _value, target_behavior, a_target = target

        candidates: list[DualBehaviorModel] = []
        for a_t in self._candidate_last_actions(ag):
            candidates.extend(self._compose_cached(a_t, a_target))
        candidates = [d for d in candidates if d.target_behavior_id == target_behavior]
        if not candidates:
            return ImaginaryPlayDecision(activated=False)

        chosen = self.policies[aid].feint.choose(candidates, rng)
        horizon = chosen.t_s + self.horizon_extra
        # window parameters are inclusive step offsets: a feint of t_f actions
        # occupies offsets [0, t_f - 1]
        wf, ws, wt = chosen.t_f - 1, chosen.t_s - 1, horizon - 1
        w = self._schedule(wf, ws, wt)
        # common random numbers: both rollouts consume the same stream, so
        # the comparison isolates the plan's effect from opponent noise
        traj_plan, occ_plan = self.imaginary_rollout(state, aid, chosen, horizon, seed_key=step)
        traj_base, occ_base = self.imaginary_rollout(state, aid, None, horizon, seed_key=step)
        # the gate scores the focal agent's own terms: in an adversarial bout,
        # crediting opponents' imagined gains would reward getting hit
        agents = (self.agent_ids.index(aid),)
        feint_value = rew_collective(
            traj_plan, 0, wf, ws, wt, w, agents, occ_new=occ_plan, occ_old=occ_base
        )
        baseline_value = rew_collective(
            traj_base, 0, wf, ws, wt, w, agents, spatial_terms=()
        )
        t_b1, t_b2 = self._estimate_opponent_windows(state, aid)
        t_a2 = chosen.t_f + self.catalog.behavior(chosen.target_behavior_id).stretch_end
        timing = classify_timing(t_a2, t_b1, t_b2) if t_b1 < t_b2 else None
        key = chosen.key() if feint_value > baseline_value else None
        return ImaginaryPlayDecision(
            activated=True,
            a_target=a_target,
            candidate_keys=tuple(sorted(d.key() for d in candidates)),
            chosen_key=key,
            feint_value=feint_value,
            baseline_value=baseline_value,
            timing=timing,
        )

    def _near_targets(self, physical) -> tuple:
        """High-reward behaviors launchable near the given pose, best first:
        (reward_value, behavior_id, first reward action id, choice index)."""
        cached = self._near_target_cache.get(physical)
        if cached is not None:
            return cached
        out = []
        for reward_value, bid, target_action, launch_state in self.targets:
            if self.catalog.state_distance(physical, launch_state) <= self.delta_near:
                out.append((reward_value, bid, target_action, self.choice_behaviors.index(bid)))
        result = tuple(out)
        self._near_target_cache[physical] = result
        return result

    def _compose_cached(self, a_t: str, a_target: str) -> tuple[DualBehaviorModel, ...]:
        key = (a_t, a_target)
        cached = self._dbm_cache.get(key)
        if cached is None:
            cached = compose_dbms(a_t, a_target, self.templates, self.catalog)
            self._dbm_cache[key] = cached
        return cached

    def _candidate_last_actions(self, ag) -> list[str]:
        """Anchor actions a feint may start with from the agent's present pose.

        Mid-plan the anchor is the impending action (the one about to run);
        otherwise any behavior startable from the current pose offers its
        opening action.
        """
        if ag.plan is not None:
            if ag.plan.done:
                return []
            span = ag.plan.spans[ag.plan.progress]
            if not span.reflected:
                return [ag.plan.actions[ag.plan.progress].id]
            return []
        cached = self._anchor_cache.get(ag.physical)
        if cached is not None:
            return list(cached)
        out = []
        for b in self.catalog.behaviors:
            if self.catalog.state_distance(ag.physical, b.actions[0].start_state) <= self.catalog.epsilon_state:
                if b.actions[0].id not in out:
                    out.append(b.actions[0].id)
        self._anchor_cache[ag.physical] = tuple(out)
        return out

    def _schedule(self, wf: int, ws: int, wt: int) -> WeightSchedule:
        return WeightSchedule.uniform(
            wf,
            ws,
            wt,
            alpha_feint=self.alpha_feint,
            alpha_attack=self.alpha_attack,
            beta=self.beta,
            lambda_short=self.lambda_short,
            lambda_long=self.lambda_long,
            mu1=self.mu1,
            mu2=self.mu2,
        )

    # -- training loop ------------------------------------------------------

    def run(self, episodes: int, collect_events: bool = False) -> TrainingLog:
        log = TrainingLog(seed=self.seed, config_digest=config_hash(self.config))
        for ep in range(episodes):
            t0 = time.perf_counter()
            row, events = self._run_episode(ep)
            log.wall_times.append(time.perf_counter() - t0)
            if collect_events:
                row["events"] = events
            log.rows.append(row)
        return log

    def _run_episode(self, ep: int) -> tuple[dict[str, Any], list[StepEvent]]:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=self.seed, spawn_key=(1, ep)))
        state = self.env.reset(seed=self.seed)
        n = len(self.agent_ids)
        ep_rewards = {aid: 0.0 for aid in self.agent_ids}
        decision_steps: dict[str, list[tuple[tuple, int, int]]] = {aid: [] for aid in self.agent_ids}
        step_rewards: dict[str, list[float]] = {aid: [] for aid in self.agent_ids}
        commitments: dict[str, tuple[tuple, int] | None] = {aid: None for aid in self.agent_ids}
        feint_activations = 0
        dbms_started = 0
        dbms_completed = 0
        dbms_interrupted = 0
        completed_windows: dict[str, list[tuple[tuple, int, int]]] = {aid: [] for aid in self.agent_ids}
        breakdown = {"rew_short": 0.0, "rew_long": 0.0, "rew_temporal": 0.0, "rew_spatial_sum": 0.0, "rew_collective": 0.0}
        all_events: list[StepEvent] = []

        for t in range(self.config.episode_length):
            commands: dict[str, tuple] = {}
            consults: dict[str, int] = {aid: 0 for aid in self.agent_ids}
            actionable: dict[str, bool] = {}
            for aid in self.agent_ids:
                ag = state.agents[aid]
                if ag.stun_remaining > 0:
                    actionable[aid] = False
                    commands[aid] = IDLE  # forced no-op, no model consulted
                    continue
                actionable[aid] = True
                if ag.plan is not None and ag.plan.kind == "dbm":
                    # the feint policy owns committed plan steps
                    consults[aid] += 1
                    commands[aid] = CONTINUE
                    continue
                if ag.plan is not None:
                    consults[aid] += 1
                    commands[aid] = CONTINUE
                    continue
                bucket = self._bucket(state, aid)
                mask = self._start_mask(state, aid)
                probs = self.policies[aid].regular.probs(bucket, mask)
                consults[aid] += 1
                decision = None
                if self.feint_enabled[aid] and self._global_step >= self._cooldown_until[aid]:
                    decision = self.should_activate(state, aid, probs, self._global_step, rng)
                    if decision.activated:
                        feint_activations += 1
                        self._cooldown_until[aid] = self._global_step + self.cooldown
                if decision is not None and decision.chosen_key is not None:
                    chosen = self._dbm_by_key(decision.chosen_key, decision.a_target)
                    commands[aid] = start_dbm(chosen)
                    commitments[aid] = (decision.chosen_key, t)
                    dbms_started += 1
                else:
                    idx = sample_index(probs, rng)
                    decision_steps[aid].append((bucket, idx, t))
                    commands[aid] = self.choices[idx]
            for aid in self.agent_ids:
                self.inference_counts[aid] += consults[aid]
                expected = 1 if actionable[aid] else 0
                if consults[aid] != expected:
                    self.inference_violations += 1

            state, rewards, events = self.env.step(state, commands, inplace=True)
            self._global_step += 1
            all_events.extend(events)
            for aid in self.agent_ids:
                ep_rewards[aid] += rewards[aid]
                step_rewards[aid].append(rewards[aid])
            for ev in events:
                if ev.kind == "dbm_completed":
                    dbms_completed += 1
                    commit = commitments[ev.agent]
                    if commit is not None:
                        completed_windows[ev.agent].append((commit[0], commit[1], t))
                        commitments[ev.agent] = None
                elif ev.kind == "interrupted":
                    ag_commit = commitments.get(ev.agent)
                    if ag_commit is not None:
                        dbms_interrupted += 1
                        commitments[ev.agent] = None
                elif ev.kind == "illegal_action":
                    commitments[ev.agent] = None

        # scheduled updates: regular once per episode, feint once per completed plan
        for aid in self.agent_ids:
            returns = self._returns(step_rewards[aid])
            entries = [(bucket, idx, returns[t]) for bucket, idx, t in decision_steps[aid]]
            self.policies[aid].regular.update_episode(entries)
            for key, start, end in completed_windows[aid]:
                window_reward = sum(step_rewards[aid][start : end + 1])
                self.policies[aid].feint.update_completed(key, window_reward)
                breakdown_add = self._window_breakdown(step_rewards, aid, key, start, end)
                for name, value in breakdown_add.items():
                    breakdown[name] += value

        row: dict[str, Any] = {"episode": ep}
        for aid in self.agent_ids:
            row[f"reward_{aid}"] = ep_rewards[aid]
        row.update(
            feint_activations=feint_activations,
            dbms_started=dbms_started,
            dbms_completed=dbms_completed,
            dbms_interrupted=dbms_interrupted,
            inference_violations=self.inference_violations,
        )
        row.update({k: round(v, 12) for k, v in breakdown.items()})
        return row, all_events

    def _window_breakdown(
        self, step_rewards: dict[str, list[float]], aid: str, key: tuple, start: int, end: int
    ) -> dict[str, float]:
        """Reward-engine terms for one completed dual-behavior window."""
        feint_len = (key[2] - key[4]) + key[3]
        ws = end - start  # inclusive window offset of the plan's last step
        wf = min(feint_len - 1, ws - 1)
        horizon_end = min(len(step_rewards[aid]) - 1, end + self.horizon_extra)
        wt = horizon_end - start
        w = WeightSchedule.uniform(
            wf, ws, wt,
            alpha_feint=self.alpha_feint, alpha_attack=self.alpha_attack, beta=self.beta,
            lambda_short=self.lambda_short, lambda_long=self.lambda_long,
            mu1=self.mu1, mu2=self.mu2,
        )
        steps = tuple(
            TrajectoryStep(state_key=t, joint_actions=(), rewards=(step_rewards[aid][t],))
            for t in range(start, horizon_end + 1)
        )
        traj = Trajectory(t_0=0, steps=steps)
        short = rew_short(traj, 0, wf, ws, w, 0)
        long_term = rew_long(traj, 0, ws, wt, w, 0)
        temporal = rew_temporal(traj, 0, wf, ws, wt, w, 0)
        collective = rew_collective(traj, 0, wf, ws, wt, w, (0,), spatial_terms=())
        return {
            "rew_short": short,
            "rew_long": long_term,
            "rew_temporal": temporal,
            "rew_spatial_sum": 0.0,
            "rew_collective": collective,
        }

    def _dbm_by_key(self, key: tuple, a_target: str | None) -> DualBehaviorModel:
        behavior_i, behavior_j, k_i, k_j, t_idx = key
        a_t = self.catalog.behavior(behavior_i).actions[t_idx].id
        for d in self._compose_cached(a_t, a_target):
            if d.key() == key:
                return d
        raise ValidationError(f"no dual-behavior model for key {key}")

    def _returns(self, rewards: list[float]) -> list[float]:
        out = [0.0] * len(rewards)
        acc = 0.0
        for t in range(len(rewards) - 1, -1, -1):
            acc = rewards[t] + self.gamma * acc
            out[t] = acc
        return out


def train(
    config: ScenarioConfig,
    episodes: int,
    seed: int = 0,
    feint_agents: Sequence[str] | None = None,
    catalog: Catalog | None = None,
    templates: TemplateSet | None = None,
) -> TrainingLog:
    trainer = Trainer(config, seed=seed, catalog=catalog, templates=templates, feint_agents=feint_agents)
    return trainer.run(episodes)


def bench_overhead(
    config: ScenarioConfig, episodes: int, seed: int = 0, catalog: Catalog | None = None
) -> dict[str, Any]:
    """Paired timed runs, feint on versus off, with inference accounting."""
    catalog = catalog if catalog is not None else load_catalog(config.catalog_path)
    templates = precompute_templates(catalog)
    feint_ids = tuple(a.id for a in config.agents if a.feint)

    on = Trainer(config, seed=seed, catalog=catalog, templates=templates, feint_agents=feint_ids)
    t0 = time.perf_counter()
    log_on = on.run(episodes)
    time_on = time.perf_counter() - t0

    off = Trainer(config, seed=seed, catalog=catalog, templates=templates, feint_agents=())
    t0 = time.perf_counter()
    log_off = off.run(episodes)
    time_off = time.perf_counter() - t0

    return {
        "episodes": episodes,
        "seed": seed,
        "wall_time_feint_on": time_on,
        "wall_time_feint_off": time_off,
        "overhead_ratio": time_on / time_off if time_off > 0 else float("inf"),
        "inference_violations_on": on.inference_violations,
        "inference_violations_off": off.inference_violations,
        "feint_activations": sum(log_on.column("feint_activations")),
        "dbms_completed_on": sum(log_on.column("dbms_completed")),
        "mean_reward_on": {
            aid: float(np.mean(log_on.column(f"reward_{aid}"))) for aid in on.agent_ids
        },
        "mean_reward_off": {
            aid: float(np.mean(log_off.column(f"reward_{aid}"))) for aid in off.agent_ids
        },
    }
