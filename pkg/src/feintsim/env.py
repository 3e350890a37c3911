"""Deterministic multi-player 2D combat environment.

Agents stand on a bounded plane, auto-face their nearest opponent, and
execute catalog behaviors one unit action per step.  Attacks lunge the
agent forward during the stretch-out run and drift it back during retract;
a reward-run step that reaches an unblocked opponent inside the hit range
and facing cone lands a hit worth that behavior's reward value.  A hit
interrupts whatever the victim was doing; if the victim's current activity
could collect little or nothing itself, the interruption becomes a
knockdown and the victim is stunned for a few steps.

Everything is resolved in sorted agent-id order with no internal RNG, so a
(state, commands) pair maps to exactly one successor state.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .catalog import Behavior, Catalog, PhysicalState, UnitAction, load_catalog
from .dbm import DualBehaviorModel
from .errors import ConfigError, ParseError, UnknownAgent
from .feint_templates import SourceSpan

IDLE = ("idle",)
CONTINUE = ("continue",)

ATTACK = "attack"
DEFEND = "defend"
DIRECTIONS = ("high", "mid", "low")


def start_behavior(behavior_id: str) -> tuple:
    return ("start", behavior_id)


def start_dbm(dbm: DualBehaviorModel) -> tuple:
    return ("start_dbm", dbm)


def wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


# --- scenario configuration ---------------------------------------------------


@dataclass(frozen=True)
class BehaviorTag:
    kind: str
    direction: str
    lunge: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in (ATTACK, DEFEND):
            raise ConfigError(f"behavior kind must be attack or defend, got {self.kind!r}")
        if self.direction not in DIRECTIONS:
            raise ConfigError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")


@dataclass(frozen=True)
class AgentSpec:
    id: str
    team: str
    spawn: tuple[float, float]
    orientation: float = 0.0
    feint: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    catalog_path: str
    agents: tuple[AgentSpec, ...]
    behavior_tags: dict[str, BehaviorTag]
    arena_size: float = 10.0
    episode_length: int = 60
    hit_range: float = 1.0
    hit_cone_deg: float = 60.0
    knockdown_factor: float = 2.0
    knockdown_steps: int = 3
    weights: dict[str, float] = field(default_factory=dict)
    learner: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.agents) < 2:
            raise ConfigError("a scenario needs at least two agents")
        ids = [a.id for a in self.agents]
        if len(set(ids)) != len(ids):
            raise ConfigError("agent ids must be unique")
        for a in self.agents:
            x, y = a.spawn
            if not (0.0 <= x <= self.arena_size and 0.0 <= y <= self.arena_size):
                raise ConfigError(f"agent {a.id!r} spawns outside the arena")
        if self.episode_length < 1:
            raise ConfigError("episode_length must be positive")

    @property
    def n_agents(self) -> int:
        return len(self.agents)


_AGENT_FIELDS = {"id", "team", "spawn", "orientation", "feint"}
_TAG_FIELDS = {"kind", "direction", "lunge"}


def scenario_from_dict(data: Any, base_dir: Path | None = None) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("scenario config root must be an object")
    try:
        agents = tuple(
            AgentSpec(
                id=str(a["id"]),
                team=str(a["team"]),
                spawn=(float(a["spawn"][0]), float(a["spawn"][1])),
                orientation=float(a.get("orientation", 0.0)),
                feint=bool(a.get("feint", False)),
            )
            for a in data["agents"]
        )
        tags = {
            str(bid): BehaviorTag(
                kind=str(t["kind"]),
                direction=str(t["direction"]),
                lunge=float(t.get("lunge", 0.0)),
            )
            for bid, t in data["behavior_tags"].items()
        }
        catalog_path = str(data["catalog_path"])
        if base_dir is not None and not Path(catalog_path).is_absolute():
            catalog_path = str(base_dir / catalog_path)
        return ScenarioConfig(
            catalog_path=catalog_path,
            agents=agents,
            behavior_tags=tags,
            arena_size=float(data.get("arena_size", 10.0)),
            episode_length=int(data.get("episode_length", 60)),
            hit_range=float(data.get("hit_range", 1.0)),
            hit_cone_deg=float(data.get("hit_cone_deg", 60.0)),
            knockdown_factor=float(data.get("knockdown_factor", 2.0)),
            knockdown_steps=int(data.get("knockdown_steps", 3)),
            weights=dict(data.get("weights", {})),
            learner=dict(data.get("learner", {})),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"malformed scenario config: {exc!r}") from exc


def scenario_to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    return {
        "catalog_path": cfg.catalog_path,
        "arena_size": cfg.arena_size,
        "episode_length": cfg.episode_length,
        "hit_range": cfg.hit_range,
        "hit_cone_deg": cfg.hit_cone_deg,
        "knockdown_factor": cfg.knockdown_factor,
        "knockdown_steps": cfg.knockdown_steps,
        "agents": [
            {
                "id": a.id,
                "team": a.team,
                "spawn": list(a.spawn),
                "orientation": a.orientation,
                "feint": a.feint,
            }
            for a in cfg.agents
        ],
        "behavior_tags": {
            bid: {"kind": t.kind, "direction": t.direction, "lunge": t.lunge}
            for bid, t in sorted(cfg.behavior_tags.items())
        },
        "weights": dict(sorted(cfg.weights.items())),
        "learner": dict(sorted(cfg.learner.items())),
    }


def load_scenario(path: str | Path) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return scenario_from_dict(data, base_dir=Path(path).resolve().parent)


def config_hash(cfg: ScenarioConfig) -> str:
    canonical = json.dumps(scenario_to_dict(cfg), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


# --- runtime state ------------------------------------------------------------


@dataclass
class ActivePlan:
    """A behavior or dual-behavior model being executed step by step."""

    plan_id: str
    kind: str  # "behavior" | "dbm"
    actions: tuple[UnitAction, ...]
    spans: tuple[SourceSpan, ...]
    reward_offsets: frozenset[int]
    drift: tuple[float, ...]
    feint_len: int  # 0 for plain behaviors
    followup_reward: float
    defend_direction: str | None
    progress: int = 0
    accrued: float = 0.0

    def clone(self) -> "ActivePlan":
        return ActivePlan(
            plan_id=self.plan_id,
            kind=self.kind,
            actions=self.actions,
            spans=self.spans,
            reward_offsets=self.reward_offsets,
            drift=self.drift,
            feint_len=self.feint_len,
            followup_reward=self.followup_reward,
            defend_direction=self.defend_direction,
            progress=self.progress,
            accrued=self.accrued,
        )

    @property
    def done(self) -> bool:
        return self.progress >= len(self.actions)

    def current_stake(self) -> float:
        """Reward the current activity could itself collect; zero while
        feinting or defending, so hits landed then knock the agent down."""
        if self.defend_direction is not None:
            return 0.0
        if self.progress < self.feint_len:
            return 0.0
        return self.followup_reward


@dataclass
class AgentState:
    id: str
    team: str
    x: float
    y: float
    orientation: float
    vx: float = 0.0
    vy: float = 0.0
    angular_velocity: float = 0.0
    physical: PhysicalState | None = None
    plan: ActivePlan | None = None
    score: float = 0.0
    stun_remaining: int = 0

    def clone(self) -> "AgentState":
        return AgentState(
            id=self.id,
            team=self.team,
            x=self.x,
            y=self.y,
            orientation=self.orientation,
            vx=self.vx,
            vy=self.vy,
            angular_velocity=self.angular_velocity,
            physical=self.physical,
            plan=self.plan.clone() if self.plan is not None else None,
            score=self.score,
            stun_remaining=self.stun_remaining,
        )


@dataclass
class GameState:
    agents: dict[str, AgentState]
    step: int
    arena_size: float

    def clone(self) -> "GameState":
        return GameState(
            agents={aid: ag.clone() for aid, ag in self.agents.items()},
            step=self.step,
            arena_size=self.arena_size,
        )

    def state_hash(self) -> str:
        parts = []
        for aid in sorted(self.agents):
            ag = self.agents[aid]
            plan = ag.plan.plan_id + f"@{ag.plan.progress}" if ag.plan else "-"
            parts.append(
                f"{aid}:{ag.x:.12g},{ag.y:.12g},{ag.orientation:.12g},{ag.score:.12g},"
                f"{ag.stun_remaining},{plan}"
            )
        return hashlib.sha256(("|".join(parts) + f"#{self.step}").encode()).hexdigest()


@dataclass(frozen=True)
class StepEvent:
    kind: str
    step: int
    agent: str
    other: str | None = None
    value: float | None = None
    index: int | None = None

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {"step": self.step, "kind": self.kind, "agent": self.agent}
        if self.other is not None:
            rec["other"] = self.other
        if self.value is not None:
            rec["value"] = self.value
        if self.index is not None:
            rec["index"] = self.index
        return rec


# --- the environment ----------------------------------------------------------


class CombatEnv:
    def __init__(self, config: ScenarioConfig, catalog: Catalog | None = None):
        self.config = config
        self.catalog = catalog if catalog is not None else load_catalog(config.catalog_path)
        for bid in config.behavior_tags:
            self.catalog.behavior(bid)  # raises KeyError on unknown ids
        for b in self.catalog.behaviors:
            if b.id not in config.behavior_tags:
                raise ConfigError(f"behavior {b.id!r} has no tag in the scenario config")
        first = self.catalog.behaviors[0]
        self.rest_state = first.actions[0].start_state
        self._behaviors = {b.id: b for b in self.catalog.behaviors}
        self._cone_cos = math.cos(math.radians(config.hit_cone_deg))
        self._opponents = {
            a.id: tuple(o.id for o in config.agents if o.team != a.team)
            for a in config.agents
        }
        self._order = tuple(sorted(a.id for a in config.agents))
        self._behavior_plan_cache: dict[str, ActivePlan] = {}
        self._dbm_plan_cache: dict[tuple, ActivePlan] = {}

    # -- plan construction ------------------------------------------------

    def _drift_for_span(self, span: SourceSpan) -> float:
        tag = self.config.behavior_tags[span.behavior_id]
        b = self._behaviors[span.behavior_id]
        if span.index < b.stretch_end:
            d = tag.lunge / b.stretch_end
        elif span.index < b.reward_end:
            d = 0.0
        else:
            d = -tag.lunge / (len(b.actions) - b.reward_end)
        return -d if span.reflected else d

    def _offsets_and_drift(
        self, spans: Sequence[SourceSpan]
    ) -> tuple[frozenset[int], tuple[float, ...]]:
        offsets = []
        drift = []
        for off, span in enumerate(spans):
            b = self._behaviors[span.behavior_id]
            if not span.reflected and span.index in b.reward_index_range():
                offsets.append(off)
            drift.append(self._drift_for_span(span))
        return frozenset(offsets), tuple(drift)

    def plan_from_behavior(self, behavior_id: str) -> ActivePlan:
        cached = self._behavior_plan_cache.get(behavior_id)
        if cached is None:
            b = self._behaviors[behavior_id]
            tag = self.config.behavior_tags[behavior_id]
            spans = tuple(SourceSpan(b.id, i, False) for i in range(len(b.actions)))
            offsets, drift = self._offsets_and_drift(spans)
            cached = ActivePlan(
                plan_id=behavior_id,
                kind="behavior",
                actions=b.actions,
                spans=spans,
                reward_offsets=offsets,
                drift=drift,
                feint_len=0,
                followup_reward=b.reward_value,
                defend_direction=tag.direction if tag.kind == DEFEND else None,
            )
            self._behavior_plan_cache[behavior_id] = cached
        return cached.clone()

    def plan_from_dbm(self, dbm: DualBehaviorModel) -> ActivePlan:
        cached = self._dbm_plan_cache.get(dbm.key())
        if cached is None:
            target = self._behaviors[dbm.target_behavior_id]
            spans = dbm.feint.sources + tuple(
                SourceSpan(target.id, i, False) for i in range(len(target.actions))
            )
            offsets, drift = self._offsets_and_drift(spans)
            cached = ActivePlan(
                plan_id=f"dbm:{dbm.behavior_i}>{dbm.target_behavior_id}@{dbm.junction_idx_i}:{dbm.junction_idx_j}+{dbm.start_idx}",
                kind="dbm",
                actions=dbm.actions,
                spans=spans,
                reward_offsets=offsets,
                drift=drift,
                feint_len=dbm.t_f,
                followup_reward=target.reward_value,
                defend_direction=None,
            )
            self._dbm_plan_cache[dbm.key()] = cached
        return cached.clone()

    # -- lifecycle ----------------------------------------------------------

    def reset(self, seed: int = 0) -> GameState:
        del seed  # spawns are configured, not sampled; kept for API symmetry
        agents = {}
        for spec in self.config.agents:
            agents[spec.id] = AgentState(
                id=spec.id,
                team=spec.team,
                x=spec.spawn[0],
                y=spec.spawn[1],
                orientation=spec.orientation,
                physical=self.rest_state,
            )
        return GameState(agents=agents, step=0, arena_size=self.config.arena_size)

    def observe(self, state: GameState, agent_id: str) -> np.ndarray:
        """Relative position, orientation, and velocities of every other
        agent, expressed in the observer's frame, in sorted-id order."""
        if agent_id not in state.agents:
            raise UnknownAgent(agent_id)
        me = state.agents[agent_id]
        cos_t = math.cos(me.orientation)
        sin_t = math.sin(me.orientation)
        out: list[float] = []
        for oid in self._order:
            if oid == agent_id:
                continue
            opp = state.agents[oid]
            dx, dy = opp.x - me.x, opp.y - me.y
            dvx, dvy = opp.vx - me.vx, opp.vy - me.vy
            out.extend(
                (
                    cos_t * dx + sin_t * dy,
                    -sin_t * dx + cos_t * dy,
                    wrap_angle(opp.orientation - me.orientation),
                    cos_t * dvx + sin_t * dvy,
                    -sin_t * dvx + cos_t * dvy,
                    opp.angular_velocity - me.angular_velocity,
                )
            )
        return np.asarray(out, dtype=float)

    def nearest_opponent(self, state: GameState, agent_id: str) -> str | None:
        me = state.agents[agent_id]
        best: tuple[float, str] | None = None
        for oid in self._opponents[agent_id]:
            opp = state.agents[oid]
            d2 = (opp.x - me.x) ** 2 + (opp.y - me.y) ** 2
            if best is None or (d2, oid) < best:
                best = (d2, oid)
        return best[1] if best else None

    def _in_strike(self, attacker: AgentState, target: AgentState) -> bool:
        dx, dy = target.x - attacker.x, target.y - attacker.y
        dist = math.hypot(dx, dy)
        if dist > self.config.hit_range:
            return False
        if dist == 0.0:
            return True
        fx, fy = math.cos(attacker.orientation), math.sin(attacker.orientation)
        return (fx * dx + fy * dy) / dist >= self._cone_cos

    def step(
        self, state: GameState, commands: Mapping[str, tuple], inplace: bool = False
    ) -> tuple[GameState, dict[str, float], list[StepEvent]]:
        """Advance one unit time step.

        Commands: ``("idle",)``, ``("continue",)``, ``("start", behavior_id)``
        or ``("start_dbm", dbm)``.  A start whose first action is not
        continuous with the agent's current physical state is replaced by a
        no-op and logged, never raised.

        With ``inplace=True`` the caller's state object is advanced directly
        (callers that own the state skip the defensive clone); the returned
        transition is identical either way.
        """
        nxt = state if inplace else state.clone()
        t = state.step
        order = self._order
        events: list[StepEvent] = []
        rewards = {aid: 0.0 for aid in order}
        executing: dict[str, bool] = {}

        # 1. interpret commands
        for aid in order:
            ag = nxt.agents[aid]
            if ag.stun_remaining > 0:
                ag.stun_remaining -= 1
                ag.plan = None
                executing[aid] = False
                continue
            cmd = commands.get(aid, IDLE)
            verb = cmd[0]
            if verb == "continue":
                executing[aid] = ag.plan is not None
            elif verb == "idle":
                ag.plan = None
                executing[aid] = False
            elif verb in ("start", "start_dbm"):
                ag.plan = None
                if verb == "start":
                    plan = self.plan_from_behavior(cmd[1])
                else:
                    plan = self.plan_from_dbm(cmd[1])
                gap = self.catalog.state_distance(ag.physical, plan.actions[0].start_state)
                if gap > self.catalog.epsilon_state:
                    events.append(StepEvent("illegal_action", t, aid, value=gap))
                    executing[aid] = False
                else:
                    ag.plan = plan
                    executing[aid] = True
                    if plan.kind == "dbm":
                        events.append(StepEvent("feint_started", t, aid, value=float(plan.feint_len)))
            else:
                raise ConfigError(f"unknown command {cmd!r} for agent {aid!r}")

        # 2. face the nearest opponent (from pre-move positions), then move
        for aid in order:
            ag = nxt.agents[aid]
            target = self.nearest_opponent(state, aid)
            if target is not None:
                opp = state.agents[target]
                bearing = math.atan2(opp.y - ag.y, opp.x - ag.x)
            else:
                bearing = ag.orientation
            ag.angular_velocity = wrap_angle(bearing - ag.orientation)
            ag.orientation = bearing

        for aid in order:
            ag = nxt.agents[aid]
            old_x, old_y = ag.x, ag.y
            if executing[aid] and ag.plan is not None:
                d = ag.plan.drift[ag.plan.progress]
                ag.x = min(max(ag.x + d * math.cos(ag.orientation), 0.0), nxt.arena_size)
                ag.y = min(max(ag.y + d * math.sin(ag.orientation), 0.0), nxt.arena_size)
            ag.vx = ag.x - old_x
            ag.vy = ag.y - old_y

        # 3. resolve reward-run contacts, lowest agent id first
        interrupted: set[str] = set()
        for aid in order:
            if aid in interrupted or not executing[aid]:
                continue
            ag = nxt.agents[aid]
            plan = ag.plan
            if plan is None or plan.progress not in plan.reward_offsets:
                continue
            span = plan.spans[plan.progress]
            direction = self.config.behavior_tags[span.behavior_id].direction
            value = self._behaviors[span.behavior_id].reward_value
            target_id = self.nearest_opponent(nxt, aid)
            if target_id is None or not self._in_strike(ag, nxt.agents[target_id]):
                continue
            defender = nxt.agents[target_id]
            if (
                defender.plan is not None
                and defender.plan.defend_direction == direction
            ):
                events.append(StepEvent("blocked", t, aid, other=target_id, value=value))
                # the attacker bounces off a matched guard: its own plan is cut
                if ag.plan is not None:
                    events.append(
                        StepEvent("interrupted", t, aid, other=target_id, index=ag.plan.progress)
                    )
                    ag.plan = None
                    interrupted.add(aid)
                continue
            events.append(StepEvent("hit", t, aid, other=target_id, value=value))
            rewards[aid] += value
            ag.score += value
            plan.accrued += value
            if defender.plan is not None:
                events.append(
                    StepEvent("interrupted", t, target_id, other=aid, index=defender.plan.progress)
                )
                if value >= self.config.knockdown_factor * defender.plan.current_stake():
                    events.append(StepEvent("knockdown", t, target_id, other=aid))
                    defender.stun_remaining = self.config.knockdown_steps
                defender.plan = None
                interrupted.add(target_id)

        # 4. advance plans and physical states
        for aid in order:
            ag = nxt.agents[aid]
            if executing[aid] and ag.plan is not None:
                action = ag.plan.actions[ag.plan.progress]
                ag.physical = action.end_state
                ag.plan.progress += 1
                if ag.plan.done:
                    if ag.plan.kind == "dbm":
                        events.append(
                            StepEvent("dbm_completed", t, aid, value=ag.plan.accrued)
                        )
                    ag.plan = None
            elif not executing[aid] and ag.stun_remaining == 0 and aid not in interrupted:
                if nxt.agents[aid].plan is None:
                    ag.physical = self.rest_state  # idle relaxes back to rest

        nxt.step = t + 1
        return nxt, rewards, events


def events_to_jsonl(events: Iterable[StepEvent]) -> str:
    return "".join(json.dumps(e.to_record(), sort_keys=True) + "\n" for e in events)


def run_scripted_episode(
    env: CombatEnv,
    schedule: Mapping[str, Mapping[int, tuple]],
    episode_length: int,
    seed: int = 0,
) -> tuple[GameState, dict[str, float], list[StepEvent]]:
    """Run one episode from a per-agent step -> command schedule.

    Unscheduled steps continue the agent's active plan or idle.  Returns the
    final state, per-agent reward totals, and the full event log.
    """
    state = env.reset(seed)
    totals = {aid: 0.0 for aid in state.agents}
    event_log: list[StepEvent] = []
    for t in range(episode_length):
        commands: dict[str, tuple] = {}
        for aid in state.agents:
            entry = schedule.get(aid, {}).get(t)
            if entry is not None:
                commands[aid] = entry
            elif state.agents[aid].plan is not None:
                commands[aid] = CONTINUE
            else:
                commands[aid] = IDLE
        state, rewards, events = env.step(state, commands, inplace=True)
        for aid, r in rewards.items():
            totals[aid] += r
        event_log.extend(events)
    return state, totals, event_log
