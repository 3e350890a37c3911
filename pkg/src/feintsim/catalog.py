"""Attack-behavior catalog: physical states, unit actions, and validated behaviors.

A behavior is an ordered run of unit-time-step actions split into three
phases: stretch-out, reward, retract.  Everything downstream (feint
synthesis, dual-behavior composition, the game environment) works on
catalogs validated here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

from .errors import DimensionError, ParseError, ValidationError

DEFAULT_EPSILON_STATE = 0.05

# Footing mismatch is a hard physical break: the penalty keeps any pair of
# states with different feet forward outside every similarity tolerance.
FOOTING_PENALTY_FACTOR = 2.0


class Footing(str, Enum):
    LEFT_FORWARD = "LeftForward"
    RIGHT_FORWARD = "RightForward"
    NEUTRAL = "Neutral"


@dataclass(frozen=True)
class PhysicalState:
    """Joint-position snapshot of an agent's body.

    ``joints`` holds one ``(x, y, angle)`` triple per tracked joint, all
    coordinates normalized to [-1, 1].
    """

    joints: tuple[tuple[float, float, float], ...]
    footing: Footing = Footing.NEUTRAL

    def __post_init__(self) -> None:
        for triple in self.joints:
            for coord in triple:
                if not math.isfinite(coord):
                    raise ValidationError(f"non-finite joint coordinate {coord!r}")
                if not -1.0 <= coord <= 1.0:
                    raise ValidationError(f"joint coordinate {coord!r} outside [-1, 1]")

    @property
    def joint_count(self) -> int:
        return len(self.joints)


def state_distance(
    a: PhysicalState,
    b: PhysicalState,
    footing_penalty: float = FOOTING_PENALTY_FACTOR * DEFAULT_EPSILON_STATE,
) -> float:
    """L-infinity distance over joint coordinates, plus a footing penalty.

    The max-norm makes "every joint is close" literal; a footing mismatch
    adds ``footing_penalty`` so states with different feet forward can never
    count as similar.
    """
    if a.joint_count != b.joint_count:
        raise DimensionError(
            f"joint count mismatch: {a.joint_count} vs {b.joint_count}"
        )
    worst = 0.0
    for ja, jb in zip(a.joints, b.joints):
        for ca, cb in zip(ja, jb):
            delta = abs(ca - cb)
            if delta > worst:
                worst = delta
    if a.footing != b.footing:
        worst += footing_penalty
    return worst


@dataclass(frozen=True)
class UnitAction:
    """Minimal movement spanning exactly one time step."""

    id: str
    start_state: PhysicalState
    end_state: PhysicalState

    DURATION = 1  # steps; unit actions are the time base for everything


@dataclass(frozen=True)
class Behavior:
    """An attack split into stretch-out / reward / retract action runs."""

    id: str
    name: str
    actions: tuple[UnitAction, ...]
    stretch_end: int
    reward_end: int
    reward_value: float

    @property
    def stretch_actions(self) -> tuple[UnitAction, ...]:
        return self.actions[: self.stretch_end]

    @property
    def reward_actions(self) -> tuple[UnitAction, ...]:
        return self.actions[self.stretch_end : self.reward_end]

    @property
    def retract_actions(self) -> tuple[UnitAction, ...]:
        return self.actions[self.reward_end :]

    def reward_index_range(self) -> range:
        return range(self.stretch_end, self.reward_end)

    def trajectory(self) -> tuple[PhysicalState, ...]:
        """States visited while executing the behavior: n actions -> n+1 states."""
        if not self.actions:
            return ()
        states = [self.actions[0].start_state]
        states.extend(a.end_state for a in self.actions)
        return tuple(states)

    def __len__(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class Violation:
    rule: str
    index: int | None
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    behavior_id: str
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class Catalog:
    """Immutable, validated set of behaviors sharing one joint layout."""

    behaviors: tuple[Behavior, ...]
    epsilon_state: float = DEFAULT_EPSILON_STATE
    joint_count: int = 0

    def __post_init__(self) -> None:
        if self.epsilon_state <= 0:
            raise ValidationError("epsilon_state must be positive")

    @property
    def footing_penalty(self) -> float:
        return FOOTING_PENALTY_FACTOR * self.epsilon_state

    def state_distance(self, a: PhysicalState, b: PhysicalState) -> float:
        return state_distance(a, b, footing_penalty=self.footing_penalty)

    def similar(self, a: PhysicalState, b: PhysicalState) -> bool:
        return self.state_distance(a, b) <= self.epsilon_state

    def behavior(self, behavior_id: str) -> Behavior:
        for b in self.behaviors:
            if b.id == behavior_id:
                return b
        raise KeyError(behavior_id)

    def behavior_ids(self) -> tuple[str, ...]:
        return tuple(b.id for b in self.behaviors)

    def action_index(self) -> dict[str, UnitAction]:
        """Unique id -> action mapping over the whole catalog."""
        out: dict[str, UnitAction] = {}
        for b in self.behaviors:
            for a in b.actions:
                out.setdefault(a.id, a)
        return out

    def occurrences(self, action_id: str) -> tuple[tuple[str, int], ...]:
        """All (behavior_id, index) positions where an action id appears."""
        hits = []
        for b in self.behaviors:
            for idx, a in enumerate(b.actions):
                if a.id == action_id:
                    hits.append((b.id, idx))
        return tuple(hits)


def validate_behavior(behavior: Behavior, cat: Catalog) -> ValidationReport:
    """Check partition indices and adjacent-state continuity.

    The report lists every violation; an empty report means the behavior is
    valid under the catalog's tolerance.
    """
    violations: list[Violation] = []
    n = len(behavior.actions)
    if not 0 < behavior.stretch_end <= behavior.reward_end <= n:
        violations.append(
            Violation(
                rule="partition",
                index=None,
                detail=(
                    f"need 0 < stretch_end <= reward_end <= {n}, got "
                    f"stretch_end={behavior.stretch_end}, reward_end={behavior.reward_end}"
                ),
            )
        )
    if behavior.reward_value < 0:
        violations.append(
            Violation(rule="reward_value", index=None, detail=f"negative reward {behavior.reward_value}")
        )
    for k in range(n - 1):
        gap = cat.state_distance(behavior.actions[k].end_state, behavior.actions[k + 1].start_state)
        if gap > cat.epsilon_state:
            violations.append(
                Violation(
                    rule="continuity",
                    index=k,
                    detail=f"gap {gap:.6g} > epsilon {cat.epsilon_state:.6g} between actions {k} and {k + 1}",
                )
            )
    return ValidationReport(behavior_id=behavior.id, violations=tuple(violations))


# --- serialization ---------------------------------------------------------
#
# Catalog file schema (strict; unknown fields rejected):
#   {epsilon_state, joint_count,
#    behaviors: [{id, name, reward_value, stretch_end, reward_end,
#                 actions: [{id, start_state: {joints: [[x,y,angle],...],
#                                              footing},
#                            end_state: {...}}]}]}

_STATE_FIELDS = {"joints", "footing"}
_ACTION_FIELDS = {"id", "start_state", "end_state"}
_BEHAVIOR_FIELDS = {"id", "name", "reward_value", "stretch_end", "reward_end", "actions"}
_TOP_FIELDS = {"epsilon_state", "joint_count", "behaviors"}


def _reject_unknown(obj: dict[str, Any], allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ParseError(f"unknown field(s) {sorted(unknown)} in {where}")


def _state_from_dict(obj: Any, where: str) -> PhysicalState:
    if not isinstance(obj, dict):
        raise ParseError(f"{where} must be an object")
    _reject_unknown(obj, _STATE_FIELDS, where)
    try:
        joints_raw = obj["joints"]
        footing_raw = obj["footing"]
    except KeyError as exc:
        raise ParseError(f"missing field {exc} in {where}") from None
    if not isinstance(joints_raw, list):
        raise ParseError(f"{where}.joints must be a list")
    joints = []
    for triple in joints_raw:
        if not isinstance(triple, list) or len(triple) != 3:
            raise ParseError(f"each joint in {where} must be a 3-element list")
        joints.append(tuple(float(c) for c in triple))
    try:
        footing = Footing(footing_raw)
    except ValueError:
        raise ParseError(f"bad footing {footing_raw!r} in {where}") from None
    try:
        return PhysicalState(joints=tuple(joints), footing=footing)
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from None


def _state_to_dict(state: PhysicalState) -> dict[str, Any]:
    return {
        "joints": [list(triple) for triple in state.joints],
        "footing": state.footing.value,
    }


def catalog_from_dict(data: Any) -> Catalog:
    if not isinstance(data, dict):
        raise ParseError("catalog root must be an object")
    _reject_unknown(data, _TOP_FIELDS, "catalog")
    for key in _TOP_FIELDS:
        if key not in data:
            raise ParseError(f"missing top-level field {key!r}")
    epsilon = float(data["epsilon_state"])
    joint_count = int(data["joint_count"])
    if epsilon <= 0:
        raise ValidationError("epsilon_state must be positive")
    if joint_count <= 0:
        raise ValidationError("joint_count must be positive")

    behaviors: list[Behavior] = []
    seen_behaviors: set[str] = set()
    action_registry: dict[str, UnitAction] = {}
    for b_raw in data["behaviors"]:
        if not isinstance(b_raw, dict):
            raise ParseError("behavior entries must be objects")
        _reject_unknown(b_raw, _BEHAVIOR_FIELDS, f"behavior {b_raw.get('id')!r}")
        for key in _BEHAVIOR_FIELDS:
            if key not in b_raw:
                raise ParseError(f"missing field {key!r} in behavior {b_raw.get('id')!r}")
        bid = str(b_raw["id"])
        if bid in seen_behaviors:
            raise ValidationError(f"duplicate behavior id {bid!r}")
        seen_behaviors.add(bid)
        actions: list[UnitAction] = []
        for a_raw in b_raw["actions"]:
            if not isinstance(a_raw, dict):
                raise ParseError(f"actions of behavior {bid!r} must be objects")
            _reject_unknown(a_raw, _ACTION_FIELDS, f"action in behavior {bid!r}")
            for key in _ACTION_FIELDS:
                if key not in a_raw:
                    raise ParseError(f"missing field {key!r} in an action of behavior {bid!r}")
            aid = str(a_raw["id"])
            start = _state_from_dict(a_raw["start_state"], f"behavior {bid!r} action {aid!r} start_state")
            end = _state_from_dict(a_raw["end_state"], f"behavior {bid!r} action {aid!r} end_state")
            for st in (start, end):
                if st.joint_count != joint_count:
                    raise DimensionError(
                        f"behavior {bid!r} action {aid!r}: joint count {st.joint_count} != {joint_count}"
                    )
            action = UnitAction(id=aid, start_state=start, end_state=end)
            known = action_registry.get(aid)
            if known is None:
                action_registry[aid] = action
            elif known != action:
                raise ValidationError(
                    f"action id {aid!r} reused with different states (behavior {bid!r})"
                )
            else:
                action = known
            actions.append(action)
        behaviors.append(
            Behavior(
                id=bid,
                name=str(b_raw["name"]),
                actions=tuple(actions),
                stretch_end=int(b_raw["stretch_end"]),
                reward_end=int(b_raw["reward_end"]),
                reward_value=float(b_raw["reward_value"]),
            )
        )

    cat = Catalog(behaviors=tuple(behaviors), epsilon_state=epsilon, joint_count=joint_count)
    for b in cat.behaviors:
        report = validate_behavior(b, cat)
        if not report.ok:
            first = report.violations[0]
            raise ValidationError(f"behavior {b.id!r} invalid ({first.rule}): {first.detail}")
    return cat


def catalog_to_dict(cat: Catalog) -> dict[str, Any]:
    return {
        "epsilon_state": cat.epsilon_state,
        "joint_count": cat.joint_count,
        "behaviors": [
            {
                "id": b.id,
                "name": b.name,
                "reward_value": b.reward_value,
                "stretch_end": b.stretch_end,
                "reward_end": b.reward_end,
                "actions": [
                    {
                        "id": a.id,
                        "start_state": _state_to_dict(a.start_state),
                        "end_state": _state_to_dict(a.end_state),
                    }
                    for a in b.actions
                ],
            }
            for b in cat.behaviors
        ],
    }


def load_catalog(path: str | Path) -> Catalog:
    """Load and validate a catalog file; any invariant violation rejects it."""
    raw = Path(path).read_text()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return catalog_from_dict(data)


def save_catalog(cat: Catalog, path: str | Path) -> None:
    Path(path).write_text(json.dumps(catalog_to_dict(cat), indent=2, sort_keys=True) + "\n")
