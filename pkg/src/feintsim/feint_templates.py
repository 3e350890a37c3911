"""Feint synthesis: reflection, palindrome cuts, splices, and template precomputation.

A feint is a reward-free action sequence carved out of real attack
behaviors.  Three construction routes exist:

* splice - prefix of one behavior joined to the suffix of another at a
  pair of similar states;
* prefix palindrome - a stretch-out prefix followed by its own reflection;
* suffix palindrome - a reflected retract suffix followed by the original.

Templates are precomputed once per catalog: for every ordered behavior
pair and every common action occurrence, the actions available before the
junction in the first behavior and after it in the second are recorded as
a lookup key for fast dual-behavior composition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any

from .catalog import Behavior, Catalog, PhysicalState, UnitAction, validate_behavior
from .errors import CutOutOfRange, EmptySequence, NotSimilar, ParseError, RewardLeak

REFLECT_MARK = "~"


class Variant(str, Enum):
    SPLICE_SIMILAR = "splice_similar"
    PREFIX_PALINDROME = "prefix_palindrome"
    SUFFIX_PALINDROME = "suffix_palindrome"


def reflected_id(action_id: str) -> str:
    """Id of the time-reversed copy of an action; applying twice restores it."""
    if action_id.startswith(REFLECT_MARK):
        return action_id[len(REFLECT_MARK) :]
    return REFLECT_MARK + action_id


def origin_id(action_id: str) -> str:
    return action_id[len(REFLECT_MARK) :] if action_id.startswith(REFLECT_MARK) else action_id


def reflect_actions(seq: tuple[UnitAction, ...]) -> tuple[UnitAction, ...]:
    """Reverse a sequence and swap each action's start/end states.

    ``seq + reflect_actions(seq)`` starts and ends in the same state
    exactly, and reflection is an involution.
    """
    if not seq:
        raise EmptySequence("cannot reflect an empty action sequence")
    return tuple(
        UnitAction(id=reflected_id(a.id), start_state=a.end_state, end_state=a.start_state)
        for a in reversed(seq)
    )


@dataclass(frozen=True)
class SourceSpan:
    """Provenance of one feint action: where it came from and whether reflected."""

    behavior_id: str
    index: int
    reflected: bool


@dataclass(frozen=True)
class FeintBehavior:
    """A reward-free deceptive action run with provenance per action."""

    actions: tuple[UnitAction, ...]
    origin: str
    variant: Variant
    cut_index: int | None
    sources: tuple[SourceSpan, ...]

    @property
    def length(self) -> int:
        return len(self.actions)

    @property
    def start_state(self) -> PhysicalState:
        return self.actions[0].start_state

    @property
    def end_state(self) -> PhysicalState:
        return self.actions[-1].end_state

    def trajectory(self) -> tuple[PhysicalState, ...]:
        states = [self.actions[0].start_state]
        states.extend(a.end_state for a in self.actions)
        return tuple(states)

    def as_behavior(self) -> Behavior:
        """View as a rewardless Behavior so the catalog validator applies."""
        n = len(self.actions)
        return Behavior(
            id=f"feint:{self.origin}",
            name=f"feint from {self.origin}",
            actions=self.actions,
            stretch_end=n,
            reward_end=n,
            reward_value=0.0,
        )


def _leaking_indices(behavior: Behavior, indices: range) -> list[int]:
    rr = behavior.reward_index_range()
    return [i for i in indices if i in rr]


def generate_prefix_palindrome(b: Behavior, cut: int) -> FeintBehavior:
    """Stretch-out prefix up to ``cut`` followed by its reflection.

    The cut must land inside the stretch-out run, so the result never touches
    the reward run and returns exactly to the behavior's start state.
    """
    if not 0 < cut <= b.stretch_end:
        raise CutOutOfRange(
            f"cut {cut} outside stretch-out run (0, {b.stretch_end}] of behavior {b.id!r}"
        )
    prefix = b.actions[:cut]
    actions = prefix + reflect_actions(prefix)
    sources = tuple(SourceSpan(b.id, i, False) for i in range(cut)) + tuple(
        SourceSpan(b.id, i, True) for i in reversed(range(cut))
    )
    return FeintBehavior(
        actions=actions, origin=b.id, variant=Variant.PREFIX_PALINDROME, cut_index=cut, sources=sources
    )


def generate_suffix_palindrome(b: Behavior, cut: int) -> FeintBehavior:
    """Reflected retract suffix from ``cut`` followed by the original suffix."""
    n = len(b.actions)
    if not b.reward_end <= cut < n:
        raise CutOutOfRange(
            f"cut {cut} outside retract run [{b.reward_end}, {n}) of behavior {b.id!r}"
        )
    suffix = b.actions[cut:]
    actions = reflect_actions(suffix) + suffix
    sources = tuple(SourceSpan(b.id, i, True) for i in reversed(range(cut, n))) + tuple(
        SourceSpan(b.id, i, False) for i in range(cut, n)
    )
    return FeintBehavior(
        actions=actions, origin=b.id, variant=Variant.SUFFIX_PALINDROME, cut_index=cut, sources=sources
    )


def generate_splice(
    bi: Behavior, bj: Behavior, pair: tuple[int, int], cat: Catalog
) -> FeintBehavior:
    """Join ``bi``'s prefix to ``bj``'s suffix at a pair of similar states.

    ``pair = (idx_i, idx_j)`` names trajectory states: the state reached after
    ``idx_i`` actions of ``bi`` must be within the catalog tolerance of the
    state from which ``bj``'s action ``idx_j`` starts.
    """
    idx_i, idx_j = pair
    if not 1 <= idx_i <= len(bi.actions):
        raise CutOutOfRange(f"idx_i {idx_i} outside [1, {len(bi.actions)}] for behavior {bi.id!r}")
    if not 0 <= idx_j < len(bj.actions):
        raise CutOutOfRange(f"idx_j {idx_j} outside [0, {len(bj.actions)}) for behavior {bj.id!r}")
    state_i = bi.trajectory()[idx_i]
    state_j = bj.trajectory()[idx_j]
    gap = cat.state_distance(state_i, state_j)
    if gap > cat.epsilon_state:
        raise NotSimilar(
            f"states at ({bi.id!r}[{idx_i}], {bj.id!r}[{idx_j}]) differ by {gap:.6g} "
            f"> epsilon {cat.epsilon_state:.6g}"
        )
    leaks = _leaking_indices(bi, range(0, idx_i)) + _leaking_indices(bj, range(idx_j, len(bj.actions)))
    if leaks:
        raise RewardLeak(
            f"splice of {bi.id!r}[:{idx_i}] + {bj.id!r}[{idx_j}:] would include reward actions"
        )
    actions = bi.actions[:idx_i] + bj.actions[idx_j:]
    sources = tuple(SourceSpan(bi.id, i, False) for i in range(idx_i)) + tuple(
        SourceSpan(bj.id, i, False) for i in range(idx_j, len(bj.actions))
    )
    return FeintBehavior(
        actions=actions,
        origin=f"{bi.id}+{bj.id}",
        variant=Variant.SPLICE_SIMILAR,
        cut_index=idx_i,
        sources=sources,
    )


def feint_reward_leaks(feint: FeintBehavior, cat: Catalog) -> list[SourceSpan]:
    """Source spans of feint actions that originate in any reward run."""
    leaks = []
    for span in feint.sources:
        behavior = cat.behavior(span.behavior_id)
        if span.index in behavior.reward_index_range():
            leaks.append(span)
    return leaks


def validate_feint(feint: FeintBehavior, cat: Catalog) -> bool:
    """True iff the feint is continuous and free of reward-run actions."""
    if feint_reward_leaks(feint, cat):
        return False
    return validate_behavior(feint.as_behavior(), cat).ok


# --- template precomputation ------------------------------------------------


@dataclass(frozen=True, order=True)
class FeintTemplate:
    """Lookup key for composing feints: a common action occurrence across a
    behavior pair plus the action ids available on each side of it."""

    junction_action: str
    behavior_i: str
    behavior_j: str
    junction_idx_i: int
    junction_idx_j: int
    avail_prefix: tuple[str, ...]
    avail_suffix: tuple[str, ...]
    variant: Variant


@dataclass(frozen=True)
class TemplateSet:
    templates: tuple[FeintTemplate, ...]
    common_mode: str = "id"

    def __len__(self) -> int:
        return len(self.templates)

    def counts_by_variant(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for t in self.templates:
            out[t.variant.value] = out.get(t.variant.value, 0) + 1
        return dict(sorted(out.items()))


def _occurrence_common(
    a: UnitAction, c: UnitAction, cat: Catalog, mode: str
) -> bool:
    if a.id == c.id:
        return True
    if mode == "similar":
        return (
            cat.state_distance(a.start_state, c.start_state) <= cat.epsilon_state
            and cat.state_distance(a.end_state, c.end_state) <= cat.epsilon_state
        )
    return False


def _variant_for(bi: Behavior, bj: Behavior, k_i: int) -> Variant:
    if bi.id != bj.id:
        return Variant.SPLICE_SIMILAR
    return Variant.PREFIX_PALINDROME if k_i <= bi.stretch_end else Variant.SUFFIX_PALINDROME


def precompute_templates(cat: Catalog, common_mode: str = "id") -> TemplateSet:
    """Enumerate all feint templates over ordered behavior pairs.

    ``common_mode`` selects the junction predicate: ``"id"`` requires the
    same action id at both occurrences; ``"similar"`` additionally accepts
    distinct actions whose start and end states each match within the
    catalog tolerance.  Output is canonically sorted, so the result is a
    pure function of the catalog.
    """
    if common_mode not in ("id", "similar"):
        raise ValueError(f"unknown common_mode {common_mode!r}")
    templates: set[FeintTemplate] = set()
    for bi in cat.behaviors:
        for bj in cat.behaviors:
            for k_i, a in enumerate(bi.actions):
                for k_j, c in enumerate(bj.actions):
                    if not _occurrence_common(a, c, cat, common_mode):
                        continue
                    templates.add(
                        FeintTemplate(
                            junction_action=a.id,
                            behavior_i=bi.id,
                            behavior_j=bj.id,
                            junction_idx_i=k_i,
                            junction_idx_j=k_j,
                            avail_prefix=tuple(x.id for x in bi.actions[:k_i]),
                            avail_suffix=tuple(x.id for x in bj.actions[k_j + 1 :]),
                            variant=_variant_for(bi, bj, k_i),
                        )
                    )
    return TemplateSet(templates=tuple(sorted(templates)), common_mode=common_mode)


def templates_to_dict(ts: TemplateSet) -> dict[str, Any]:
    return {
        "common_mode": ts.common_mode,
        "templates": [
            {
                "junction": t.junction_action,
                "behavior_i": t.behavior_i,
                "behavior_j": t.behavior_j,
                "idx_i": t.junction_idx_i,
                "idx_j": t.junction_idx_j,
                "avail_prefix": list(t.avail_prefix),
                "avail_suffix": list(t.avail_suffix),
                "variant": t.variant.value,
            }
            for t in ts.templates
        ],
    }


def templates_from_dict(data: Any) -> TemplateSet:
    if not isinstance(data, dict) or "templates" not in data:
        raise ParseError("template file must be an object with a 'templates' list")
    templates = []
    for raw in data["templates"]:
        templates.append(
            FeintTemplate(
                junction_action=str(raw["junction"]),
                behavior_i=str(raw["behavior_i"]),
                behavior_j=str(raw["behavior_j"]),
                junction_idx_i=int(raw["idx_i"]),
                junction_idx_j=int(raw["idx_j"]),
                avail_prefix=tuple(raw["avail_prefix"]),
                avail_suffix=tuple(raw["avail_suffix"]),
                variant=Variant(raw["variant"]),
            )
        )
    return TemplateSet(templates=tuple(sorted(templates)), common_mode=str(data.get("common_mode", "id")))


def save_templates(ts: TemplateSet, path: str | Path) -> None:
    Path(path).write_text(json.dumps(templates_to_dict(ts), indent=2, sort_keys=True) + "\n")


def load_templates(path: str | Path) -> TemplateSet:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return templates_from_dict(data)
