"""Dual-behavior composition and feint-length timing classification.

A dual-behavior model (DBM) welds a reward-free feint onto a complete
high-reward follow-up behavior.  Composition runs backward: the intended
target action pins the follow-up behavior, the last known action pins the
feint's first action, and precomputed templates supply the junctions where
the two behaviors share an action occurrence.

The executed stream is::

    out-leg (behavior_i, from a_t up to the junction)
    reflected reach-back (behavior_j's pre-junction prefix, time-reversed)
    follow-up (all of behavior_j, through its reward run)

so the feint ends exactly where the follow-up starts.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .catalog import Behavior, Catalog, UnitAction
from .errors import InvalidWindow, UnknownAction
from .feint_templates import (
    FeintBehavior,
    SourceSpan,
    TemplateSet,
    Variant,
    reflect_actions,
)

MIN_FEINT_LEN = 2


class TimingClass(str, Enum):
    TOO_SHORT = "too_short"
    PROPER = "proper"
    TOO_LONG = "too_long"


def classify_timing(t_a2: int, t_b1: int, t_b2: int) -> TimingClass:
    """Classify a feint by when the attacker's reward starts relative to the
    opponent's estimated defense end (t_b1) and reward start (t_b2).

    Ties: arriving exactly at the defense end still lands (proper); arriving
    exactly when the opponent's reward starts is already too late (too long).
    """
    if t_b1 >= t_b2:
        raise InvalidWindow(f"need t_b1 < t_b2, got {t_b1} >= {t_b2}")
    if t_a2 < t_b1:
        return TimingClass.TOO_SHORT
    if t_a2 < t_b2:
        return TimingClass.PROPER
    return TimingClass.TOO_LONG


@dataclass(frozen=True)
class DualBehaviorModel:
    """A feint welded to a complete follow-up behavior."""

    feint: FeintBehavior
    junction: str
    select_i: tuple[str, ...]
    select_j: tuple[str, ...]
    followup: tuple[UnitAction, ...]
    behavior_i: str
    target_behavior_id: str
    junction_idx_i: int
    junction_idx_j: int
    start_idx: int

    @property
    def t_f(self) -> int:
        return self.feint.length

    @property
    def t_s(self) -> int:
        return self.feint.length + len(self.followup)

    @property
    def actions(self) -> tuple[UnitAction, ...]:
        return self.feint.actions + self.followup

    def key(self) -> tuple:
        return (
            self.behavior_i,
            self.target_behavior_id,
            self.junction_idx_i,
            self.junction_idx_j,
            self.start_idx,
        )

    def reward_offsets(self, cat: Catalog) -> range:
        """Step offsets within the DBM where the follow-up's reward run lands."""
        target = cat.behavior(self.target_behavior_id)
        return range(self.t_f + target.stretch_end, self.t_f + target.reward_end)


def max_feint_length(cat: Catalog) -> int:
    return 2 * max(b.stretch_end for b in cat.behaviors)


def _build_feint(
    bi: Behavior, bj: Behavior, t_idx: int, k_i: int, k_j: int, variant: Variant
) -> FeintBehavior:
    out_leg = bi.actions[t_idx:k_i]
    back_leg = reflect_actions(bj.actions[:k_j]) if k_j > 0 else ()
    sources = tuple(SourceSpan(bi.id, i, False) for i in range(t_idx, k_i)) + tuple(
        SourceSpan(bj.id, j, True) for j in reversed(range(k_j))
    )
    return FeintBehavior(
        actions=out_leg + back_leg,
        origin=f"{bi.id}>{bj.id}@{k_i}:{k_j}",
        variant=variant,
        cut_index=k_i,
        sources=sources,
    )


def compose_dbms(
    a_t: str,
    a_target: str,
    templates: TemplateSet,
    cat: Catalog,
    min_feint_len: int = MIN_FEINT_LEN,
    max_feint_len: int | None = None,
) -> tuple[DualBehaviorModel, ...]:
    """All valid dual-behavior models reachable from ``a_t`` toward ``a_target``.

    One pass over the template set; no behavior-pair re-enumeration.  A
    template matches when ``a_t`` is available before its junction and
    ``a_target`` after it; the match is kept only if the feint stays
    reward-free, the weld states meet within the catalog tolerance, the
    follow-up has a reward run to collect, and the feint length is within
    bounds.  Every matching start occurrence yields its own model, so the
    learner can pick among feint lengths.
    """
    known = cat.action_index()
    if a_t not in known:
        raise UnknownAction(f"a_t {a_t!r} not in catalog")
    if a_target not in known:
        raise UnknownAction(f"a_target {a_target!r} not in catalog")
    if max_feint_len is None:
        max_feint_len = max_feint_length(cat)

    results: dict[tuple, DualBehaviorModel] = {}
    for tpl in templates.templates:
        if a_t not in tpl.avail_prefix or a_target not in tpl.avail_suffix:
            continue
        bi = cat.behavior(tpl.behavior_i)
        bj = cat.behavior(tpl.behavior_j)
        if bj.stretch_end == bj.reward_end:
            continue  # follow-up without a reward run gains nothing
        k_i, k_j = tpl.junction_idx_i, tpl.junction_idx_j
        reward_i = bi.reward_index_range()
        if any(j in bj.reward_index_range() for j in range(k_j)):
            continue
        weld_gap = cat.state_distance(
            bi.actions[k_i].start_state, bj.actions[k_j].start_state
        )
        if weld_gap > cat.epsilon_state:
            continue
        for t_idx in range(k_i):
            if bi.actions[t_idx].id != a_t:
                continue
            if any(i in reward_i for i in range(t_idx, k_i)):
                continue
            feint_len = (k_i - t_idx) + k_j
            if not min_feint_len <= feint_len <= max_feint_len:
                continue
            feint = _build_feint(bi, bj, t_idx, k_i, k_j, tpl.variant)
            model = DualBehaviorModel(
                feint=feint,
                junction=tpl.junction_action,
                select_i=tuple(a.id for a in bi.actions[t_idx:k_i]),
                select_j=tpl.avail_suffix,
                followup=bj.actions,
                behavior_i=bi.id,
                target_behavior_id=bj.id,
                junction_idx_i=k_i,
                junction_idx_j=k_j,
                start_idx=t_idx,
            )
            results[model.key()] = model
    return tuple(results[k] for k in sorted(results))
