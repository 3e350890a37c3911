"""Independent brute-force enumerators used as test oracles.

These are written as direct nested-loop transcriptions, deliberately
ignoring the package's lookup structures, so the fast implementations can
be checked set-for-set against them.
"""

from __future__ import annotations

from feintsim.catalog import Catalog


def oracle_common_occurrences(cat: Catalog, bi_id: str, bj_id: str, mode: str = "id"):
    """All (k_i, k_j) index pairs where the two behaviors share an action."""
    bi = cat.behavior(bi_id)
    bj = cat.behavior(bj_id)
    pairs = []
    for k_i in range(len(bi.actions)):
        for k_j in range(len(bj.actions)):
            a = bi.actions[k_i]
            c = bj.actions[k_j]
            same = a.id == c.id
            if not same and mode == "similar":
                same = (
                    cat.state_distance(a.start_state, c.start_state) <= cat.epsilon_state
                    and cat.state_distance(a.end_state, c.end_state) <= cat.epsilon_state
                )
            if same:
                pairs.append((k_i, k_j))
    return pairs


def oracle_templates(cat: Catalog, mode: str = "id"):
    """Template tuples for every ordered behavior pair and common occurrence."""
    out = set()
    for bi in cat.behaviors:
        for bj in cat.behaviors:
            for k_i, k_j in oracle_common_occurrences(cat, bi.id, bj.id, mode):
                prefix = tuple(a.id for a in bi.actions[:k_i])
                suffix = tuple(a.id for a in bj.actions[k_j + 1 :])
                out.add((bi.actions[k_i].id, bi.id, bj.id, k_i, k_j, prefix, suffix))
    return out


def oracle_dbm_keys(
    cat: Catalog,
    a_t: str,
    a_target: str,
    min_feint_len: int = 2,
    max_feint_len: int | None = None,
    mode: str = "id",
):
    """Valid dual-behavior compositions by exhaustive scan.

    A composition is keyed by (behavior_i, behavior_j, k_i, k_j, t_idx) and is
    valid when: a_t occurs in behavior_i before the junction, a_target occurs
    in behavior_j after it, neither the out-leg of behavior_i nor the reach-back
    prefix of behavior_j touches a reward run, the weld states meet within the
    catalog tolerance, behavior_j actually has a reward run, and the feint
    length (out-leg + reflected prefix) stays inside the configured bounds.
    """
    if max_feint_len is None:
        max_feint_len = 2 * max(b.stretch_end for b in cat.behaviors)
    keys = set()
    for bi in cat.behaviors:
        for bj in cat.behaviors:
            if bj.stretch_end == bj.reward_end:
                continue  # no reward reachable through this follow-up
            for k_i, k_j in oracle_common_occurrences(cat, bi.id, bj.id, mode):
                for t_idx in range(k_i):
                    if bi.actions[t_idx].id != a_t:
                        continue
                    if not any(a.id == a_target for a in bj.actions[k_j + 1 :]):
                        continue
                    out_indices = range(t_idx, k_i)
                    back_indices = range(0, k_j)
                    if any(i in bi.reward_index_range() for i in out_indices):
                        continue
                    if any(j in bj.reward_index_range() for j in back_indices):
                        continue
                    feint_len = (k_i - t_idx) + k_j
                    if not min_feint_len <= feint_len <= max_feint_len:
                        continue
                    # weld: out-leg stops where the junction starts in behavior_i;
                    # the reflected prefix starts where the junction starts in behavior_j
                    weld_a = bi.actions[k_i].start_state
                    weld_b = bj.actions[k_j].start_state
                    if cat.state_distance(weld_a, weld_b) > cat.epsilon_state:
                        continue
                    keys.add((bi.id, bj.id, k_i, k_j, t_idx))
    return keys
