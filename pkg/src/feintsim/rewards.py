"""Strategy-level reward terms: short/long temporal windows, occupancy-based
spatial divergence, and their collective combination.

Window convention for a feint cycle starting at step ``t_0``: the feint
occupies ``[t_0, t_0 + t_f]``, the follow-up attack ``[t_0 + t_f + 1,
t_0 + t_s]``, and the long-term tail ``[t_0 + t_s + 1, T]``, all bounds
inclusive.  The long-term average is normalized by ``T`` itself, not by the
tail length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import UnsupportedState, ValidationError, WindowMismatch

DEFAULT_LAMBDA_SHORT = 0.67
DEFAULT_LAMBDA_LONG = 0.33
DEFAULT_MU1 = 0.5
DEFAULT_MU2 = 0.5
DEFAULT_ALPHA_FEINT = 0.1
DEFAULT_ALPHA_ATTACK = 1.0
DEFAULT_BETA = 1.0
DIVERGENCE_SMOOTHING = 1e-6


@dataclass(frozen=True)
class WeightSchedule:
    """Per-step weights for the feint, attack, and long-term windows."""

    alpha_feint: tuple[float, ...]
    alpha_attack: tuple[float, ...]
    beta: tuple[float, ...]
    lambda_short: float = DEFAULT_LAMBDA_SHORT
    lambda_long: float = DEFAULT_LAMBDA_LONG
    mu1: float = DEFAULT_MU1
    mu2: float = DEFAULT_MU2

    def __post_init__(self) -> None:
        for name in ("alpha_feint", "alpha_attack", "beta"):
            if any(w < 0 for w in getattr(self, name)):
                raise ValidationError(f"{name} weights must be non-negative")
        for name in ("lambda_short", "lambda_long", "mu1", "mu2"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if abs(self.lambda_short + self.lambda_long - 1.0) > 1e-9:
            raise ValidationError("lambda_short + lambda_long must equal 1")

    @classmethod
    def uniform(
        cls,
        t_f: int,
        t_s: int,
        T: int,
        t_0: int = 0,
        alpha_feint: float = DEFAULT_ALPHA_FEINT,
        alpha_attack: float = DEFAULT_ALPHA_ATTACK,
        beta: float = DEFAULT_BETA,
        **kw: float,
    ) -> "WeightSchedule":
        """Constant weights sized exactly to the three windows."""
        return cls(
            alpha_feint=(alpha_feint,) * (t_f + 1),
            alpha_attack=(alpha_attack,) * (t_s - t_f),
            beta=(beta,) * (T - t_0 - t_s),
            **kw,
        )

    def rebalanced(self, reward_delta: float, eta: float = 0.01) -> "WeightSchedule":
        """Optional multiplicative nudge of the short/long mix.

        Off by default in every config; shifts weight toward the short term
        when the recent reward trend is positive, clipped to [0.1, 0.9] and
        renormalized.
        """
        shifted = self.lambda_short * (1.0 + eta * math.copysign(1.0, reward_delta))
        short = min(0.9, max(0.1, shifted))
        return WeightSchedule(
            alpha_feint=self.alpha_feint,
            alpha_attack=self.alpha_attack,
            beta=self.beta,
            lambda_short=short,
            lambda_long=1.0 - short,
            mu1=self.mu1,
            mu2=self.mu2,
        )


@dataclass(frozen=True)
class TrajectoryStep:
    state_key: Hashable
    joint_actions: tuple
    rewards: tuple[float, ...]


@dataclass(frozen=True)
class Trajectory:
    """Contiguous run of steps starting at global step index ``t_0``."""

    t_0: int
    steps: tuple[TrajectoryStep, ...]

    def __post_init__(self) -> None:
        if self.steps:
            n_agents = len(self.steps[0].rewards)
            if any(len(s.rewards) != n_agents for s in self.steps):
                raise ValidationError("per-step reward vectors must have one entry per agent")

    @property
    def t_last(self) -> int:
        return self.t_0 + len(self.steps) - 1

    def covers(self, first: int, last: int) -> bool:
        if first > last:
            return True
        return self.t_0 <= first and last <= self.t_last

    def reward(self, t: int, agent: int) -> float:
        return self.steps[t - self.t_0].rewards[agent]

    def state_key(self, t: int) -> Hashable:
        return self.steps[t - self.t_0].state_key


def _check_window(traj: Trajectory, first: int, last: int, weights: Sequence[float], name: str) -> None:
    width = max(0, last - first + 1)
    if len(weights) != width:
        raise WindowMismatch(
            f"{name} has {len(weights)} weights for window [{first}, {last}] of width {width}"
        )
    if width and not traj.covers(first, last):
        raise WindowMismatch(
            f"trajectory [{traj.t_0}, {traj.t_last}] does not cover [{first}, {last}]"
        )


def rew_short(
    traj: Trajectory, t_0: int, t_f: int, t_s: int, w: WeightSchedule, agent: int
) -> float:
    """Weighted reward over the feint window plus the follow-up attack window."""
    _check_window(traj, t_0, t_0 + t_f, w.alpha_feint, "alpha_feint")
    _check_window(traj, t_0 + t_f + 1, t_0 + t_s, w.alpha_attack, "alpha_attack")
    total = 0.0
    for offset, weight in enumerate(w.alpha_feint):
        total += weight * traj.reward(t_0 + offset, agent)
    for offset, weight in enumerate(w.alpha_attack):
        total += weight * traj.reward(t_0 + t_f + 1 + offset, agent)
    return total


def rew_long(
    traj: Trajectory, t_0: int, t_s: int, T: int, w: WeightSchedule, agent: int
) -> float:
    """Discounted tail reward after the feint cycle, averaged by ``1/T``."""
    first, last = t_0 + t_s + 1, T
    _check_window(traj, first, last, w.beta, "beta")
    if last < first:
        return 0.0
    total = 0.0
    for offset, weight in enumerate(w.beta):
        total += weight * traj.reward(first + offset, agent)
    return total / T


def rew_temporal(
    traj: Trajectory, t_0: int, t_f: int, t_s: int, T: int, w: WeightSchedule, agent: int
) -> float:
    return w.lambda_short * rew_short(traj, t_0, t_f, t_s, w, agent) + w.lambda_long * rew_long(
        traj, t_0, t_s, T, w, agent
    )


# --- occupancy measures and divergences -------------------------------------


@dataclass(frozen=True)
class OccupancyMeasure:
    """Empirical distribution over discretized (state, action) keys."""

    support: tuple[tuple[Hashable, Hashable], ...]
    probs: np.ndarray

    def __post_init__(self) -> None:
        if len(self.support) != len(self.probs):
            raise ValidationError("support and probability vector lengths differ")
        if len(self.probs) and (self.probs < 0).any():
            raise ValidationError("occupancy probabilities must be non-negative")
        if len(self.probs) and abs(float(self.probs.sum()) - 1.0) > 1e-9:
            raise ValidationError("occupancy probabilities must sum to 1")

    def state_marginal(self) -> dict[Hashable, float]:
        out: dict[Hashable, float] = {}
        for (state, _action), p in zip(self.support, self.probs):
            out[state] = out.get(state, 0.0) + float(p)
        return out

    def conditional_actions(self, state: Hashable) -> dict[Hashable, float]:
        """Action distribution at ``state``; empty if the state is unvisited."""
        return self.conditionals_by_state().get(state, {})

    def conditionals_by_state(self) -> dict[Hashable, dict[Hashable, float]]:
        """Per-state action distributions, grouped in one pass."""
        mass: dict[Hashable, dict[Hashable, float]] = {}
        for (s, action), p in zip(self.support, self.probs):
            bucket = mass.setdefault(s, {})
            bucket[action] = bucket.get(action, 0.0) + float(p)
        out: dict[Hashable, dict[Hashable, float]] = {}
        for s, actions in mass.items():
            total = sum(actions.values())
            if total > 0.0:
                out[s] = {a: p / total for a, p in actions.items()}
        return out


def estimate_occupancy(
    policy: Callable[[Hashable], Mapping[Hashable, float]],
    env: Any,
    horizon: int,
    rollouts: int,
    seed: int,
    discretize: Callable[[Hashable], Hashable] | None = None,
) -> OccupancyMeasure:
    """Monte Carlo estimate of the (state, action) visit distribution.

    ``env`` exposes ``reset(rng) -> state`` and ``step(state, action, rng) ->
    state``; ``policy`` maps a state to an action distribution.  Rollouts use
    independent child RNG streams spawned from the seed and are merged by
    sorted key, so the result is reproducible regardless of execution order.
    """
    if horizon < 1 or rollouts < 1:
        raise ValidationError("horizon and rollouts must both be at least 1")
    counts: dict[tuple[Hashable, Hashable], int] = {}
    for child in np.random.SeedSequence(seed).spawn(rollouts):
        rng = np.random.default_rng(child)
        state = env.reset(rng)
        for _ in range(horizon):
            dist = policy(state)
            actions = sorted(dist, key=repr)
            weights = np.array([dist[a] for a in actions], dtype=float)
            action = actions[int(rng.choice(len(actions), p=weights / weights.sum()))]
            key = (discretize(state) if discretize else state, action)
            counts[key] = counts.get(key, 0) + 1
            state = env.step(state, action, rng)
    total = horizon * rollouts
    support = tuple(sorted(counts, key=repr))
    probs = np.array([counts[k] / total for k in support], dtype=float)
    return OccupancyMeasure(support=support, probs=probs)


def f_divergence(
    p: np.ndarray, q: np.ndarray, kind: str = "kl", smoothing: float = DIVERGENCE_SMOOTHING
) -> float:
    """f-divergence between two aligned probability vectors.

    Additive smoothing (renormalized) keeps disjoint supports finite.
    Supported kinds: ``kl``, ``tv`` (total variation), ``hellinger``
    (squared Hellinger).
    """
    p = np.asarray(p, dtype=float) + smoothing
    q = np.asarray(q, dtype=float) + smoothing
    p = p / p.sum()
    q = q / q.sum()
    if kind == "kl":
        return float(np.sum(p * np.log(p / q)))
    if kind == "tv":
        return float(0.5 * np.abs(p - q).sum())
    if kind == "hellinger":
        return float(0.5 * np.square(np.sqrt(p) - np.sqrt(q)).sum())
    raise ValueError(f"unknown divergence kind {kind!r}")


def _conditional_divergence(
    new_actions: dict, old_actions: dict, state: Hashable, kind: str, smoothing: float
) -> float:
    if not new_actions and not old_actions:
        raise UnsupportedState(f"state {state!r} unvisited in both occupancy measures")
    actions = sorted(set(new_actions) | set(old_actions), key=repr)
    p = np.array([new_actions.get(a, 0.0) for a in actions])
    q = np.array([old_actions.get(a, 0.0) for a in actions])
    return f_divergence(p, q, kind=kind, smoothing=smoothing)


def divergence_at_state(
    occ_new: OccupancyMeasure,
    occ_old: OccupancyMeasure,
    state: Hashable,
    kind: str = "kl",
    smoothing: float = DIVERGENCE_SMOOTHING,
) -> float:
    """Divergence of the conditional action distributions at one state."""
    return _conditional_divergence(
        occ_new.conditional_actions(state),
        occ_old.conditional_actions(state),
        state,
        kind,
        smoothing,
    )


def joint_policy(
    pi_i: Callable[[Hashable], Mapping[Hashable, float]],
    pi_others: Sequence[Callable[[Hashable], Mapping[Hashable, float]]],
) -> Callable[[Hashable], dict[tuple, float]]:
    """Product policy over joint action tuples (one entry per agent)."""

    def joint(state: Hashable) -> dict[tuple, float]:
        dists = [pi_i(state)] + [pi(state) for pi in pi_others]
        out: dict[tuple, float] = {(): 1.0}
        for dist in dists:
            nxt: dict[tuple, float] = {}
            for prefix, p in out.items():
                for action, q in dist.items():
                    nxt[prefix + (action,)] = p * q
            out = nxt
        return out

    return joint


def rew_spatial(
    pi_new: Callable,
    pi_others: Sequence[Callable],
    pi_old: Callable,
    env: Any,
    state: Hashable,
    horizon: int = 16,
    rollouts: int = 64,
    seed: int = 0,
    kind: str = "kl",
    smoothing: float = DIVERGENCE_SMOOTHING,
    discretize: Callable[[Hashable], Hashable] | None = None,
) -> float:
    """Occupancy divergence at ``state`` between the joint policies with the
    new versus the old focal policy, other agents held fixed."""
    occ_new = estimate_occupancy(joint_policy(pi_new, pi_others), env, horizon, rollouts, seed, discretize)
    occ_old = estimate_occupancy(joint_policy(pi_old, pi_others), env, horizon, rollouts, seed, discretize)
    return divergence_at_state(occ_new, occ_old, state, kind=kind, smoothing=smoothing)


def rew_collective(
    traj: Trajectory,
    t_0: int,
    t_f: int,
    t_s: int,
    T: int,
    w: WeightSchedule,
    agents: Sequence[int],
    spatial_terms: Iterable[float] | None = None,
    occ_new: OccupancyMeasure | None = None,
    occ_old: OccupancyMeasure | None = None,
    kind: str = "kl",
    smoothing: float = DIVERGENCE_SMOOTHING,
) -> float:
    """Temporal terms summed over agents plus spatial terms summed over the
    trajectory's states, mixed by ``mu1`` and ``mu2``.

    Spatial terms come either precomputed (``spatial_terms``) or from a pair
    of occupancy measures evaluated at every state the trajectory visits in
    ``[t_0, T]``.
    """
    temporal_sum = sum(rew_temporal(traj, t_0, t_f, t_s, T, w, agent) for agent in agents)
    if spatial_terms is not None:
        spatial_sum = float(sum(spatial_terms))
    elif occ_new is not None and occ_old is not None:
        new_by_state = occ_new.conditionals_by_state()
        old_by_state = occ_old.conditionals_by_state()
        spatial_sum = 0.0
        for t in range(t_0, min(T, traj.t_last) + 1):
            state = traj.state_key(t)
            spatial_sum += _conditional_divergence(
                new_by_state.get(state, {}), old_by_state.get(state, {}), state, kind, smoothing
            )
    else:
        spatial_sum = 0.0
    return w.mu1 * temporal_sum + w.mu2 * spatial_sum
