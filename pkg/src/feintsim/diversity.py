"""Policy-pool diversity metrics: empirical payoff matrices, response
diversity, exploitability, and population efficacy over finite games."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import (
    DimensionError,
    EmptyPool,
    EvaluationFailure,
    UnboundedGame,
    ValidationError,
)


@dataclass(frozen=True)
class PolicyPool:
    policy_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.policy_ids:
            raise EmptyPool("policy pool must contain at least one policy")
        if len(set(self.policy_ids)) != len(self.policy_ids):
            raise ValidationError("policy ids must be unique")

    def __len__(self) -> int:
        return len(self.policy_ids)


@dataclass(frozen=True)
class PayoffMatrix:
    """Empirical payoffs of row policies against column policies."""

    row_ids: tuple[str, ...]
    col_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.row_ids), len(self.col_ids)):
            raise DimensionError(
                f"payoff matrix shape {self.values.shape} does not match "
                f"{len(self.row_ids)} rows x {len(self.col_ids)} cols"
            )
        if len(set(self.row_ids)) != len(self.row_ids) or len(set(self.col_ids)) != len(self.col_ids):
            raise ValidationError("row and column ids must be unique")
        if not np.isfinite(self.values).all():
            raise ValidationError("payoff entries must be finite")

    def row(self, row_id: str) -> np.ndarray:
        return self.values[self.row_ids.index(row_id)]


def build_payoff_matrix(
    pool_i: PolicyPool,
    pool_neg: PolicyPool,
    evaluator: Callable[[str, str, np.random.Generator], float],
    episodes: int = 1,
    seed: int = 0,
) -> PayoffMatrix:
    """Mean evaluator payoff for every (row, column) policy pair.

    Each cell draws its own RNG stream from ``(seed, k, j)``, so the matrix
    is reproducible and cells could be filled in any order.
    """
    values = np.zeros((len(pool_i), len(pool_neg)))
    for k, row_id in enumerate(pool_i.policy_ids):
        for j, col_id in enumerate(pool_neg.policy_ids):
            rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(k, j)))
            try:
                total = 0.0
                for _ in range(episodes):
                    total += float(evaluator(row_id, col_id, rng))
            except Exception as exc:  # noqa: BLE001 - annotate the failing pair
                raise EvaluationFailure(f"evaluation failed for ({row_id!r}, {col_id!r}): {exc}") from exc
            values[k, j] = total / episodes
    return PayoffMatrix(row_ids=pool_i.policy_ids, col_ids=pool_neg.policy_ids, values=values)


def response_diversity(a_new: Sequence[float], payoffs: PayoffMatrix | np.ndarray) -> float:
    """Distance from a new policy's payoff vector to the row space of the
    existing payoff matrix; zero iff the vector is already spanned."""
    A = payoffs.values if isinstance(payoffs, PayoffMatrix) else np.asarray(payoffs, dtype=float)
    vec = np.asarray(a_new, dtype=float)
    if vec.ndim != 1 or vec.shape[0] != A.shape[1]:
        raise DimensionError(f"payoff vector length {vec.shape} does not match {A.shape[1]} columns")
    coeffs, *_ = np.linalg.lstsq(A.T, vec, rcond=None)
    return float(np.linalg.norm(vec - A.T @ coeffs))


# --- finite games ------------------------------------------------------------


@dataclass(frozen=True)
class MatrixGame:
    """Finite normal-form game: one payoff tensor per agent, indexed by the
    joint pure-strategy profile."""

    payoffs: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if not self.payoffs:
            raise UnboundedGame("game must have at least one agent")
        shape = self.payoffs[0].shape
        if len(shape) != len(self.payoffs):
            raise UnboundedGame("payoff tensors must have one axis per agent")
        if any(p.shape != shape for p in self.payoffs):
            raise UnboundedGame("all payoff tensors must share one shape")
        if any(n < 1 for n in shape):
            raise UnboundedGame("every agent needs a non-empty strategy set")

    @property
    def n_agents(self) -> int:
        return len(self.payoffs)

    def n_strategies(self, agent: int) -> int:
        return self.payoffs[0].shape[agent]

    def expected_payoff(self, profile: Sequence[np.ndarray], agent: int) -> float:
        """Expected payoff of ``agent`` under a mixed joint profile."""
        tensor = self.payoffs[agent]
        for axis, mix in enumerate(profile):
            mix = np.asarray(mix, dtype=float)
            if mix.shape != (self.n_strategies(axis),):
                raise DimensionError(f"profile entry {axis} has wrong length")
            tensor = np.tensordot(mix, tensor, axes=([0], [0]))
        return float(tensor)

    def pure_response_values(self, agent: int, profile: Sequence[np.ndarray]) -> np.ndarray:
        """Expected payoff of each pure strategy of ``agent`` versus the
        other agents' mixtures."""
        tensor = self.payoffs[agent]
        # contract every axis except the agent's own, back to front so axis
        # numbering stays valid
        for axis in sorted(range(self.n_agents), reverse=True):
            if axis == agent:
                continue
            mix = np.asarray(profile[axis], dtype=float)
            tensor = np.tensordot(tensor, mix, axes=([axis], [0]))
        return np.asarray(tensor, dtype=float)


def exploitability(profile: Sequence[np.ndarray], game: MatrixGame) -> float:
    """Sum over agents of the best-response gain against the current profile;
    zero exactly at a Nash equilibrium."""
    total = 0.0
    for agent in range(game.n_agents):
        best = float(game.pure_response_values(agent, profile).max())
        current = game.expected_payoff(profile, agent)
        total += best - current
    return total


def matrix_game_value(M: np.ndarray) -> tuple[float, np.ndarray]:
    """Value and optimal row mixture of the zero-sum game ``M`` (row player
    maximizes): max over row mixtures of the worst column payoff."""
    M = np.asarray(M, dtype=float)
    m, n = M.shape
    # variables: alpha (m entries) then v; maximize v
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-M.T, np.ones((n, 1))])
    b_ub = np.zeros(n)
    A_eq = np.zeros((1, m + 1))
    A_eq[0, :m] = 1.0
    b_eq = np.array([1.0])
    bounds = [(0.0, None)] * m + [(None, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if not res.success:
        raise ValidationError(f"matrix game LP failed: {res.message}")
    return float(res.x[-1]), np.asarray(res.x[:m])


def population_efficacy(payoffs: PayoffMatrix | np.ndarray) -> float:
    """Worst-case-opponent value of the best mixture over the pool's rows.

    The opponent minimizes over mixtures of the finite column space; by LP
    duality this equals the zero-sum value of the pool-versus-opponents
    payoff matrix.
    """
    M = payoffs.values if isinstance(payoffs, PayoffMatrix) else np.asarray(payoffs, dtype=float)
    if M.size == 0:
        raise EmptyPool("population efficacy needs a non-empty payoff matrix")
    value, _ = matrix_game_value(M)
    return value


def population_efficacy_for(
    pool: PolicyPool,
    opponent_space: PolicyPool,
    evaluator: Callable[[str, str, np.random.Generator], float],
    episodes: int = 1,
    seed: int = 0,
) -> float:
    matrix = build_payoff_matrix(pool, opponent_space, evaluator, episodes=episodes, seed=seed)
    return population_efficacy(matrix)
