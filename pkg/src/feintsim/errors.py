"""Exception types shared across the package."""

from __future__ import annotations


class FeintsimError(Exception):
    """Base class for all package-specific errors."""


class ParseError(FeintsimError):
    """A structured input file could not be parsed."""


class ValidationError(FeintsimError):
    """A domain object violates one of its invariants."""


class DimensionError(FeintsimError):
    """Joint counts or vector lengths disagree."""


class EmptySequence(FeintsimError):
    """An operation requiring a non-empty action sequence got an empty one."""


class CutOutOfRange(FeintsimError):
    """A palindrome cut index falls outside the legal sequence window."""


class NotSimilar(FeintsimError):
    """Two physical states are farther apart than the similarity tolerance."""


class RewardLeak(FeintsimError):
    """A feint construction would include reward-sequence actions."""


class UnknownAction(FeintsimError):
    """An action id is not present in the catalog."""


class UnknownAgent(FeintsimError):
    """An agent id is not present in the game state."""


class InvalidWindow(FeintsimError):
    """A timing window has a non-positive extent (t_b1 >= t_b2)."""


class WindowMismatch(FeintsimError):
    """Weight vectors or trajectories do not cover the requested step window."""


class UnsupportedState(FeintsimError):
    """A state key is unvisited in both occupancy measures being compared."""


class EvaluationFailure(FeintsimError):
    """A payoff evaluation failed for a specific policy pair."""


class UnboundedGame(FeintsimError):
    """Best responses are not computable over a non-finite strategy space."""


class EmptyPool(FeintsimError):
    """A policy pool or opponent space is empty."""


class ConfigError(FeintsimError):
    """A scenario or run configuration is malformed."""


class SnapshotFailure(FeintsimError):
    """An environment snapshot could not be cloned for imaginary play."""
