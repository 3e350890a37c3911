from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from feintsim import demo_catalog_path
from feintsim.catalog import (
    Behavior,
    Catalog,
    Footing,
    PhysicalState,
    UnitAction,
    load_catalog,
)
from feintsim.env import load_scenario
from feintsim.feint_templates import precompute_templates

DATA_DIR = Path(__file__).parent / "data"
GOLDEN_DIR = Path(__file__).parent / "goldens"
SCENARIO_DIR = Path(demo_catalog_path()).parent


@pytest.fixture(scope="session")
def catalog():
    return load_catalog(demo_catalog_path())


@pytest.fixture(scope="session")
def templates(catalog):
    return precompute_templates(catalog)


@pytest.fixture(scope="session")
def scenario_1v1():
    return load_scenario(SCENARIO_DIR / "scenario_1v1.json")


@pytest.fixture(scope="session")
def scenario_3v3():
    return load_scenario(SCENARIO_DIR / "scenario_3v3.json")


@pytest.fixture(scope="session")
def scenario_bench():
    return load_scenario(SCENARIO_DIR / "scenario_bench.json")


def random_state(rng: np.random.Generator, joints: int = 3) -> PhysicalState:
    coords = rng.uniform(-1.0, 1.0, size=(joints, 3))
    footing = rng.choice([Footing.NEUTRAL, Footing.LEFT_FORWARD, Footing.RIGHT_FORWARD])
    return PhysicalState(
        joints=tuple(tuple(float(c) for c in row) for row in coords), footing=Footing(footing)
    )


def random_catalog(seed: int, max_behaviors: int = 6, max_actions: int = 8) -> Catalog:
    """Small random catalog whose behaviors share actions.

    A pool of states plus a growing set of named transitions between them;
    each behavior is a chained walk, so continuity holds exactly and action
    reuse across behaviors arises naturally.
    """
    rng = np.random.default_rng(seed)
    joints = 2
    n_states = int(rng.integers(3, 7))
    states = [random_state(rng, joints) for _ in range(n_states)]
    # transitions: (from, to) -> UnitAction, created lazily with stable ids
    transitions: dict[tuple[int, int], UnitAction] = {}

    def action_between(i: int, j: int) -> UnitAction:
        key = (i, j)
        if key not in transitions:
            transitions[key] = UnitAction(
                id=f"t{i}_{j}", start_state=states[i], end_state=states[j]
            )
        return transitions[key]

    behaviors = []
    n_behaviors = int(rng.integers(2, max_behaviors + 1))
    for b in range(n_behaviors):
        length = int(rng.integers(2, max_actions + 1))
        here = int(rng.integers(n_states))
        actions = []
        for _ in range(length):
            there = int(rng.integers(n_states))
            actions.append(action_between(here, there))
            here = there
        stretch_end = int(rng.integers(1, length + 1))
        reward_end = int(rng.integers(stretch_end, length + 1))
        behaviors.append(
            Behavior(
                id=f"b{b}",
                name=f"behavior {b}",
                actions=tuple(actions),
                stretch_end=stretch_end,
                reward_end=reward_end,
                reward_value=float(rng.integers(0, 5)),
            )
        )
    return Catalog(behaviors=tuple(behaviors), epsilon_state=0.05, joint_count=joints)
