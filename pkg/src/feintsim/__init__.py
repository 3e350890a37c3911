"""Desk-scale multi-player combat simulation with automatic feint synthesis.

Subsystems:

* :mod:`feintsim.catalog` - validated attack-behavior catalogs.
* :mod:`feintsim.feint_templates` - feint generation and template precompute.
* :mod:`feintsim.dbm` - dual-behavior composition and timing classes.
* :mod:`feintsim.rewards` - short/long/temporal, spatial, and collective rewards.
* :mod:`feintsim.diversity` - payoff matrices, response diversity, exploitability.
* :mod:`feintsim.env` - the deterministic 2D combat environment.
* :mod:`feintsim.learning` - tabular actor-critic harness with imaginary play.
* :mod:`feintsim.cli` - batch entry points.
"""

from importlib import resources as _resources
from pathlib import Path as _Path

__version__ = "0.1.0"


def demo_catalog_path() -> _Path:
    """Path of the packaged six-behavior demo catalog."""
    return _Path(str(_resources.files("feintsim").joinpath("data/catalog6.json")))
