"""Python front end for the feedsim simulator.

Configs are plain dicts in the same layout as the JSON config files.
"""

import json as _json
import os as _os

from . import _feedsim
from ._feedsim import (
    ConfigError,
    IoError,
    SimulationError,
    barabasi_albert_edges,
    circ_dist,
    detect_communities,
    directed_modularity,
    engagement_prob,
    gamma_overexposure,
    sample_daily_counts,
    signed_delta,
    update_opinion,
    wrap_opinion,
)

__all__ = [
    "ConfigError",
    "IoError",
    "SimulationError",
    "Simulation",
    "barabasi_albert_edges",
    "circ_dist",
    "config_hash",
    "detect_communities",
    "directed_modularity",
    "engagement_prob",
    "gamma_overexposure",
    "run",
    "sample_daily_counts",
    "signed_delta",
    "update_opinion",
    "validate_config",
    "wrap_opinion",
]


def _dump(config):
    return config if isinstance(config, str) else _json.dumps(config)


def validate_config(config, base_dir=""):
    """Returns the full config tree with defaults filled in."""
    return _json.loads(_feedsim.validate_config(_dump(config), str(base_dir)))


def config_hash(config):
    return _feedsim.config_hash(_dump(config))


def run(config, out_root, base_dir=""):
    """Runs the configured horizon; returns (run directory, summary dict)."""
    path, summary = _feedsim.run(_dump(config), _os.fspath(out_root), str(base_dir))
    return path, _json.loads(summary)


class Simulation:
    """Step-by-step access to one simulation."""

    def __init__(self, config, base_dir="", _core=None):
        self._config = _dump(config)
        self._base_dir = str(base_dir)
        self._core = _core if _core is not None else _feedsim.Simulation(self._config, self._base_dir)

    def step(self):
        self._core.step()

    def run(self, days):
        self._core.run(days)

    @property
    def day(self):
        return self._core.day

    @property
    def num_agents(self):
        return self._core.num_agents

    @property
    def num_edges(self):
        return self._core.num_edges

    def opinions(self):
        return self._core.opinions()

    def in_degrees(self):
        return self._core.in_degrees()

    def gamma(self):
        """Per-agent overexposure; None where undefined."""
        return self._core.gamma()

    def last_totals(self):
        return self._core.last_totals()

    def metrics(self, communities=False):
        """(day, metric, scope, value) rows for the current state."""
        return self._core.metrics(communities)

    def summary(self):
        return _json.loads(self._core.summary_json())

    def checkpoint(self):
        return self._core.checkpoint()

    @classmethod
    def restore(cls, blob, config, base_dir=""):
        text = _dump(config)
        return cls(text, base_dir, _feedsim.Simulation.restore(blob, text, str(base_dir)))
