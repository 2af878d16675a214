"""Access to the data files shipped with the package (default sim topic, fixtures)."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path


def data_dir() -> Path:
    return Path(str(resources.files("featgeo") / "data"))


def default_sim_config_path() -> Path:
    """Run config of the bundled offline sim topic (used by `featgeo simulate`)."""
    return data_dir() / "sim_topic" / "config.json"


def load_example_solutions() -> dict:
    """Two labeled extreme trade-off solutions with their recorded objectives."""
    path = data_dir() / "example_solutions.json"
    return json.loads(path.read_text(encoding="utf-8"))
