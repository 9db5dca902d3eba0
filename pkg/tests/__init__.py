"""Tests for wsnloc."""

import numpy as np

from wsnloc.config import ExperimentConfig
from wsnloc.mds_core import Scenario

INPUT_DIR = __file__.rsplit("/", 1)[0] + "/input"


def from_list(values):
    """Support function."""
    return ",".join(str(x) for x in values)


def make_config(**overrides) -> ExperimentConfig:
    """Build a config from keyword overrides; `__` stands for the section dot."""
    options = {key.replace("__", "."): value for key, value in overrides.items()}
    return ExperimentConfig.from_options(options)


def uniform_scenario(n, seed=0, width=5.0, height=9.0, anchors=()) -> Scenario:
    """Random scenario inside a width × height room."""
    rng = np.random.default_rng(seed)
    positions = rng.uniform(0.0, 1.0, size=(n, 2)) * np.array([width, height])
    return Scenario(positions, anchors, ((0.0, width), (0.0, height)))


def grid_positions(rows, cols, spacing=1.0) -> np.ndarray:
    """Row-major grid with x varying fastest."""
    return np.array(
        [[c * spacing, r * spacing] for r in range(rows) for c in range(cols)], dtype=float
    )


def assert_files_equal(test, ref):
    """Compare two files line by line."""
    test_array = open(test, encoding="utf-8").readlines()
    ref_array = open(ref, encoding="utf-8").readlines()
    assert len(test_array) == len(ref_array)
    for idx, row in enumerate(ref_array):
        assert test_array[idx].strip() == row.strip()
