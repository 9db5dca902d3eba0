"""Miscellaneous support functions for wsnloc."""

from typing import Any

import numpy as np

from ..exceptions import ConfigurationError


def to_lists(value: Any) -> list[str]:
    """Transform configuration value to the list of strings."""
    if isinstance(value, (list, tuple)):
        return [str(x).strip() for x in value if str(x).strip()]
    return [x.strip() for x in str(value).split(",") if x.strip()]


def to_listi(value: Any) -> list[int]:
    """Transform configuration value to the list of integers."""
    try:
        return [int(x) for x in to_lists(value)]
    except ValueError as exc:
        raise ConfigurationError(f"Expected comma-separated integers, got {value!r}") from exc


def to_listf(value: Any) -> list[float]:
    """Transform configuration value to the list of floats."""
    try:
        return [float(x) for x in to_lists(value)]
    except ValueError as exc:
        raise ConfigurationError(f"Expected comma-separated numbers, got {value!r}") from exc


class StreamFactory:
    """Counter-based random streams for one replica.

    The Philox key is derived from (seed, replica). Each (tick, purpose) pair
    starts at its own offset of the 256-bit counter, leaving 2**128 blocks to
    every sub-stream, so draws for different ticks or purposes never overlap
    and any tick can be replayed on its own.
    """

    def __init__(self, seed: int, replica: int = 0) -> None:
        if seed < 0 or replica < 0:
            raise ConfigurationError(
                f"Seed and replica must be non-negative, got {seed}, {replica}"
            )
        self.seed = seed
        self.replica = replica
        self._key = np.random.SeedSequence(seed, spawn_key=(replica,)).generate_state(
            2, np.uint64
        )

    def stream(self, tick: int, purpose: int) -> np.random.Generator:
        """Return the generator for a (tick, purpose) sub-stream."""
        counter = (int(purpose) << 192) | (int(tick) << 128)
        return np.random.Generator(np.random.Philox(key=self._key, counter=counter))

    def __repr__(self) -> str:
        return f"StreamFactory(seed={self.seed}, replica={self.replica})"
