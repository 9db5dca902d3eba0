"""Distributed on-line MDS-MAP localization for wireless sensor networks."""

from .const import VERSION

__version__ = VERSION
