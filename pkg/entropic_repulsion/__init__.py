"""Numerical laboratory for Brownian entropic repulsion under a local-time ceiling."""
import json
from pathlib import Path

from .const import MANIFEST_FILE

with (Path(__file__).parent / MANIFEST_FILE).open() as _handle:
    MANIFEST = json.load(_handle)

__version__ = MANIFEST["version"]
