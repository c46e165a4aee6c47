"""Frozen baseline constants shipped with the package."""
import json
from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=None)
def load_golden() -> dict:
    return json.loads(resources.files("mildlab.data").joinpath("golden.json").read_text())
