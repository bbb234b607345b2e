"""JSON schemas of every document the command line emits."""

import json
from functools import lru_cache
from importlib import resources

NAMES = ("profile", "check_report", "family", "validation", "zoo", "dist", "search", "net", "error")


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    if name not in NAMES:
        raise KeyError(f"no schema named {name!r}")
    text = resources.files("heisbcp").joinpath("schemas", f"{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)
