"""Bundled example m-DAGs (JSON fixtures shipped with the package)."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .graph import MDag

FIGURES = ("fig1b", "fig1d", "fig2a-naive", "fig2c", "fig2d", "fig3a", "fig4a")
PATTERNS = ("perm2",)


def bundle_examples() -> list[str]:
    """Names of every packaged graph file."""
    return sorted(p.name for p in resources.files("mdagid.data").iterdir()
                  if p.name.endswith(".json"))


def example_path(name: str):
    if not name.endswith(".json"):
        name += ".json"
    return resources.files("mdagid.data") / name


def load_example(name: str) -> MDag:
    path = example_path(name)
    data = json.loads(path.read_text())
    return MDag.from_json(data, name=Path(str(path)).stem)


def resolve_graph(arg: str) -> MDag:
    """Load a graph from a path, falling back to a bundled fixture of that name."""
    p = Path(arg)
    if p.exists():
        return MDag.load(p)
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    if stem + ".json" in bundle_examples():
        return load_example(stem)
    raise FileNotFoundError(arg)
