"""Bundled example grids and scenarios, loadable by name or path."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..network import Network, load_network
from ..scenario import ScenarioDelta, load_scenario


def fixture_names() -> list[str]:
    root = resources.files(__package__)
    return sorted(
        entry.name.removesuffix(".json")
        for entry in root.iterdir()
        if entry.name.endswith(".json")
    )


def fixture_path(name: str) -> Path:
    """Resolve a bundled fixture by bare name or filename."""

    filename = name if name.endswith(".json") else f"{name}.json"
    path = Path(str(resources.files(__package__) / filename))
    if not path.exists():
        raise FileNotFoundError(
            f"no bundled fixture {name!r}; available: {', '.join(fixture_names())}"
        )
    return path


def load_fixture(name: str) -> Network:
    return load_network(fixture_path(name))


def load_scenario_fixture(name: str) -> ScenarioDelta:
    return load_scenario(fixture_path(name))
