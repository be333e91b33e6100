"""Files shipped with the package: reference building, fixture station, scheme, criteria, models."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

STATION_CSV = "station.csv"
STATION_META = "station.yaml"
SCHEME = "scheme.yaml"
CRITERIA = "criteria.yaml"
MODELS = "models.yaml"
BUILDING = "t3v.building"


def bundled_path(name: str) -> Path:
    path = Path(str(resources.files(__name__).joinpath(name)))
    if not path.is_file():
        raise FileNotFoundError(f"no bundled file {name!r}")
    return path
