import json
from pathlib import Path

import pytest

from accident_alert.geo import parse_registry

GOLDEN = Path(__file__).parent / "golden"
REGISTRY_CSV = Path(__file__).parents[1] / "src" / "accident_alert" / "data" / "responders.csv"


def read_golden_transcript(name):
    entries = []
    for line in (GOLDEN / name).read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        direction, literal = line.split(" ", 1)
        entries.append((direction, json.loads(literal).encode("latin-1")))
    return entries


@pytest.fixture
def registry():
    return parse_registry(REGISTRY_CSV.read_text(), source=str(REGISTRY_CSV))


@pytest.fixture
def registry_path():
    return REGISTRY_CSV
