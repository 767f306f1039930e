import json
from pathlib import Path

import pytest

DATA_DIR = Path(__file__).parent / "data"


def load_fixture(name: str):
    return json.loads((DATA_DIR / name).read_text())


@pytest.fixture
def chroma_feed():
    return load_fixture("chroma_feed.json")


@pytest.fixture
def flight_entity_doc():
    return load_fixture("flight_entity.json")


@pytest.fixture
def planefinder_frame():
    return load_fixture("planefinder_frame.json")


@pytest.fixture
def aircraft_entity_doc():
    return load_fixture("aircraft_entity.json")
