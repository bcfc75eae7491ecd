from pathlib import Path

import pytest

import omt
from omt.core import Instance

DATA = Path(omt.__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def four_node() -> Instance:
    return Instance.load(DATA / "appendixB.json")


@pytest.fixture(scope="session")
def ten_node() -> Instance:
    return Instance.load(DATA / "fig1.json")
