import json
import pathlib

import pytest

DATA = pathlib.Path(__file__).parent / "data" / "expected.json"


@pytest.fixture(scope="session")
def expected():
    """Frozen oracle expectations (see scripts/gen_expectations.py)."""
    return json.loads(DATA.read_text())
