import json
import pathlib

import pytest

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def calibration():
    return json.loads((FIXTURES / "calibration.json").read_text())
