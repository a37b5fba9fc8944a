from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import NEIGHBORHOOD_MANIFEST, complete_sheet, sunflowers_lines_text  # noqa: E402

from cartoforge.stylesheet import parse_stylesheet  # noqa: E402


@pytest.fixture
def neighborhood_manifest():
    return NEIGHBORHOOD_MANIFEST


@pytest.fixture
def neighborhood_sheet():
    return complete_sheet(NEIGHBORHOOD_MANIFEST)


@pytest.fixture
def sunflowers_sheet():
    return parse_stylesheet(sunflowers_lines_text())


@pytest.fixture(autouse=True)
def _api_key(monkeypatch):
    monkeypatch.setenv("CARTOFORGE_API_KEY", "test-key-5c1e")
