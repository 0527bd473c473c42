from __future__ import annotations

import pytest

from rrtlab.space import RngStream, Workspace


@pytest.fixture
def unit_square() -> Workspace:
    return Workspace.square(1.0)


@pytest.fixture
def rng() -> RngStream:
    return RngStream(12345, 0)
