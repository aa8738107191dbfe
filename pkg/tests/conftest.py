"""
Shared fixtures.
"""

import shutil
import tempfile

import pytest

from trailer_loading.dynamics.params import VesselParams
from trailer_loading.planning.path_planner import Pose2D


@pytest.fixture
def params():
    """Bundled vessel parameter table."""
    return VesselParams()


@pytest.fixture
def trailer():
    """Trailer at the origin, facing +x."""
    return Pose2D(0.0, 0.0, 0.0)


@pytest.fixture
def temp_dir():
    """Create a temporary directory for written artifacts."""
    path = tempfile.mkdtemp()
    yield path
    shutil.rmtree(path, ignore_errors=True)
