import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from colony_lab.tsp import RegionSpec, generate_instance


@pytest.fixture
def square_corners():
    """Four unit-square corners as a handmade instance-like object."""
    from colony_lab.tsp import Instance

    pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    dx = pts[:, 0][:, None] - pts[:, 0][None, :]
    dy = pts[:, 1][:, None] - pts[:, 1][None, :]
    return Instance(points=pts, dist=np.hypot(dx, dy), n=4, seed=0)


@pytest.fixture
def small_instance():
    return generate_instance(9, RegionSpec(), seed=71)


@pytest.fixture
def medium_instance():
    return generate_instance(50, RegionSpec(), seed=72)
