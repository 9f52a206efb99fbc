import math
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))


@pytest.fixture
def cone_csv(tmp_path):
    """Profile table of the cone of opening 1/2 in dimension 2, as `profile` writes it."""
    from isoprofile import cone_profile
    from reports import to_csv

    vols = np.geomspace(0.1, 10.0, 64)
    path = tmp_path / "cone.csv"
    path.write_text(to_csv(cone_profile(0.5, 2).to_frame(vols)), encoding="utf-8")
    return path


@pytest.fixture
def staircase_csv(tmp_path):
    path = tmp_path / "u.csv"
    path.write_text("node,value,weight\n0.5,3,1\n1.5,1,1\n2.5,2,1\n", encoding="utf-8")
    return path


@pytest.fixture
def unit_ball_volume_3():
    return 4 * math.pi / 3
