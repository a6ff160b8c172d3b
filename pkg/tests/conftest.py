import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from amermot import DiscreteMeasure, american  # noqa: E402
from amermot.costs import Constant, Power  # noqa: E402

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


@pytest.fixture
def split_pair():
    """``delta_0`` against ``(delta_-1 + delta_1)/2``."""
    return DiscreteMeasure([0.0], [1.0]), DiscreteMeasure([-1.0, 1.0], [0.5, 0.5])


@pytest.fixture
def two_component_pair():
    mu = DiscreteMeasure([-2.0, 2.0], [0.5, 0.5])
    nu = DiscreteMeasure([-3.0, -1.0, 1.0, 3.0], [0.25] * 4)
    return mu, nu


def const_square(a):
    """``c1 = a``, ``c2 = y**2``."""
    return american(Constant(a), Power(2.0, "y"))
