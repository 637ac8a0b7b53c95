from __future__ import annotations

import numpy as np
import pytest

from src.calculus.connection import hyperbolic_metric
from src.geometry.fuchsian import random_domain_points, standard_genus2


@pytest.fixture(scope="session")
def genus2():
    return standard_genus2()


@pytest.fixture(scope="session")
def group(genus2):
    return genus2[0]


@pytest.fixture(scope="session")
def domain(genus2):
    return genus2[1]


@pytest.fixture(scope="session")
def loops(genus2):
    return genus2[2]


@pytest.fixture(scope="session")
def h():
    return hyperbolic_metric()


@pytest.fixture
def points():
    return random_domain_points(np.random.default_rng(3), 6, radius=0.5)
