import numpy as np
import pytest

from eflower import geometry as geom


@pytest.fixture(scope="session")
def pentagon():
    return geom.make_regular_polygon(5, 1.0)


@pytest.fixture(scope="session")
def triangle():
    return geom.make_regular_polygon(3, 1.0)


@pytest.fixture(scope="session")
def square():
    return geom.make_regular_polygon(4, 1.0)


@pytest.fixture(scope="session")
def wild_rose(pentagon):
    """SOL pentagon in the regime with a clean track/core decomposition."""
    return geom.build_sol_flower(pentagon, 1.95)


@pytest.fixture(scope="session")
def wild_rose_large(pentagon):
    """SOL pentagon in the hyperbolic-core regime (large petals)."""
    return geom.build_sol_flower(pentagon, 8.0)


@pytest.fixture(scope="session")
def narcissus():
    return geom.build_sol_flower(geom.make_regular_polygon(6, 1.0), 8.0)


@pytest.fixture(scope="session")
def corner_triangle(triangle):
    return geom.build_corner_flower(triangle, 0.5)


@pytest.fixture(scope="session")
def corner_square(square):
    return geom.build_corner_flower(square, 0.4)


@pytest.fixture(scope="session")
def ellipse53():
    return geom.ellipse_table(5.0, 3.0)


@pytest.fixture(scope="session")
def unit_circle():
    return geom.circle_table(1.0)


def seg_point_distance(p, q, x):
    """Distance from point x to the closed segment [p, q]."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    x = np.asarray(x, float)
    d = q - p
    dd = float(d @ d)
    t = float((x - p) @ d) / dd if dd > 0 else 0.0
    t = min(max(t, 0.0), 1.0)
    c = p + t * d
    return float(np.hypot(*(x - c)))
