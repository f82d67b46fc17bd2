import numpy as np
import pytest

from voroflow import geometry as geo


BOX = np.array([0.0, 0.0, 1.0, 1.0])


def lattice_points(n, box=BOX):
    """Cell-centered n x n lattice inside box."""
    h = (box[2] - box[0]) / n
    xs = box[0] + (np.arange(n) + 0.5) * h
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()]), h


def random_points(rng, n, box=BOX, margin=1e-3):
    lo = np.array([box[0], box[1]]) + margin
    hi = np.array([box[2], box[3]]) - margin
    return lo + rng.random((n, 2)) * (hi - lo)


def all_fluid_diagram(points, box=BOX, spacing=None):
    kinds = np.zeros(points.shape[0], dtype=np.int8)
    return geo.build_diagram(points, kinds, box, spacing=spacing)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def lattice16():
    pts, h = lattice_points(16)
    return all_fluid_diagram(pts, spacing=h), h
