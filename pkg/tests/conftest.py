import numpy as np
import pytest

from fvstag import mesh as meshmod

UNIT = ((0.0, 0.0), (1.0, 1.0))


@pytest.fixture(scope="session")
def periodic_mesh():
    return meshmod.generate_structured_triangulation(
        8, 8, UNIT, True, True, jitter=0.2, seed=3)


@pytest.fixture(scope="session")
def bounded_mesh():
    return meshmod.generate_structured_triangulation(
        8, 8, UNIT, False, False, jitter=0.15, seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def random_node_scalar(mesh, rng):
    return mesh.broadcast_nodal(rng.standard_normal(mesh.num_nodes))


def random_node_vector(mesh, rng, planar=False):
    v = mesh.broadcast_nodal(rng.standard_normal((mesh.num_nodes, 3)))
    if planar:
        v[:, 2] = 0.0
    return v


def random_cell_vector(mesh, rng, planar=False):
    v = rng.standard_normal((mesh.num_cells, 3))
    if planar:
        v[:, 2] = 0.0
    return v
