import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fvstag import mesh as meshmod, operators as ops
from conftest import UNIT, random_cell_vector, random_node_scalar, \
    random_node_vector


def gen(nx, jitter=0.0, seed=0, periodic=True):
    return meshmod.generate_structured_triangulation(
        nx, nx, UNIT, periodic, periodic, jitter=jitter, seed=seed)


# ---------------------------------------------------------------------------
# exact identities
# ---------------------------------------------------------------------------

def test_curl_of_gradient_vanishes(periodic_mesh, rng):
    mesh = periodic_mesh
    for _ in range(5):
        phi = random_node_scalar(mesh, rng)
        g = ops.gradient_primal(phi, mesh)
        curl = ops.curl_dual(g, mesh)
        scale = np.abs(g).max() / mesh.incircle_diameter.min()
        assert np.abs(curl).max() < 1e-13 * scale


def test_divergence_of_curl_vanishes(periodic_mesh, rng):
    mesh = periodic_mesh
    for _ in range(5):
        j = random_node_vector(mesh, rng)
        c = ops.curl_primal(j, mesh)
        div = ops.divergence_dual(c, mesh)
        scale = np.abs(c).max() / mesh.incircle_diameter.min()
        assert np.abs(div).max() < 1e-13 * scale


def test_summation_by_parts(periodic_mesh, rng):
    mesh = periodic_mesh
    for _ in range(5):
        phi = random_node_scalar(mesh, rng)
        v = random_cell_vector(mesh, rng, planar=True)
        lhs = float(np.sum(mesh.cell_area
                           * (ops.gradient_primal(phi, mesh) * v).sum(axis=1)))
        rhs = float(np.sum(mesh.node_weight * phi
                           * ops.divergence_dual(v, mesh)))
        nphi = np.sqrt(np.sum(mesh.node_weight * phi * phi))
        nv = np.sqrt(np.sum(mesh.cell_area * (v * v).sum(axis=1)))
        assert abs(lhs + rhs) < 1e-12 * nphi * nv


def test_trace_of_dual_gradient_is_divergence(periodic_mesh, rng):
    mesh = periodic_mesh
    v = random_cell_vector(mesh, rng)
    g = ops.gradient_dual(v, mesh)
    tr = g[:, 0, 0] + g[:, 1, 1] + g[:, 2, 2]
    assert np.abs(tr - ops.divergence_dual(v, mesh)).max() < 1e-12


# ---------------------------------------------------------------------------
# polynomial exactness
# ---------------------------------------------------------------------------

def test_gradient_exact_on_linears():
    mesh = gen(7, jitter=0.2, seed=1, periodic=False)
    a, b, c = 0.7, -1.3, 2.1
    phi = a + b * mesh.nodes[:, 0] + c * mesh.nodes[:, 1]
    g = ops.gradient_primal(phi, mesh)
    assert np.abs(g[:, 0] - b).max() < 1e-12
    assert np.abs(g[:, 1] - c).max() < 1e-12
    assert np.abs(g[:, 2]).max() < 1e-12


def test_gradient_of_constant_is_zero(periodic_mesh):
    g = ops.gradient_primal(np.full(periodic_mesh.num_nodes, 3.7),
                            periodic_mesh)
    assert np.abs(g).max() < 1e-12


def test_dual_divergence_of_constant_is_zero(periodic_mesh):
    v = np.tile([1.3, -0.4, 0.0], (periodic_mesh.num_cells, 1))
    d = ops.divergence_dual(v, periodic_mesh)
    assert np.abs(d).max() < 1e-12


def test_averages_preserve_constants(periodic_mesh):
    mesh = periodic_mesh
    cn = ops.average_cell_to_node(np.full(mesh.num_cells, 2.5), mesh)
    assert np.abs(cn - 2.5).max() < 1e-13
    nc = ops.average_node_to_cell(np.full(mesh.num_nodes, -1.5), mesh)
    assert np.abs(nc + 1.5).max() < 1e-13


# ---------------------------------------------------------------------------
# dense oracles
# ---------------------------------------------------------------------------

def test_gradient_matches_dense_assembly(rng):
    mesh = gen(5, jitter=0.2, seed=7)
    gx, gy = ops.dense_gradient_primal(mesh)
    phi = random_node_scalar(mesh, rng)
    g = ops.gradient_primal(phi, mesh)
    assert np.abs(g[:, 0] - gx @ phi).max() < 1e-13
    assert np.abs(g[:, 1] - gy @ phi).max() < 1e-13


def test_divergence_matches_dense_assembly(rng):
    mesh = gen(5, jitter=0.2, seed=7)
    d = ops.dense_divergence_dual(mesh)
    v = random_cell_vector(mesh, rng, planar=True)
    dv = (d @ np.concatenate([v[:, 0], v[:, 1]]))[mesh.periodic_map]
    assert np.abs(ops.divergence_dual(v, mesh) - dv).max() < 1e-12


def test_p1_gradient_equivalence():
    # corner-normal gradient == P1 Lagrange gradient (reference-element path)
    mesh = gen(8, jitter=0.2, seed=11)
    gx, gy = ops.dense_gradient_primal(mesh)
    px, py = ops.dense_p1_gradient(mesh)
    assert np.abs(gx - px).max() < 1e-13
    assert np.abs(gy - py).max() < 1e-13


def test_poisson_matches_p1_stiffness():
    mesh = gen(8, jitter=0.2, seed=11)
    gx, gy = ops.dense_gradient_primal(mesh)
    dmat = ops.dense_divergence_dual(mesh)
    n_c = mesh.num_cells
    lap = -(dmat[:, :n_c] @ gx + dmat[:, n_c:] @ gy)
    weighted = mesh.node_weight[:, None] * lap
    k_mat = ops.dense_p1_stiffness(mesh)
    can = mesh.is_canonical
    assert np.abs(weighted[np.ix_(can, can)] - k_mat[np.ix_(can, can)]).max() \
        < 1e-13 * np.abs(k_mat).max()


def test_curl_dual_rows_matches_componentwise(periodic_mesh, rng):
    mesh = periodic_mesh
    a = rng.standard_normal((mesh.num_cells, 3, 3))
    rows = ops.curl_dual_rows(a, mesh)
    for i in range(3):
        assert np.array_equal(rows[:, i, :], ops.curl_dual(a[:, i, :], mesh))


# ---------------------------------------------------------------------------
# property-based probes
# ---------------------------------------------------------------------------

@settings(max_examples=20, deadline=None)
@given(nx=st.integers(4, 10), jitter=st.floats(0.0, 0.3),
       seed=st.integers(0, 1000))
def test_identities_hold_on_random_meshes(nx, jitter, seed):
    mesh = gen(nx, jitter=jitter, seed=seed)
    rng = np.random.default_rng(seed + 1)
    phi = mesh.broadcast_nodal(rng.standard_normal(mesh.num_nodes))
    j = mesh.broadcast_nodal(rng.standard_normal((mesh.num_nodes, 3)))
    g = ops.gradient_primal(phi, mesh)
    c = ops.curl_primal(j, mesh)
    h_min = mesh.incircle_diameter.min()
    assert np.abs(ops.curl_dual(g, mesh)).max() \
        < 1e-13 * max(np.abs(g).max(), 1e-30) / h_min
    assert np.abs(ops.divergence_dual(c, mesh)).max() \
        < 1e-13 * max(np.abs(c).max(), 1e-30) / h_min
