"""Compatible discrete nabla operators on the staggered mesh.

Primal operators map node fields to cell fields using the corner normals of
each triangle; dual operators map cell fields to node fields using the same
corner normals with opposite sign, closed on boundary nodes by the boundary
corner vector when a boundary value is supplied.  The pairing satisfies, to
machine precision, curl(grad) = 0, div(curl) = 0 and the summation-by-parts
relation under area-weighted inner products.

All vector fields are (N, 3) arrays with an explicit third component; tensor
fields are (N, 3, 3) with (grad w)_ij = d_j w_i.
"""

from __future__ import annotations

import numpy as np


def _scatter_nodes(mesh, contrib):
    """Sum per-(cell, corner) contributions onto canonical nodes.

    contrib has shape (Nc, 3) or (Nc, 3, ...); returns (Np, ...) with the
    periodic duplicates left at zero.
    """
    n_p = mesh.num_nodes
    idx = mesh.tri_canon.ravel()
    flat = contrib.reshape(mesh.num_cells * 3, -1)
    out = np.zeros((n_p, flat.shape[1]))
    for j in range(flat.shape[1]):
        out[:, j] = np.bincount(idx, weights=flat[:, j], minlength=n_p)
    return out.reshape((n_p,) + contrib.shape[2:])


def gradient_primal(phi, mesh):
    """Cell gradient of a node scalar: (1/|w_c|) sum_p l_pc n_pc phi_p."""
    vals = phi[mesh.tri_canon]                       # (Nc, 3)
    out = (mesh.corner_normal * vals[:, :, None]).sum(axis=1)
    return out / mesh.cell_area[:, None]


def gradient_primal_vector(w, mesh):
    """Cell tensor gradient of a node vector, rows = gradients of components."""
    vals = w[mesh.tri_canon]                         # (Nc, 3, 3)
    out = np.einsum("ckj,cki->cij", mesh.corner_normal, vals)
    return out / mesh.cell_area[:, None, None]


def curl_primal(j_field, mesh):
    """Cell curl of a node vector: (1/|w_c|) sum_p l_pc n_pc x J_p."""
    vals = j_field[mesh.tri_canon]                   # (Nc, 3, 3)
    out = np.cross(mesh.corner_normal, vals).sum(axis=1)
    return out / mesh.cell_area[:, None]


def divergence_primal_tensor(sigma, mesh):
    """Cell divergence of a node tensor: (1/|w_c|) sum_p sigma_p . l_pc n_pc."""
    vals = sigma[mesh.tri_canon]                     # (Nc, 3, 3, 3)
    out = np.einsum("ckij,ckj->ci", vals, mesh.corner_normal)
    return out / mesh.cell_area[:, None]


def _dual_close(mesh, acc, boundary_values, combine):
    """Finish a dual operator: boundary closure, area scaling, broadcast."""
    if boundary_values is not None and mesh.is_boundary_node.any():
        bmask = mesh.is_boundary_node & mesh.is_canonical
        acc[bmask] += combine(mesh.boundary_corner[bmask],
                              boundary_values[bmask])
    w = np.where(mesh.node_weight > 0, mesh.node_weight, 1.0)
    shape = (-1,) + (1,) * (acc.ndim - 1)
    out = acc / w.reshape(shape)
    return out[mesh.periodic_map]


def divergence_dual(v, mesh, boundary_values=None):
    """Node divergence of a cell vector: (1/|w_p|) sum_c l_cp n_cp . v_c.

    With l_cp n_cp = -l_pc n_pc.  On boundary nodes the closure term
    l_pb n_pb . v_b is added when `boundary_values` (a node vector field
    holding the boundary-condition value of v) is given; omitting it imposes
    a zero boundary flux.
    """
    contrib = -(mesh.corner_normal * v[:, None, :]).sum(axis=2)  # (Nc, 3)
    acc = _scatter_nodes(mesh, contrib)
    return _dual_close(mesh, acc, boundary_values,
                       lambda bn, vb: (bn * vb).sum(axis=1))


def curl_dual(v, mesh, boundary_values=None):
    """Node curl of a cell vector: (1/|w_p|) sum_c l_cp n_cp x v_c."""
    contrib = np.cross(-mesh.corner_normal, v[:, None, :])       # (Nc, 3, 3)
    acc = _scatter_nodes(mesh, contrib)
    return _dual_close(mesh, acc, boundary_values,
                       lambda bn, vb: np.cross(bn, vb))


def gradient_dual(v, mesh, boundary_values=None):
    """Node tensor gradient of a cell vector, (grad v)_ij = d_j v_i."""
    contrib = -np.einsum("ckj,ci->ckij", mesh.corner_normal, v)  # (Nc,3,3,3)
    acc = _scatter_nodes(mesh, contrib)
    return _dual_close(mesh, acc, boundary_values,
                       lambda bn, vb: np.einsum("pj,pi->pij", bn, vb))


def curl_dual_rows(a_cells, mesh):
    """Node curl of each row of a cell tensor field; result (Np, 3, 3)."""
    return np.stack([curl_dual(a_cells[:, i, :], mesh) for i in range(3)],
                    axis=1)


def average_cell_to_node(f, mesh):
    """Sub-cell-area-weighted average of a cell field onto the nodes."""
    f = np.asarray(f)
    flat = f.reshape(mesh.num_cells, -1)
    contrib = mesh.subcell_area[:, :, None] * flat[:, None, :]
    acc = _scatter_nodes(mesh, contrib)
    w = np.where(mesh.node_weight > 0, mesh.node_weight, 1.0)
    out = (acc.reshape(mesh.num_nodes, -1) / w[:, None])[mesh.periodic_map]
    return out.reshape((mesh.num_nodes,) + f.shape[1:])


def average_node_to_cell(g, mesh):
    """Arithmetic mean of the three vertex values of each cell."""
    return np.asarray(g)[mesh.tri_canon].mean(axis=1)


# ---------------------------------------------------------------------------
# dense assemblies (test oracles; plain loops over the defining sums)
# ---------------------------------------------------------------------------

def dense_gradient_primal(mesh):
    """Dense (Nc, Np) matrices (Gx, Gy) of the primal gradient."""
    n_c, n_p = mesh.num_cells, mesh.num_nodes
    gx = np.zeros((n_c, n_p))
    gy = np.zeros((n_c, n_p))
    for c in range(n_c):
        for k in range(3):
            q = mesh.tri_canon[c, k]
            gx[c, q] += mesh.corner_normal[c, k, 0] / mesh.cell_area[c]
            gy[c, q] += mesh.corner_normal[c, k, 1] / mesh.cell_area[c]
    return gx, gy


def dense_divergence_dual(mesh):
    """Dense (Np, 2*Nc) matrix applying the dual divergence to (vx; vy)."""
    n_c, n_p = mesh.num_cells, mesh.num_nodes
    d = np.zeros((n_p, 2 * n_c))
    for c in range(n_c):
        for k in range(3):
            q = mesh.tri_canon[c, k]
            w = mesh.node_weight[q]
            d[q, c] += -mesh.corner_normal[c, k, 0] / w
            d[q, n_c + c] += -mesh.corner_normal[c, k, 1] / w
    return d


def dense_p1_gradient(mesh):
    """P1 Lagrange gradient matrices from the reference-element mapping.

    Independent derivation: basis gradients are pushed forward with the
    inverse-transpose Jacobian of the affine map from the unit triangle.
    """
    n_c, n_p = mesh.num_cells, mesh.num_nodes
    gx = np.zeros((n_c, n_p))
    gy = np.zeros((n_c, n_p))
    grad_ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    for c in range(n_c):
        x = mesh.nodes[mesh.triangles[c]]
        m = np.column_stack([x[1] - x[0], x[2] - x[0]])
        grads = grad_ref @ np.linalg.inv(m)        # rows: grad psi_k
        for k in range(3):
            q = mesh.tri_canon[c, k]
            gx[c, q] += grads[k, 0]
            gy[c, q] += grads[k, 1]
    return gx, gy


def dense_p1_stiffness(mesh):
    """P1 Lagrange stiffness matrix with periodic canonical assembly."""
    n_p = mesh.num_nodes
    k_mat = np.zeros((n_p, n_p))
    grad_ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    for c in range(mesh.num_cells):
        x = mesh.nodes[mesh.triangles[c]]
        m = np.column_stack([x[1] - x[0], x[2] - x[0]])
        grads = grad_ref @ np.linalg.inv(m)
        local = mesh.cell_area[c] * grads @ grads.T
        for a in range(3):
            for b in range(3):
                k_mat[mesh.tri_canon[c, a], mesh.tri_canon[c, b]] += local[a, b]
    return k_mat
