"""Staggered mesh geometry: primal triangles, dual star polygons, corner normals.

The mesh couples a primal triangulation (cells ``c``) with a dual tessellation
built around the nodes ``p``.  Every (cell, corner) pair carries a corner
normal vector ``l_pc * n_pc`` obtained by lumping the two half-edges of the
cell adjacent to that corner; the dual cell of a node is the union of the
sub-quadrilaterals (node, edge midpoint, barycenter, edge midpoint) of all
cells meeting at the node.  Periodic meshes identify boundary nodes through a
canonical-index map; the dual cells of identified nodes are merged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MeshError(Exception):
    """Invalid mesh geometry or topology."""


@dataclass
class Mesh:
    """Immutable staggered-mesh geometry bundle.

    Node-indexed arrays have length ``num_nodes`` and cell-indexed arrays
    length ``num_cells``.  Vector quantities are stored as 3-vectors with a
    zero third component so that curls are uniform in the planar setting.
    """

    nodes: np.ndarray              # (Np, 2) coordinates
    triangles: np.ndarray          # (Nc, 3) node indices, counter-clockwise
    periodic_map: np.ndarray       # (Np,) canonical node index per node

    # derived geometry, populated by compute_geometry
    tri_canon: np.ndarray = None          # (Nc, 3) canonical corner indices
    cell_barycenter: np.ndarray = None    # (Nc, 2)
    cell_area: np.ndarray = None          # (Nc,)
    corner_normal: np.ndarray = None      # (Nc, 3, 3)  l_pc * n_pc, z = 0
    subcell_area: np.ndarray = None       # (Nc, 3)
    dual_area: np.ndarray = None          # (Np,) merged |omega_p|, broadcast
    node_weight: np.ndarray = None        # (Np,) |omega_p| on canonical nodes, 0 on duplicates
    incircle_diameter: np.ndarray = None  # (Nc,)
    boundary_corner: np.ndarray = None    # (Np, 3)  l_pb * n_pb, 0 off-boundary
    is_boundary_node: np.ndarray = None   # (Np,) bool, by canonical group

    # edge connectivity (interior edges have two cells, boundary edges one)
    edge_cells: np.ndarray = None         # (Ne, 2) cell pair, -1 for boundary
    edge_normal: np.ndarray = None        # (Ne, 3) unit normal out of edge_cells[:, 0]
    edge_length: np.ndarray = None        # (Ne,)
    edge_nodes: np.ndarray = None         # (Ne, 2) canonical end nodes

    node_to_cells: list = field(default=None, repr=False)  # per canonical node, CCW cell fan

    @property
    def num_nodes(self):
        return len(self.nodes)

    @property
    def num_cells(self):
        return len(self.triangles)

    @property
    def is_canonical(self):
        return self.periodic_map == np.arange(self.num_nodes)

    @property
    def interior_edges(self):
        return self.edge_cells[:, 1] >= 0

    @property
    def total_area(self):
        return float(self.cell_area.sum())

    def broadcast_nodal(self, values):
        """Copy canonical-node values onto their periodic duplicates."""
        return values[self.periodic_map]


def _signed_area(nodes, triangles):
    p = nodes[triangles]
    return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))


def _quad_area(a, b, c, d):
    """Shoelace area of the quadrilateral a-b-c-d (counter-clockwise)."""
    x = np.stack([a[..., 0], b[..., 0], c[..., 0], d[..., 0]], axis=-1)
    y = np.stack([a[..., 1], b[..., 1], c[..., 1], d[..., 1]], axis=-1)
    xn = np.roll(x, -1, axis=-1)
    yn = np.roll(y, -1, axis=-1)
    return 0.5 * (x * yn - xn * y).sum(axis=-1)


def compute_geometry(nodes, triangles, periodic_map=None):
    """Build the full staggered geometry from raw nodes and triangles.

    Clockwise triangles are silently reoriented.  Raises :class:`MeshError`
    for degenerate cells or a non-conforming triangulation (an edge shared by
    more than two cells, counted in canonical indices).
    """
    nodes = np.asarray(nodes, dtype=float)
    triangles = np.array(triangles, dtype=np.int64)
    n_p = len(nodes)
    if periodic_map is None:
        periodic_map = np.arange(n_p)
    else:
        periodic_map = np.asarray(periodic_map, dtype=np.int64)
        if not np.array_equal(periodic_map[periodic_map], periodic_map):
            raise MeshError("periodic_map is not idempotent")

    # orientation repair
    sa = _signed_area(nodes, triangles)
    flip = sa < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    area = np.abs(sa)
    bad = np.flatnonzero(area <= 0)
    if bad.size:
        raise MeshError(f"degenerate cell {bad[0]} with area {area[bad[0]]:.3e}")

    mesh = Mesh(nodes=nodes, triangles=triangles, periodic_map=periodic_map)
    mesh.tri_canon = periodic_map[triangles]
    mesh.cell_area = area
    p = nodes[triangles]                      # (Nc, 3, 2)
    mesh.cell_barycenter = p.mean(axis=1)

    # corner normal of local vertex k is half the edge opposite to it,
    # rotated outward: l_pc n_pc = 1/2 (y_next - y_prev, x_prev - x_next)
    nxt = p[:, [1, 2, 0], :]
    prv = p[:, [2, 0, 1], :]
    cn = np.zeros((len(triangles), 3, 3))
    cn[:, :, 0] = 0.5 * (nxt[:, :, 1] - prv[:, :, 1])
    cn[:, :, 1] = 0.5 * (prv[:, :, 0] - nxt[:, :, 0])
    mesh.corner_normal = cn

    # sub-cell quadrilateral (node, midpoint to next, barycenter, midpoint to prev)
    mid_n = 0.5 * (p + nxt)
    mid_p = 0.5 * (p + prv)
    bc = mesh.cell_barycenter[:, None, :]
    mesh.subcell_area = _quad_area(p, mid_n, np.broadcast_to(bc, p.shape), mid_p)

    perim = (np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
             + np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
             + np.linalg.norm(p[:, 2] - p[:, 0], axis=1))
    mesh.incircle_diameter = 4.0 * area / perim

    w = np.bincount(mesh.tri_canon.ravel(), weights=mesh.subcell_area.ravel(),
                    minlength=n_p)
    mesh.node_weight = np.where(periodic_map == np.arange(n_p), w, 0.0)
    mesh.dual_area = w[periodic_map]

    _build_edges(mesh)
    _build_boundary(mesh)
    _build_node_fans(mesh)
    return mesh


def _build_edges(mesh):
    tc = mesh.tri_canon
    n_c = mesh.num_cells
    edges = {}
    for c in range(n_c):
        pts = mesh.nodes[mesh.triangles[c]]
        for k in range(3):
            a, b = tc[c, k], tc[c, (k + 1) % 3]
            key = (a, b) if a < b else (b, a)
            t = pts[(k + 1) % 3] - pts[k]
            rec = (c, t)
            edges.setdefault(key, []).append(rec)

    n_e = len(edges)
    edge_cells = np.full((n_e, 2), -1, dtype=np.int64)
    edge_normal = np.zeros((n_e, 3))
    edge_length = np.zeros(n_e)
    edge_nodes = np.zeros((n_e, 2), dtype=np.int64)
    for i, (key, recs) in enumerate(edges.items()):
        if len(recs) > 2:
            raise MeshError(f"non-conforming mesh: edge {key} shared by {len(recs)} cells")
        c0, t0 = recs[0]
        ln = np.hypot(t0[0], t0[1])
        edge_cells[i, 0] = c0
        edge_length[i] = ln
        # outward normal of a CCW cell: rotate tangent by -90 degrees
        edge_normal[i, :2] = (t0[1] / ln, -t0[0] / ln)
        edge_nodes[i] = key
        if len(recs) == 2:
            c1, t1 = recs[1]
            edge_cells[i, 1] = c1
            if abs(np.hypot(t1[0], t1[1]) - ln) > 1e-9 * (1 + ln):
                raise MeshError(f"periodic edge {key} has mismatched lengths")
    mesh.edge_cells = edge_cells
    mesh.edge_normal = edge_normal
    mesh.edge_length = edge_length
    mesh.edge_nodes = edge_nodes


def _build_boundary(mesh):
    n_p = mesh.num_nodes
    bc = np.zeros((n_p, 3))
    on_boundary = np.zeros(n_p, dtype=bool)
    ext = ~mesh.interior_edges
    for i in np.flatnonzero(ext):
        a, b = mesh.edge_nodes[i]
        contrib = 0.5 * mesh.edge_length[i] * mesh.edge_normal[i]
        bc[a] += contrib
        bc[b] += contrib
        on_boundary[a] = on_boundary[b] = True
    mesh.boundary_corner = bc[mesh.periodic_map]
    mesh.is_boundary_node = on_boundary[mesh.periodic_map]


def _build_node_fans(mesh):
    """Cell fan around each canonical node, sorted counter-clockwise.

    Angles are measured from the node copy actually referenced by each cell,
    which keeps fans of periodically merged nodes consistent.
    """
    n_p = mesh.num_nodes
    fans = [[] for _ in range(n_p)]
    for c in range(mesh.num_cells):
        for k in range(3):
            p = mesh.triangles[c, k]
            d = mesh.cell_barycenter[c] - mesh.nodes[p]
            fans[mesh.periodic_map[p]].append((np.arctan2(d[1], d[0]), c))
    mesh.node_to_cells = [np.array([c for _, c in sorted(f)], dtype=np.int64)
                          for f in fans]


def generate_structured_triangulation(nx, ny, domain=((0.0, 0.0), (1.0, 1.0)),
                                      periodic_x=False, periodic_y=False,
                                      jitter=0.0, seed=0):
    """Criss-cross triangulation of a rectangle with nx-by-ny lattice points.

    Each lattice quad is split along alternating diagonals.  With ``jitter``
    the interior lattice points are displaced by up to ``jitter`` times the
    lattice spacing using a seeded RNG; displacements of periodically paired
    boundary nodes are identical, and nodes on non-periodic boundaries keep
    their boundary coordinate.
    """
    if nx < 3 or ny < 3:
        raise MeshError("need at least a 3x3 lattice")
    if not 0.0 <= jitter <= 0.3:
        raise MeshError("jitter must lie in [0, 0.3]")
    (x0, y0), (x1, y1) = domain
    dx = (x1 - x0) / (nx - 1)
    dy = (y1 - y0) / (ny - 1)

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    ii = ii.ravel()
    jj = jj.ravel()
    nodes = np.column_stack([x0 + ii * dx, y0 + jj * dy]).astype(float)

    ic = np.where(periodic_x & (ii == nx - 1), 0, ii)
    jc = np.where(periodic_y & (jj == ny - 1), 0, jj)
    periodic_map = jc * nx + ic

    if jitter > 0.0:
        rng = np.random.default_rng(seed)
        disp = (rng.uniform(-1.0, 1.0, size=(nx * ny, 2))
                * jitter * min(dx, dy))
        # duplicates inherit the canonical displacement
        disp = disp[periodic_map]
        if not periodic_x:
            disp[(ii == 0) | (ii == nx - 1), 0] = 0.0
        if not periodic_y:
            disp[(jj == 0) | (jj == ny - 1), 1] = 0.0
        nodes = nodes + disp

    tris = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            n00 = j * nx + i
            n10 = j * nx + i + 1
            n01 = (j + 1) * nx + i
            n11 = (j + 1) * nx + i + 1
            if (i + j) % 2 == 0:
                tris.append((n00, n10, n11))
                tris.append((n00, n11, n01))
            else:
                tris.append((n00, n10, n01))
                tris.append((n10, n11, n01))
    return compute_geometry(nodes, np.array(tris, dtype=np.int64), periodic_map)


def validate_geometry(mesh):
    """Maximum absolute residual of each geometric invariant.

    Pure report; raises nothing and mutates nothing.
    """
    p = mesh.nodes[mesh.triangles]
    perim = (np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
             + np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
             + np.linalg.norm(p[:, 2] - p[:, 0], axis=1))
    cell_sum = mesh.corner_normal.sum(axis=1)
    report = {}
    report["cell_gauss"] = float(np.max(
        np.linalg.norm(cell_sum, axis=1) / perim))

    n_p = mesh.num_nodes
    acc = np.zeros((n_p, 3))
    np.add.at(acc, mesh.tri_canon.ravel(),
              mesh.corner_normal.reshape(-1, 3))
    canon = mesh.is_canonical
    interior = canon & ~mesh.is_boundary_node
    bound = canon & mesh.is_boundary_node
    report["node_gauss_interior"] = float(
        np.abs(acc[interior]).max()) if interior.any() else 0.0
    report["node_gauss_boundary"] = float(
        np.abs(acc[bound] - mesh.boundary_corner[bound]).max()) if bound.any() else 0.0

    total = mesh.total_area
    report["area_partition"] = float(
        abs(mesh.node_weight.sum() - total) / total)
    report["min_cell_area"] = float(mesh.cell_area.min())
    report["subcell_partition"] = float(
        np.abs(mesh.subcell_area.sum(axis=1) - mesh.cell_area).max())
    return report


def write_mesh(mesh, path):
    """Write the ASCII "FVSTAG-MESH 1" format."""
    pairs = [(i, int(c)) for i, c in enumerate(mesh.periodic_map) if c != i]
    with open(path, "w") as f:
        f.write("FVSTAG-MESH 1\n")
        f.write(f"{mesh.num_nodes} {mesh.num_cells} {len(pairs)}\n")
        for x, y in mesh.nodes:
            f.write(f"{x:.17g} {y:.17g}\n")
        for i, j, k in mesh.triangles:
            f.write(f"{i} {j} {k}\n")
        for a, b in pairs:
            f.write(f"{a} {b}\n")


def read_mesh(path):
    """Read the ASCII "FVSTAG-MESH 1" format and build the geometry."""
    with open(path) as f:
        tokens = []
        lines = f.read().splitlines()
    if not lines or lines[0].split("#")[0].strip() != "FVSTAG-MESH 1":
        raise MeshError(f"{path}: missing FVSTAG-MESH 1 header")
    for line in lines[1:]:
        tokens.extend(line.split("#")[0].split())
    it = iter(tokens)
    try:
        n_p, n_c, n_pairs = int(next(it)), int(next(it)), int(next(it))
        nodes = np.array([[float(next(it)), float(next(it))]
                          for _ in range(n_p)])
        tris = np.array([[int(next(it)), int(next(it)), int(next(it))]
                         for _ in range(n_c)], dtype=np.int64)
        pmap = np.arange(n_p)
        for _ in range(n_pairs):
            a, b = int(next(it)), int(next(it))
            pmap[a] = b
    except StopIteration:
        raise MeshError(f"{path}: truncated mesh file") from None
    # canonicalize chains a -> b -> c
    while not np.array_equal(pmap[pmap], pmap):
        pmap = pmap[pmap]
    return compute_geometry(nodes, tris, pmap)
