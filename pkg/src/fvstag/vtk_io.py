"""Field output: legacy ASCII VTK snapshots and CSV time series.

Both formats are deliberately plain so files stay hand-inspectable at the
problem sizes this solver targets.  All numbers are printed with 16
significant digits; parsing the text back reproduces the binary values.
"""

from __future__ import annotations

import numpy as np

TIMESERIES_COLUMNS = ("step", "time", "dt", "Ekin", "Emag", "mom_x", "mom_y",
                      "div_u_L2", "div_B_L2", "curl_A_L2", "cg_iters")

_FMT = "%.16g"


def _vec_lines(out, field):
    for row in field:
        out.write(" ".join(_FMT % v for v in row) + "\n")


def write_vtk(mesh, state, path, params=None, model=None):
    """Write mesh + fields as a legacy ASCII VTK unstructured grid.

    Points carry p and rho; cells carry the velocity (and B / the rows of
    the distortion field A when present) as 3-vectors.
    """
    try:
        with open(path, "w") as out:
            out.write("# vtk DataFile Version 3.0\n")
            out.write("fvstag snapshot t=%s step=%d\n" % (_FMT % state.t,
                                                          state.step))
            out.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
            out.write("POINTS %d double\n" % mesh.num_nodes)
            pts = np.column_stack([mesh.nodes, np.zeros(mesh.num_nodes)])
            _vec_lines(out, pts)
            n_c = mesh.num_cells
            out.write("CELLS %d %d\n" % (n_c, 4 * n_c))
            for tri in mesh.triangles:
                out.write("3 %d %d %d\n" % tuple(tri))
            out.write("CELL_TYPES %d\n" % n_c)
            out.write("5\n" * n_c)

            out.write("POINT_DATA %d\n" % mesh.num_nodes)
            out.write("SCALARS p double 1\nLOOKUP_TABLE default\n")
            out.write("".join(_FMT % v + "\n" for v in state.p))
            rho = state.rho_node if state.rho_node is not None \
                else np.ones(mesh.num_nodes)
            out.write("SCALARS rho double 1\nLOOKUP_TABLE default\n")
            out.write("".join(_FMT % v + "\n" for v in rho))

            out.write("CELL_DATA %d\n" % n_c)
            if params is not None and model is not None:
                from . import models
                u = models.velocity(state, mesh, params, model)
            else:
                u = state.m
            out.write("VECTORS u double\n")
            _vec_lines(out, u)
            if state.B is not None:
                out.write("VECTORS B double\n")
                _vec_lines(out, state.B)
            if state.A is not None:
                for i in range(3):
                    out.write("VECTORS A_row%d double\n" % i)
                    _vec_lines(out, state.A[:, i, :])
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path!r}: {exc}") from exc


def write_timeseries(path, rows):
    """Write per-step diagnostics as CSV with a fixed column set.

    Quantities a model does not carry are written as 0; a leading comment
    names the columns that were actually present in the rows.
    """
    active = [c for c in TIMESERIES_COLUMNS
              if any(c in r for r in rows)] if rows else []
    try:
        with open(path, "w") as out:
            out.write("# active columns: %s\n" % ",".join(active))
            out.write(",".join(TIMESERIES_COLUMNS) + "\n")
            for r in rows:
                vals = []
                for c in TIMESERIES_COLUMNS:
                    v = r.get(c, 0)
                    if c in ("step", "cg_iters"):
                        vals.append("%d" % v)
                    else:
                        vals.append(_FMT % v)
                out.write(",".join(vals) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write CSV file {path!r}: {exc}") from exc


def read_vtk_points(path):
    """Parse back the POINTS block of a legacy VTK file (round-trip check)."""
    with open(path) as f:
        lines = f.readlines()
    for i, line in enumerate(lines):
        if line.startswith("POINTS"):
            n = int(line.split()[1])
            vals = [[float(t) for t in lines[i + 1 + k].split()]
                    for k in range(n)]
            return np.array(vals)
    raise ValueError(f"no POINTS block in {path!r}")
