"""Matrix-free conjugate gradient under area-weighted inner products.

The pressure and viscous systems are self-adjoint with respect to the
diagonal weighting by dual-cell (node unknowns) or primal-cell (velocity
unknowns) areas, so CG runs in that inner product.  A single degree of
freedom can be pinned strongly, which both fixes the pressure constant of
pure-Neumann problems and removes the nullspace of the periodic Poisson
operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SolverError(Exception):
    """Hard numerical failure inside a linear solve."""


@dataclass
class CGReport:
    iterations: int
    relative_residual: float
    converged: bool


def conjugate_gradient(apply_a, b, x0, weight, tol=1e-12, max_iter=None,
                       pin=None, diag=None):
    """Solve A x = b with CG in the weighted inner product <x, y> = sum w x y.

    apply_a must be self-adjoint positive semi-definite in that inner
    product.  `pin` is an optional (index, value) pair enforced strongly: the
    pinned entry is eliminated symmetrically and re-inserted afterwards.
    `diag` enables Jacobi preconditioning with the given diagonal extract.

    Returns (x, CGReport).  Reaching max_iter yields converged=False; a NaN
    residual raises SolverError.
    """
    b = np.asarray(b, dtype=float)
    x = np.array(x0, dtype=float)
    w = np.asarray(weight, dtype=float)
    n = b.size
    if max_iter is None:
        max_iter = 10 * n

    if pin is not None:
        idx, value = pin
        shift = np.zeros_like(b)
        shift[idx] = value
        b = b - apply_a(shift)
        b[idx] = 0.0
        x[idx] = 0.0

        base = apply_a

        def apply_a(v, _base=base, _idx=idx):
            vv = v.copy()
            vv[_idx] = 0.0
            out = _base(vv)
            out[_idx] = 0.0
            return out

    def dot(u, v):
        return float(np.dot(w * u, v))

    bnorm = np.sqrt(dot(b, b))
    if bnorm == 0.0:
        if pin is not None:
            x[:] = 0.0
            x[idx] = value
        return x, CGReport(0, 0.0, True)

    r = b - apply_a(x)
    if pin is not None:
        r[idx] = 0.0
    z = r / diag if diag is not None else r
    p = z.copy()
    rz = dot(r, z)
    res = np.sqrt(dot(r, r)) / bnorm
    if not np.isfinite(res):
        raise SolverError("CG breakdown: non-finite residual")
    it = 0
    while res > tol and it < max_iter:
        ap = apply_a(p)
        pap = dot(p, ap)
        if not np.isfinite(pap):
            raise SolverError("CG breakdown: non-finite curvature")
        if pap <= 0.0:
            break  # nullspace direction; accept current iterate
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        res = np.sqrt(dot(r, r)) / bnorm
        if not np.isfinite(res):
            raise SolverError("CG breakdown: non-finite residual")
        z = r / diag if diag is not None else r
        rz_new = dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    if pin is not None:
        x[idx] = value
    return x, CGReport(it, res, res <= tol)
