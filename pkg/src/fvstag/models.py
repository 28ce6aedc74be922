"""Semi-implicit time steppers for the four PDE systems.

Each step treats the nonlinear convective (and stress) terms explicitly with
an edge-based Rusanov flux and the pressure implicitly: a node-based Poisson
solve for the incompressible models, a node-based wave-equation solve for the
weakly compressible model.  The magnetic field is advanced with the primal
curl of the node electric field and the distortion field with the primal
gradient of the node momentum-transport term, so the discrete involutions
div B = 0 and curl A = 0 hold to machine precision independently of the CG
tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import operators as ops
from .linsolve import SolverError, conjugate_gradient

MODELS = ("euler-incomp", "weakly-comp", "mhd-incomp", "gpr-incomp")

INCOMPRESSIBLE = ("euler-incomp", "mhd-incomp", "gpr-incomp")


class ConfigError(Exception):
    pass


class StepError(Exception):
    """A time step could not be completed (CG failure, NaN flux, ...)."""


@dataclass
class ModelParams:
    rho0: float = 1.0
    c0: float = 10.0            # isothermal sound speed (weakly compressible)
    mu: float = 0.0             # dynamic viscosity
    cs: float = 0.0             # shear wave speed (GPR)
    cfl: float = 0.9
    viscosity_mode: str = "none"      # none | explicit | implicit
    dt_max: float = None
    lambda_floor: float = None
    cg_tol: float = 1e-12
    cg_max_iter: int = None
    pin_index: int = 0
    pin_value: float = 0.0
    keep_trace_term: bool = True      # keep the 2/3 (div u) I part of sigma


@dataclass
class ModelState:
    t: float = 0.0
    step: int = 0
    p: np.ndarray = None          # node pressure
    m: np.ndarray = None          # cell momentum (Nc, 3)
    rho_node: np.ndarray = None   # node density (weakly compressible only)
    B: np.ndarray = None          # cell magnetic field (MHD)
    A: np.ndarray = None          # cell distortion (Nc, 3, 3) (GPR)

    def copy(self):
        return ModelState(
            t=self.t, step=self.step,
            p=self.p.copy(), m=self.m.copy(),
            rho_node=None if self.rho_node is None else self.rho_node.copy(),
            B=None if self.B is None else self.B.copy(),
            A=None if self.A is None else self.A.copy())


def cell_density(state, mesh, params, model):
    if model == "weakly-comp":
        return ops.average_node_to_cell(state.rho_node, mesh)
    return np.full(mesh.num_cells, params.rho0)


def velocity(state, mesh, params, model):
    return state.m / cell_density(state, mesh, params, model)[:, None]


# ---------------------------------------------------------------------------
# time step
# ---------------------------------------------------------------------------

def _cell_wavespeed(state, mesh, params, model):
    u = velocity(state, mesh, params, model)
    lam = 2.0 * np.linalg.norm(u[:, :2], axis=1)
    if model == "mhd-incomp":
        lam = lam + np.linalg.norm(state.B[:, :2], axis=1) / np.sqrt(params.rho0)
    elif model == "gpr-incomp":
        lam = lam + 2.0 * params.cs
    return lam


def compute_time_step(state, mesh, params, model, t_end):
    """CFL time step: dt = CFL min_c h(c)/lambda(c), capped and floored."""
    floor = params.lambda_floor
    if floor is None:
        if model == "weakly-comp":
            floor = 0.05 * params.c0
        else:
            floor = 1e-10 * np.sqrt(mesh.total_area) / max(t_end, 1e-300)
    lam = np.maximum(_cell_wavespeed(state, mesh, params, model), floor)
    dt = params.cfl * float(np.min(mesh.incircle_diameter / lam))
    if params.viscosity_mode == "explicit" and params.mu > 0:
        nu = params.mu / params.rho0
        dt = min(dt, params.cfl * float(np.min(mesh.incircle_diameter)) ** 2 / (4 * nu))
    if params.dt_max is not None:
        dt = min(dt, params.dt_max)
    dt = min(dt, t_end - state.t)
    if dt <= 0:
        raise ConfigError(f"non-positive time step dt={dt}")
    return dt


# ---------------------------------------------------------------------------
# explicit convective predictor
# ---------------------------------------------------------------------------

def _flux_tensor(state, u, params, model):
    """Per-cell flux tensor of the explicit momentum subsystem."""
    f = state.m[:, :, None] * u[:, None, :]          # rho u (x) u
    if model == "mhd-incomp":
        b = state.B
        f = f - b[:, :, None] * b[:, None, :]
        bsq = (b * b).sum(axis=1)
        f[:, 0, 0] += 0.5 * bsq
        f[:, 1, 1] += 0.5 * bsq
        f[:, 2, 2] += 0.5 * bsq
    elif model == "gpr-incomp":
        f = f + gpr_stress(state.A, params.rho0, params.cs)
    return f


def _edge_wavespeed(u, state, params, model, cells, normal):
    un = np.abs((u[cells, :2] * normal[:, :2]).sum(axis=1))
    lam = 2.0 * un
    if model == "mhd-incomp":
        lam = lam + np.linalg.norm(state.B[cells, :2], axis=1) / np.sqrt(params.rho0)
    elif model == "gpr-incomp":
        lam = lam + 2.0 * params.cs
    return lam


def convective_predictor(state, u, mesh, dt, params, model):
    """Explicit Rusanov update of the momentum: m* before pressure/viscosity.

    The dissipation acts on the jump of the conserved explicit state (the
    momentum), which makes the update conservative on periodic meshes.
    Boundary edges use a zero-gradient ghost state.
    """
    flux = _flux_tensor(state, u, params, model)
    rhs = np.zeros_like(state.m)

    interior = mesh.interior_edges
    i_l = mesh.edge_cells[interior, 0]
    i_r = mesh.edge_cells[interior, 1]
    n = mesh.edge_normal[interior]
    ln = mesh.edge_length[interior]
    fn = 0.5 * np.einsum("eij,ej->ei", flux[i_l] + flux[i_r], n)
    s = np.maximum(_edge_wavespeed(u, state, params, model, i_l, n),
                   _edge_wavespeed(u, state, params, model, i_r, n))
    f = fn - 0.5 * s[:, None] * (state.m[i_r] - state.m[i_l])
    if not np.isfinite(f).all():
        bad = int(np.flatnonzero(~np.isfinite(f).all(axis=1))[0])
        raise StepError(f"NaN Rusanov flux on interior edge {bad}")
    contrib = ln[:, None] * f
    np.add.at(rhs, i_l, contrib)
    np.add.at(rhs, i_r, -contrib)

    ext = ~interior
    if ext.any():
        i_l = mesh.edge_cells[ext, 0]
        n = mesh.edge_normal[ext]
        ln = mesh.edge_length[ext]
        f = np.einsum("eij,ej->ei", flux[i_l], n)
        np.add.at(rhs, i_l, ln[:, None] * f)

    return state.m - dt * rhs / mesh.cell_area[:, None]


# ---------------------------------------------------------------------------
# viscous stress
# ---------------------------------------------------------------------------

def viscous_stress_nodes(u, mu, mesh, keep_trace_term=True,
                         boundary_values=None):
    """Node viscous stress sigma = -mu (grad u + grad u^T - 2/3 (div u) I)."""
    g = ops.gradient_dual(u, mesh, boundary_values=boundary_values)
    sigma = -mu * (g + g.transpose(0, 2, 1))
    if keep_trace_term:
        div = g[:, 0, 0] + g[:, 1, 1] + g[:, 2, 2]
        corr = (2.0 / 3.0) * mu * div
        sigma[:, 0, 0] += corr
        sigma[:, 1, 1] += corr
        sigma[:, 2, 2] += corr
    return sigma


def implicit_viscous_solve(m_conv, dt, mu, rho_c, mesh, params):
    """Solve (rho u + dt div sigma(u)) = m_conv for the star velocity.

    The operator is symmetric positive definite under the cell-area-weighted
    inner product; solved matrix-free with CG.
    """
    n_c = mesh.num_cells

    def apply_v(x):
        u = x.reshape(n_c, 3)
        sig = viscous_stress_nodes(u, mu, mesh, params.keep_trace_term)
        out = rho_c[:, None] * u + dt * ops.divergence_primal_tensor(sig, mesh)
        return out.ravel()

    weight = np.repeat(mesh.cell_area, 3)
    x0 = (m_conv / rho_c[:, None]).ravel()
    x, rep = conjugate_gradient(apply_v, m_conv.ravel(), x0, weight,
                                tol=params.cg_tol, max_iter=params.cg_max_iter)
    if not rep.converged:
        raise StepError(f"implicit viscous CG stalled at {rep.relative_residual:.2e}")
    return x.reshape(n_c, 3), rep


def _apply_viscosity(m_conv, u_n, dt, rho_c, mesh, params):
    """Return (m_star_before_pressure, cg_iterations)."""
    if params.mu == 0 or params.viscosity_mode == "none":
        return m_conv, 0
    if params.viscosity_mode == "explicit":
        sig = viscous_stress_nodes(u_n, params.mu, mesh, params.keep_trace_term)
        return m_conv - dt * ops.divergence_primal_tensor(sig, mesh), 0
    if params.viscosity_mode == "implicit":
        u_star, rep = implicit_viscous_solve(m_conv, dt, params.mu, rho_c,
                                             mesh, params)
        return rho_c[:, None] * u_star, rep.iterations
    raise ConfigError(f"unknown viscosity_mode {params.viscosity_mode!r}")


# ---------------------------------------------------------------------------
# GPR stress
# ---------------------------------------------------------------------------

def gpr_stress(a_field, rho, cs):
    """Shear stress rho cs^2 G dev(G) with G = A^T A."""
    g = np.einsum("cki,ckj->cij", a_field, a_field)
    tr = g[:, 0, 0] + g[:, 1, 1] + g[:, 2, 2]
    dev = g.copy()
    for i in range(3):
        dev[:, i, i] -= tr / 3.0
    return rho * cs * cs * np.einsum("cik,ckj->cij", g, dev)


# ---------------------------------------------------------------------------
# implicit pressure solves
# ---------------------------------------------------------------------------

def pressure_projection(m_star, p_guess, dt, mesh, params):
    """Poisson solve div grad p = (1/dt) div m*, then m = m* - dt grad p."""
    rhs = -divergence_dual_bc(m_star, mesh) / dt

    def apply_l(p):
        return -ops.divergence_dual(ops.gradient_primal(p, mesh), mesh)

    p, rep = conjugate_gradient(
        apply_l, rhs, p_guess, mesh.node_weight,
        tol=params.cg_tol, max_iter=params.cg_max_iter,
        pin=(params.pin_index, params.pin_value))
    if not rep.converged:
        raise StepError(f"pressure CG stalled at {rep.relative_residual:.2e}")
    p = p[mesh.periodic_map]
    m_new = m_star - dt * ops.gradient_primal(p, mesh)
    return p, m_new, rep


def divergence_dual_bc(m_star, mesh):
    """Dual divergence with outflow closure on boundary nodes.

    Boundary nodes receive the flux of the node-averaged momentum through the
    boundary corner vector (copy of the interior value); interior and
    periodic nodes are unaffected.
    """
    if mesh.is_boundary_node.any():
        mb = ops.average_cell_to_node(m_star, mesh)
        return ops.divergence_dual(m_star, mesh, boundary_values=mb)
    return ops.divergence_dual(m_star, mesh)


def pressure_wave_solve(m_star, p_n, dt, mesh, params):
    """Wave-equation solve p/c0^2 - dt^2 div grad p = p^n/c0^2 - dt div m*."""
    c2 = params.c0 * params.c0
    rhs = p_n / c2 - dt * divergence_dual_bc(m_star, mesh)

    def apply_w(p):
        lap = ops.divergence_dual(ops.gradient_primal(p, mesh), mesh)
        return p / c2 - dt * dt * lap

    p, rep = conjugate_gradient(apply_w, rhs, p_n, mesh.node_weight,
                                tol=params.cg_tol, max_iter=params.cg_max_iter)
    if not rep.converged:
        raise StepError(f"pressure-wave CG stalled at {rep.relative_residual:.2e}")
    p = p[mesh.periodic_map]
    m_new = m_star - dt * ops.gradient_primal(p, mesh)
    return p, m_new, rep


# ---------------------------------------------------------------------------
# steppers
# ---------------------------------------------------------------------------

def step(state, mesh, params, model, t_end):
    """Advance one step; returns (new_state, info dict)."""
    if model == "weakly-comp":
        return step_weakly_compressible(state, mesh, params, t_end)
    if model == "euler-incomp":
        return step_incompressible_euler(state, mesh, params, t_end)
    if model == "mhd-incomp":
        return step_incompressible_mhd(state, mesh, params, t_end)
    if model == "gpr-incomp":
        return step_incompressible_gpr(state, mesh, params, t_end)
    raise ConfigError(f"unknown model {model!r}")


def _finish_incompressible(state, m_star, extra, dt, mesh, params, visc_iters):
    rho = params.rho0
    ekin_star = 0.5 * rho * float(
        np.sum(mesh.cell_area[:, None] * (m_star / rho) ** 2))
    p, m_new, rep = pressure_projection(m_star, state.p, dt, mesh, params)
    ekin_new = 0.5 * rho * float(
        np.sum(mesh.cell_area[:, None] * (m_new / rho) ** 2))
    new = replace(state, t=state.t + dt, step=state.step + 1, p=p, m=m_new,
                  **extra)
    info = {"dt": dt, "cg_iters": rep.iterations + visc_iters,
            "ekin_star": ekin_star, "ekin_new": ekin_new}
    return new, info


def step_incompressible_euler(state, mesh, params, t_end, model="euler-incomp"):
    dt = compute_time_step(state, mesh, params, model, t_end)
    rho_c = np.full(mesh.num_cells, params.rho0)
    u = state.m / rho_c[:, None]
    m_conv = convective_predictor(state, u, mesh, dt, params, model)
    m_star, visc_iters = _apply_viscosity(m_conv, u, dt, rho_c, mesh, params)
    return _finish_incompressible(state, m_star, {}, dt, mesh, params,
                                  visc_iters)


def step_incompressible_mhd(state, mesh, params, t_end):
    model = "mhd-incomp"
    dt = compute_time_step(state, mesh, params, model, t_end)
    u = state.m / params.rho0
    u_p = ops.average_cell_to_node(u, mesh)
    b_p = ops.average_cell_to_node(state.B, mesh)
    e_p = -np.cross(u_p, b_p)
    b_new = state.B - dt * ops.curl_primal(e_p, mesh)
    m_star = convective_predictor(state, u, mesh, dt, params, model)
    return _finish_incompressible(state, m_star, {"B": b_new}, dt, mesh,
                                  params, 0)


def step_incompressible_gpr(state, mesh, params, t_end):
    model = "gpr-incomp"
    dt = compute_time_step(state, mesh, params, model, t_end)
    u = state.m / params.rho0
    u_p = ops.average_cell_to_node(u, mesh)
    a_p = ops.average_cell_to_node(state.A, mesh)
    w_p = np.einsum("pim,pm->pi", a_p, u_p)
    a_new = state.A - dt * ops.gradient_primal_vector(w_p, mesh)
    # Galilean term u . curl A, evaluated with the dual curl of the cell
    # field: exactly zero while the involution curl A = 0 holds, so the
    # update stays a pure primal gradient and preserves the involution.
    k_node = ops.curl_dual_rows(state.A, mesh)          # (Np, 3, 3)
    k_cell = ops.average_node_to_cell(k_node, mesh)
    a_new = a_new + dt * np.cross(u[:, None, :], k_cell)
    m_star = convective_predictor(state, u, mesh, dt, params, model)
    return _finish_incompressible(state, m_star, {"A": a_new}, dt, mesh,
                                  params, 0)


def step_weakly_compressible(state, mesh, params, t_end):
    model = "weakly-comp"
    dt = compute_time_step(state, mesh, params, model, t_end)
    rho_c = ops.average_node_to_cell(state.rho_node, mesh)
    if np.any(rho_c <= 0):
        raise StepError("non-positive cell density")
    u = state.m / rho_c[:, None]
    m_conv = convective_predictor(state, u, mesh, dt, params, model)
    m_star, visc_iters = _apply_viscosity(m_conv, u, dt, rho_c, mesh, params)
    u_star = m_star / rho_c[:, None]
    ekin_star = 0.5 * float(np.sum(mesh.cell_area * rho_c
                                   * (u_star ** 2).sum(axis=1)))
    p, m_new, rep = pressure_wave_solve(m_star, state.p, dt, mesh, params)
    rho_new = p / (params.c0 * params.c0)
    if np.any(rho_new[mesh.node_weight > 0] <= 0):
        raise StepError("non-positive node density after pressure update")
    rho_c_new = ops.average_node_to_cell(rho_new, mesh)
    ekin_new = 0.5 * float(np.sum(mesh.cell_area * rho_c_new
                                  * ((m_new / rho_c_new[:, None]) ** 2).sum(axis=1)))
    new = replace(state, t=state.t + dt, step=state.step + 1, p=p, m=m_new,
                  rho_node=rho_new)
    info = {"dt": dt, "cg_iters": rep.iterations + visc_iters,
            "ekin_star": ekin_star, "ekin_new": ekin_new}
    return new, info


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def _node_l2(values, mesh):
    flat = values.reshape(mesh.num_nodes, -1)
    return float(np.sqrt(np.sum(mesh.node_weight[:, None] * flat * flat)))


def diagnostics(state, mesh, params, model):
    """Per-step scalar diagnostics (pure read)."""
    rho_c = cell_density(state, mesh, params, model)
    u = state.m / rho_c[:, None]
    d = {
        "Ekin": 0.5 * float(np.sum(mesh.cell_area * rho_c
                                   * (u * u).sum(axis=1))),
        "Emag": 0.0,
        "mom_x": float(np.sum(mesh.cell_area * state.m[:, 0])),
        "mom_y": float(np.sum(mesh.cell_area * state.m[:, 1])),
        "div_u_L2": _node_l2(ops.divergence_dual(u, mesh), mesh),
        "div_B_L2": 0.0,
        "curl_A_L2": 0.0,
        "mass": float(np.sum(mesh.node_weight * state.rho_node))
                if state.rho_node is not None
                else params.rho0 * mesh.total_area,
    }
    if state.B is not None:
        d["Emag"] = 0.5 * float(np.sum(mesh.cell_area
                                       * (state.B * state.B).sum(axis=1)))
        d["div_B_L2"] = _node_l2(ops.divergence_dual(state.B, mesh), mesh)
    if state.A is not None:
        d["curl_A_L2"] = _node_l2(ops.curl_dual_rows(state.A, mesh), mesh)
    return d
