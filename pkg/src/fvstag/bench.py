"""Benchmark cases, exact solutions, error norms and study drivers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import mesh as meshmod
from . import models
from . import operators as ops
from .models import ModelParams, ModelState

CASE_NAMES = ("taylor-green", "taylor-green-ns", "sod", "gresho",
              "mhd-vortex", "solid-rotor")


@dataclass
class CaseSpec:
    name: str
    model: str
    domain: tuple
    periodic_x: bool
    periodic_y: bool
    t_end: float = 0.25
    params: ModelParams = field(default_factory=ModelParams)
    has_exact: bool = False
    initial_projection: bool = False


def make_case(name, model=None, **param_overrides):
    """Build the CaseSpec with the published domain and defaults."""
    if name == "taylor-green":
        model = model or "euler-incomp"
        params = ModelParams(mu=0.0, viscosity_mode="none")
        spec = CaseSpec(name, model, ((0.0, 0.0), (2 * np.pi, 2 * np.pi)),
                        True, True, params=params, has_exact=True)
    elif name == "taylor-green-ns":
        model = model or "euler-incomp"
        params = ModelParams(mu=1.0, viscosity_mode="explicit")
        spec = CaseSpec(name, model, ((0.0, 0.0), (2 * np.pi, 2 * np.pi)),
                        True, True, params=params, has_exact=True)
    elif name == "sod":
        model = model or "weakly-comp"
        # resolve the acoustics: the shock-tube dynamics are sound waves
        params = ModelParams(c0=1.0, lambda_floor=1.0)
        spec = CaseSpec(name, model, ((-1.0, -1.0), (1.0, 1.0)),
                        False, True, params=params)
    elif name == "gresho":
        model = model or "weakly-comp"
        params = ModelParams(c0=10.0)
        spec = CaseSpec(name, model, ((-0.5, -0.5), (0.5, 0.5)),
                        True, True, params=params, has_exact=True)
    elif name == "mhd-vortex":
        model = model or "mhd-incomp"
        params = ModelParams()
        spec = CaseSpec(name, model, ((-5.0, -5.0), (5.0, 5.0)),
                        True, True, params=params, has_exact=True)
    elif name == "solid-rotor":
        model = model or "gpr-incomp"
        params = ModelParams(cs=0.25, pin_value=1.0)
        spec = CaseSpec(name, model, ((-1.0, -1.0), (1.0, 1.0)),
                        True, True, params=params, has_exact=False,
                        initial_projection=True)
    else:
        raise ValueError(f"unknown case {name!r}")
    if param_overrides:
        spec.params = replace(spec.params, **param_overrides)
    return spec


def build_mesh(case, nx, ny=None, jitter=0.0, seed=0):
    return meshmod.generate_structured_triangulation(
        nx, ny or nx, case.domain, case.periodic_x, case.periodic_y,
        jitter=jitter, seed=seed)


# ---------------------------------------------------------------------------
# exact solutions
# ---------------------------------------------------------------------------

def taylor_green_exact(xy, t, nu, p_offset=-0.5):
    """Velocity and pressure of the decaying vortex array."""
    x, y = xy[..., 0], xy[..., 1]
    decay = math.exp(-2.0 * nu * t)
    u = np.sin(x) * np.cos(y) * decay
    v = -np.cos(x) * np.sin(y) * decay
    p = p_offset + 0.25 * (np.cos(2 * x) + np.cos(2 * y)) * decay * decay
    return u, v, p


def mhd_vortex_exact(xy):
    """Stationary vortex equilibrium: u, B and p (with B = -u)."""
    x, y = xy[..., 0], xy[..., 1]
    r2 = x * x + y * y
    amp = np.exp(0.5 * (1.0 - r2))
    u = -y * amp
    v = x * amp
    bx, by = y * amp, -x * amp
    p = 1.0 + 0.5 * math.e - 0.5 * r2 * np.exp(1.0 - r2)
    return u, v, p, bx, by


def gresho_fields(xy, c0):
    x, y = xy[..., 0], xy[..., 1]
    r = np.hypot(x, y)
    uphi = np.where(r < 0.2, 5 * r, np.where(r < 0.4, 2 - 5 * r, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        p_mid = 12.5 * r * r + 4 * (1 - 5 * r) + 4 * np.log(np.maximum(5 * r, 1e-300))
    p0 = c0 * c0
    p = np.where(r < 0.2, p0 + 12.5 * r * r,
                 np.where(r < 0.4, p0 + p_mid, p0 - 2 + 4 * math.log(2)))
    rsafe = np.where(r > 0, r, 1.0)
    u = -y / rsafe * uphi
    v = x / rsafe * uphi
    return u, v, p


def solid_rotor_fields(xy, radius=0.2):
    x, y = xy[..., 0], xy[..., 1]
    inside = np.hypot(x, y) <= radius
    u = np.where(inside, -y / radius, 0.0)
    v = np.where(inside, x / radius, 0.0)
    return u, v


# ---------------------------------------------------------------------------
# initial conditions
# ---------------------------------------------------------------------------

def init_case(case, mesh):
    """Sample the initial state: node quantities at nodes, cell quantities at
    barycenters; the MHD magnetic field comes from the discrete curl of the
    sampled node potential so that its discrete divergence is exactly zero.
    """
    params = case.params
    xc = mesh.cell_barycenter
    xp = mesh.nodes
    n_c, n_p = mesh.num_cells, mesh.num_nodes
    state = ModelState(p=np.zeros(n_p), m=np.zeros((n_c, 3)))

    if case.name in ("taylor-green", "taylor-green-ns"):
        nu = params.mu / params.rho0 if params.viscosity_mode != "none" else 0.0
        if case.model == "weakly-comp":
            p_offset = params.c0 * params.c0  # keep rho = p/c0^2 near unity
        else:
            p_offset = -0.5
        u, v, p = taylor_green_exact(xp, 0.0, nu, p_offset)
        state.p = p
        uc, vc, _ = taylor_green_exact(xc, 0.0, nu, p_offset)
        if case.model == "weakly-comp":
            state.rho_node = state.p / params.c0 ** 2
            rho_c = ops.average_node_to_cell(state.rho_node, mesh)
        else:
            rho_c = np.full(n_c, params.rho0)
        state.m[:, 0] = rho_c * uc
        state.m[:, 1] = rho_c * vc
    elif case.name == "sod":
        rho = np.where(xp[:, 0] <= 0.0, 1.0, 0.125)
        state.rho_node = rho
        state.p = params.c0 ** 2 * rho
    elif case.name == "gresho":
        u, v, p = gresho_fields(xp, params.c0)
        state.p = p
        state.rho_node = p / params.c0 ** 2
        uc, vc, _ = gresho_fields(xc, params.c0)
        rho_c = ops.average_node_to_cell(state.rho_node, mesh)
        state.m[:, 0] = rho_c * uc
        state.m[:, 1] = rho_c * vc
    elif case.name == "mhd-vortex":
        u, v, p, _, _ = mhd_vortex_exact(xp)
        state.p = p
        uc, vc, _, _, _ = mhd_vortex_exact(xc)
        state.m[:, 0] = params.rho0 * uc
        state.m[:, 1] = params.rho0 * vc
        pot = np.zeros((n_p, 3))
        pot[:, 2] = -np.exp(0.5 * (1.0 - xp[:, 0] ** 2 - xp[:, 1] ** 2))
        state.B = ops.curl_primal(pot, mesh)
    elif case.name == "solid-rotor":
        state.p = np.full(n_p, 1.0)
        uc, vc = solid_rotor_fields(xc)
        state.m[:, 0] = params.rho0 * uc
        state.m[:, 1] = params.rho0 * vc
        state.A = np.broadcast_to(np.eye(3), (n_c, 3, 3)).copy()
    else:
        raise ValueError(f"unknown case {case.name!r}")

    # pin the pressure constant to the sampled value at the pinned node
    if case.model in models.INCOMPRESSIBLE:
        case.params = replace(params, pin_value=float(
            state.p[mesh.periodic_map[params.pin_index]]))
    return state


def project_initial_velocity(state, mesh, params):
    """One pressure solve to make the sampled velocity discretely
    divergence-free before stepping (discontinuous initial data)."""
    _, m_new, _ = models.pressure_projection(
        state.m, np.zeros(mesh.num_nodes), 1.0, mesh,
        replace(params, pin_value=0.0))
    state.m = m_new
    return state


# ---------------------------------------------------------------------------
# run driver
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    state: ModelState
    rows: list                 # per-step dicts (diagnostics + step info)
    total_cg_iters: int
    initial_diag: dict = None
    errors: dict = None


def run_case(case, mesh, t_end=None, max_steps=100000, on_step=None):
    """March the case to t_end collecting per-step diagnostics."""
    t_end = case.t_end if t_end is None else t_end
    state = init_case(case, mesh)
    if case.initial_projection:
        state = project_initial_velocity(state, mesh, case.params)
    rows = []
    total_cg = 0
    initial_diag = models.diagnostics(state, mesh, case.params, case.model)
    if on_step is not None:
        on_step(state, None)
    while state.t < t_end * (1 - 1e-12) and state.step < max_steps:
        state, info = models.step(state, mesh, case.params, case.model, t_end)
        diag = models.diagnostics(state, mesh, case.params, case.model)
        diag.update(step=state.step, time=state.t, **info)
        rows.append(diag)
        total_cg += info["cg_iters"]
        if on_step is not None:
            on_step(state, diag)
    result = RunResult(state=state, rows=rows, total_cg_iters=total_cg,
                       initial_diag=initial_diag)
    if case.has_exact:
        result.errors = error_norms(state, mesh, case)
    return result


def exact_at(case, xy, t):
    """Exact (u, v, p[, bx, by]) for cases that have a reference solution."""
    params = case.params
    if case.name in ("taylor-green", "taylor-green-ns"):
        nu = params.mu / params.rho0 if params.viscosity_mode != "none" else 0.0
        p_offset = params.c0 ** 2 if case.model == "weakly-comp" else -0.5
        return taylor_green_exact(xy, t, nu, p_offset)
    if case.name == "mhd-vortex":
        return mhd_vortex_exact(xy)
    if case.name == "gresho":
        return gresho_fields(xy, params.c0)
    raise ValueError(f"no exact solution for case {case.name!r}")


def error_norms(state, mesh, case):
    """Absolute L2 errors, cell-area weighted for cell variables and
    dual-area weighted for the nodal pressure."""
    t = state.t
    xc = mesh.cell_barycenter
    exact = exact_at(case, xc, t)
    u = models.velocity(state, mesh, case.params, case.model)
    werr = {}
    wc = mesh.cell_area

    def cell_l2(num, ex):
        return float(np.sqrt(np.sum(wc * (num - ex) ** 2)))

    werr["L2_u"] = cell_l2(u[:, 0], exact[0])
    werr["L2_v"] = cell_l2(u[:, 1], exact[1])
    ex_node = exact_at(case, mesh.nodes, t)
    dp = state.p - ex_node[2]
    if case.model in models.INCOMPRESSIBLE:
        # pressure is defined up to a constant; compare mean-free
        dp = dp - np.sum(mesh.node_weight * dp) / np.sum(mesh.node_weight)
    werr["L2_p"] = float(np.sqrt(np.sum(mesh.node_weight * dp ** 2)))
    if case.name == "mhd-vortex":
        werr["L2_Bx"] = cell_l2(state.B[:, 0], exact[3])
        werr["L2_By"] = cell_l2(state.B[:, 1], exact[4])
    return werr


# ---------------------------------------------------------------------------
# convergence studies
# ---------------------------------------------------------------------------

def convergence_study(case, nx_list, jitter=0.0, seed=0):
    """Error table with observed orders from successive refinements."""
    rows = []
    for nx in nx_list:
        mesh = build_mesh(case, nx, jitter=jitter, seed=seed)
        res = run_case(case, mesh)
        row = {"nx": nx, **res.errors}
        rows.append(row)
    for i, row in enumerate(rows):
        for key in list(row):
            if not key.startswith("L2_"):
                continue
            name = key[3:]
            if i == 0:
                row[f"order_{name}"] = float("nan")
            else:
                prev = rows[i - 1]
                row[f"order_{name}"] = math.log(prev[key] / row[key]) \
                    / math.log(row["nx"] / prev["nx"])
    return rows


def ap_sweep(nx, c0_list, t_end=0.25, jitter=0.0, seed=0):
    """Divergence of the velocity at t_end versus sound speed, plus the
    fitted log-log slope (asymptotic-preservation check)."""
    divs = []
    tables = []
    for c0 in c0_list:
        case = make_case("taylor-green", model="weakly-comp", c0=c0)
        mesh = build_mesh(case, nx, jitter=jitter, seed=seed)
        res = run_case(case, mesh, t_end=t_end)
        divs.append(res.rows[-1]["div_u_L2"])
        # published-table statistic: momentum divergence, root-sum-square
        # scaled by the node count
        divm = ops.divergence_dual(res.state.m, mesh)
        can = mesh.node_weight > 0
        tables.append(float(np.sqrt(np.sum(divm[can] ** 2)) / can.sum()))
    logs = np.log(np.asarray(c0_list, dtype=float))
    return {"c0": list(c0_list), "div_u_L2": divs, "div_m_table": tables,
            "slope": float(np.polyfit(logs, np.log(np.asarray(divs)), 1)[0]),
            "slope_table": float(np.polyfit(logs, np.log(np.asarray(tables)), 1)[0])}


# ---------------------------------------------------------------------------
# 1D Riemann reference (oracle for the shock tube)
# ---------------------------------------------------------------------------

_riemann_cache = {}


def riemann_reference_1d(rho_l, rho_r, c0, t, x_samples, n_cells=20000,
                        x_span=(-1.0, 1.0)):
    """Fine-grid explicit Rusanov reference for the 1D isothermal Euler
    equations with p = rho c0^2; samples (rho, m) at x_samples."""
    key = (rho_l, rho_r, c0, round(t, 12), n_cells, x_span)
    if key not in _riemann_cache:
        _riemann_cache[key] = _solve_riemann_1d(rho_l, rho_r, c0, t,
                                                n_cells, x_span)
    xc, rho, m = _riemann_cache[key]
    return (np.interp(x_samples, xc, rho), np.interp(x_samples, xc, m))


def _solve_riemann_1d(rho_l, rho_r, c0, t_end, n, x_span):
    a, b = x_span
    dx = (b - a) / n
    xc = a + (np.arange(n) + 0.5) * dx
    rho = np.where(xc <= 0.0, rho_l, rho_r)
    m = np.zeros(n)
    t = 0.0
    while t < t_end * (1 - 1e-12):
        u = m / rho
        smax = np.abs(u) + c0
        dt = min(0.45 * dx / smax.max(), t_end - t)
        f_rho = m
        f_m = m * u + c0 * c0 * rho
        sl = np.maximum(smax[:-1], smax[1:])
        fr_rho = 0.5 * (f_rho[:-1] + f_rho[1:]) - 0.5 * sl * (rho[1:] - rho[:-1])
        fr_m = 0.5 * (f_m[:-1] + f_m[1:]) - 0.5 * sl * (m[1:] - m[:-1])
        # transmissive ends
        fr_rho = np.concatenate([[f_rho[0]], fr_rho, [f_rho[-1]]])
        fr_m = np.concatenate([[f_m[0]], fr_m, [f_m[-1]]])
        rho = rho - dt / dx * np.diff(fr_rho)
        m = m - dt / dx * np.diff(fr_m)
        t += dt
    return xc, rho, m


def sod_profile(state, mesh, case, n_bins=None):
    """y-averaged density and momentum profile along x (cell quantities
    binned by barycenter into uniform x-bands)."""
    x0, x1 = case.domain[0][0], case.domain[1][0]
    rho_c = models.cell_density(state, mesh, case.params, case.model)
    if n_bins is None:
        n_bins = int(round(np.sqrt(mesh.num_cells / 2.0)))
    edges = np.linspace(x0, x1, n_bins + 1)
    idx = np.clip(np.digitize(mesh.cell_barycenter[:, 0], edges) - 1,
                  0, n_bins - 1)
    w = mesh.cell_area
    wsum = np.bincount(idx, weights=w, minlength=n_bins)
    rho_bar = np.bincount(idx, weights=w * rho_c, minlength=n_bins) / wsum
    m_bar = np.bincount(idx, weights=w * state.m[:, 0], minlength=n_bins) / wsum
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, rho_bar, m_bar


# ---------------------------------------------------------------------------
# structure verification
# ---------------------------------------------------------------------------

def structure_report(rows, div_u_ceiling=1e-10, div_b_ceiling=1e-12,
                     curl_a_ceiling=1e-12, energy_slack=1e-10,
                     check_div_b=False, check_curl_a=False,
                     check_energy=True):
    """Machine-readable pass/fail verdicts over a run's time series."""
    div_u = max((r["div_u_L2"] for r in rows), default=0.0)
    rep = {
        "div_u_max": div_u,
        "div_u_pass": div_u <= div_u_ceiling,
    }
    if check_div_b:
        div_b = max((r["div_B_L2"] for r in rows), default=0.0)
        rep["div_B_max"] = div_b
        rep["div_B_pass"] = div_b <= div_b_ceiling
    if check_curl_a:
        curl_a = max((r["curl_A_L2"] for r in rows), default=0.0)
        rep["curl_A_max"] = curl_a
        rep["curl_A_pass"] = curl_a <= curl_a_ceiling
    if check_energy:
        viol = max((r["ekin_new"] - r["ekin_star"] for r in rows),
                   default=0.0)
        scale = max((abs(r["ekin_star"]) for r in rows), default=1.0)
        rep["projection_energy_violation"] = viol
        rep["projection_energy_pass"] = viol <= energy_slack * max(scale, 1.0)
    rep["pass"] = all(v for k, v in rep.items() if k.endswith("_pass"))
    return rep
