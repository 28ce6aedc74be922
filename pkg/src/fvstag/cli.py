"""Command-line front end: run benchmarks, convergence and AP studies,
generate meshes and verify the discrete operator identities."""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import bench, mesh as meshmod, models, operators as ops, vtk_io
from .linsolve import SolverError
from .models import ConfigError, StepError


@dataclass
class RunConfig:
    case: str = "taylor-green"
    model: str = None
    nx: int = 20
    ny: int = None
    cfl: float = 0.9
    t_end: float = None
    c0: float = None
    mu: float = None
    cs: float = None
    viscosity_mode: str = None
    cg_tol: float = None
    cg_max_iter: int = None
    jitter: float = 0.0
    seed: int = 0
    mesh_file: str = None
    outdir: str = "out"
    write_every: int = 0
    deterministic: bool = False
    dt_max: float = None

    _POSITIVE = ("nx", "ny", "cfl", "c0", "cs", "cg_tol", "cg_max_iter",
                 "dt_max")
    _NONNEG = ("t_end", "mu", "jitter", "seed", "write_every")

    def validate(self):
        for name in self._POSITIVE:
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive, got {v}")
        for name in self._NONNEG:
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ConfigError(f"{name} must be non-negative, got {v}")
        if self.case not in bench.CASE_NAMES:
            raise ConfigError(f"unknown case {self.case!r}")
        if self.model is not None and self.model not in models.MODELS:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.viscosity_mode is not None and \
                self.viscosity_mode not in ("none", "explicit", "implicit"):
            raise ConfigError(
                f"unknown viscosity_mode {self.viscosity_mode!r}")


def load_config_file(path):
    """Read a plain key=value file; '#' starts a comment."""
    known = {f.name for f in dataclasses.fields(RunConfig)}
    out = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = val
    return out


def _coerce(cfg_field, text):
    if cfg_field.type in ("int", int):
        return int(text)
    if cfg_field.type in ("float", float):
        return float(text)
    if cfg_field.type in ("bool", bool):
        return text.lower() in ("1", "true", "yes", "on")
    return text


def build_config(args):
    """Defaults <- config file <- command-line flags (flags win)."""
    cfg = RunConfig()
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    if getattr(args, "config", None):
        for key, text in load_config_file(args.config).items():
            setattr(cfg, key, _coerce(fields[key], text))
    for key in fields:
        v = getattr(args, key, None)
        if v is not None:
            setattr(cfg, key, v)
    cfg.validate()
    return cfg


def echo_config(cfg, path):
    with open(path, "w") as out:
        for f in dataclasses.fields(RunConfig):
            if f.name.startswith("_"):
                continue
            out.write(f"{f.name} = {getattr(cfg, f.name)}\n")


def _make_case(cfg):
    overrides = {}
    for key in ("cfl", "c0", "mu", "cs", "viscosity_mode", "cg_tol",
                "cg_max_iter", "dt_max"):
        v = getattr(cfg, key)
        if v is not None:
            overrides[key] = v
    case = bench.make_case(cfg.case, model=cfg.model, **overrides)
    if cfg.t_end is not None:
        case.t_end = cfg.t_end
    return case


def _get_mesh(cfg, case):
    if cfg.mesh_file:
        return meshmod.read_mesh(cfg.mesh_file)
    return bench.build_mesh(case, cfg.nx, cfg.ny, jitter=cfg.jitter,
                            seed=cfg.seed)


def cmd_run(args):
    cfg = build_config(args)
    case = _make_case(cfg)
    mesh = _get_mesh(cfg, case)
    os.makedirs(cfg.outdir, exist_ok=True)
    echo_config(cfg, os.path.join(cfg.outdir, "config.txt"))

    snaps = []

    def on_step(state, diag):
        step = state.step
        if cfg.write_every and (diag is None or step % cfg.write_every == 0):
            path = os.path.join(cfg.outdir, f"fields_{step:06d}.vtk")
            vtk_io.write_vtk(mesh, state, path, case.params, case.model)
            snaps.append(path)

    res = bench.run_case(case, mesh, on_step=on_step)
    if cfg.write_every == 0 or not snaps or \
            not snaps[-1].endswith(f"{res.state.step:06d}.vtk"):
        vtk_io.write_vtk(mesh, res.state,
                         os.path.join(cfg.outdir,
                                      f"fields_{res.state.step:06d}.vtk"),
                         case.params, case.model)
    vtk_io.write_timeseries(os.path.join(cfg.outdir, "timeseries.csv"),
                            res.rows)

    lines = [f"case = {cfg.case}", f"model = {case.model}",
             f"steps = {res.state.step}", f"t_final = {res.state.t:.16g}",
             f"total_cg_iters = {res.total_cg_iters}"]
    for key in ("div_u_L2", "div_B_L2", "curl_A_L2"):
        if any(key in r for r in res.rows):
            lines.append("max_%s = %.6e" % (key,
                                            max(r[key] for r in res.rows)))
    if res.errors:
        for k, v in res.errors.items():
            lines.append("%s = %.6e" % (k, v))
    summary = "\n".join(lines) + "\n"
    with open(os.path.join(cfg.outdir, "summary.txt"), "w") as out:
        out.write(summary)
    sys.stdout.write(summary)
    return 0


def cmd_convergence(args):
    cfg = build_config(args)
    case = _make_case(cfg)
    nx_list = [int(s) for s in args.nx_list.split(",")]
    rows = bench.convergence_study(case, nx_list, jitter=cfg.jitter,
                                   seed=cfg.seed)
    keys = [k for k in rows[0] if k != "nx"]
    print("nx  " + "  ".join(f"{k:>12s}" for k in keys))
    for r in rows:
        print(f"{r['nx']:<4d}" + "  ".join(f"{r[k]:12.4e}" for k in keys))
    return 0


def cmd_ap_sweep(args):
    cfg = build_config(args)
    c0_list = [float(s) for s in args.c0_list.split(",")]
    res = bench.ap_sweep(cfg.nx, c0_list, jitter=cfg.jitter, seed=cfg.seed)
    print("c0      ||div u||_L2    table stat")
    for c0, d, tab in zip(res["c0"], res["div_u_L2"], res["div_m_table"]):
        print(f"{c0:<8g}{d:<15.4e}{tab:.4e}")
    print(f"log-log slope = {res['slope']:.3f}")
    return 0


def cmd_mesh(args):
    cfg = build_config(args)
    case = _make_case(cfg)
    mesh = bench.build_mesh(case, cfg.nx, cfg.ny, jitter=cfg.jitter,
                            seed=cfg.seed)
    meshmod.write_mesh(mesh, args.out)
    checks = meshmod.validate_geometry(mesh)
    print(f"wrote {args.out}: {mesh.num_nodes} nodes, "
          f"{mesh.num_cells} triangles")
    for k, v in checks.items():
        print(f"  {k} = {v:.3e}")
    return 0


def cmd_verify_operators(args):
    cfg = build_config(args)
    case = _make_case(cfg)
    mesh = bench.build_mesh(case, cfg.nx, cfg.ny, jitter=cfg.jitter,
                            seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    phi = mesh.broadcast_nodal(rng.standard_normal(mesh.num_nodes))
    j = mesh.broadcast_nodal(rng.standard_normal((mesh.num_nodes, 3)))
    curl_grad = ops.curl_dual(ops.gradient_primal(phi, mesh), mesh)
    div_curl = ops.divergence_dual(ops.curl_primal(j, mesh), mesh)
    v = rng.standard_normal((mesh.num_cells, 3))
    v[:, 2] = 0.0
    g = ops.gradient_primal(phi, mesh)
    sbp = float(np.sum(mesh.cell_area * np.sum(g * v, axis=1))
                + np.sum(mesh.node_weight * phi
                         * ops.divergence_dual(v, mesh)))
    ok = True
    for name, val in (("max |curl grad phi|", np.abs(curl_grad).max()),
                      ("max |div curl J|", np.abs(div_curl).max()),
                      ("summation-by-parts residual", abs(sbp))):
        passed = val < 1e-10
        ok &= passed
        print(f"{name:<30s}{val:.3e}  {'PASS' if passed else 'FAIL'}")
    return 0 if ok else 1


def _add_common(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--case", choices=bench.CASE_NAMES)
    p.add_argument("--model", choices=models.MODELS)
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--cfl", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--c0", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--cs", type=float)
    p.add_argument("--viscosity-mode", dest="viscosity_mode",
                   choices=("none", "explicit", "implicit"))
    p.add_argument("--cg-tol", dest="cg_tol", type=float)
    p.add_argument("--cg-max-iter", dest="cg_max_iter", type=int)
    p.add_argument("--jitter", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--dt-max", dest="dt_max", type=float)
    p.add_argument("--deterministic", action="store_true", default=None)


def make_parser():
    parser = argparse.ArgumentParser(
        prog="fvstag",
        description="staggered semi-implicit finite volume solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a benchmark case")
    _add_common(p)
    p.add_argument("--mesh", dest="mesh_file", help="mesh file to load")
    p.add_argument("--outdir")
    p.add_argument("--write-every", dest="write_every", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("convergence", help="mesh refinement study")
    _add_common(p)
    p.add_argument("--nx-list", default="20,40", help="comma-separated")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("ap-sweep", help="div u versus sound speed")
    _add_common(p)
    p.add_argument("--c0-list", default="10,100", help="comma-separated")
    p.set_defaults(func=cmd_ap_sweep)

    p = sub.add_parser("mesh", help="generate and write a mesh file")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("verify-operators", help="check discrete identities")
    _add_common(p)
    p.set_defaults(func=cmd_verify_operators)
    return parser


def main(argv=None):
    threads = os.environ.get("FVSTAG_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, StepError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
