"""Structure-preserving semi-implicit finite volume schemes on staggered
triangular meshes: incompressible / weakly compressible Euler and
Navier-Stokes, incompressible MHD and the incompressible GPR model."""

from .mesh import Mesh, MeshError, generate_structured_triangulation, \
    read_mesh, validate_geometry, write_mesh
from .linsolve import CGReport, SolverError, conjugate_gradient
from .models import ConfigError, ModelParams, ModelState, StepError, \
    MODELS, diagnostics, step
from .bench import CASE_NAMES, CaseSpec, RunResult, convergence_study, \
    make_case, run_case
from .vtk_io import write_timeseries, write_vtk

__version__ = "1.0.0"

__all__ = [
    "Mesh", "MeshError", "generate_structured_triangulation", "read_mesh",
    "validate_geometry", "write_mesh", "CGReport", "SolverError",
    "conjugate_gradient", "ConfigError", "ModelParams", "ModelState",
    "StepError", "MODELS", "diagnostics", "step", "CASE_NAMES", "CaseSpec",
    "RunResult", "convergence_study", "make_case", "run_case",
    "write_timeseries", "write_vtk", "__version__",
]
