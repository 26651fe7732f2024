"""Meshfree RBF-FD solvers: oversampled least squares and collocation, with optional ghost points."""
from .assembly import GlobalOperator, ScalingSpec, assemble, eliminate_dirichlet, load_triplets, save_triplets
from .estimators import PoissonRBFFD, RBFFDInterpolator
from .exceptions import (
    AssemblyError,
    ConvergenceError,
    GeometryError,
    NodeGenerationError,
    ProblemError,
    RBFFDError,
    SingularStencilError,
    SolverError,
    StageError,
    StencilError,
)
from .geometry import BoundaryClass, Disk, PolarCurve2D, Spherical3D, make_domain
from .harness import ExperimentConfig, load_config, run_solve, run_spectrum, run_sweep
from .local_weights import IDENTITY, LAPLACIAN, LocalSystem, Operator, PhsBasis, stencil_weights
from .nodes import NodeSet, add_ghost_layer, generate_evaluation_set, generate_nodes, load_nodes, save_nodes
from .problems import make_problem
from .solver import stability_norm, stability_report

__version__ = "0.1.0"
