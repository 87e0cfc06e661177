"""Kernel collocation solvers for nonlinear PDEs and inverse problems."""

from .kernels import DerivativeOp, KernelSpec, eval_bilinear, eval_kernel
from .functionals import (
    Box,
    CollocationSet,
    FunctionalVector,
    build_functionals,
    grid_collocation,
    sample_collocation,
)
from .gram import GramSystem, adaptive_nugget, assemble_theta, factorize, standard_nugget
from .solver import (
    DivergenceError,
    EliminatedSystem,
    GNConfig,
    RelaxedSystem,
    SolutionRepresentation,
    gauss_newton_eliminated,
    gauss_newton_ip,
    gauss_newton_relaxed,
)
from .problems import (
    DarcyIPSpec,
    ProblemSpec,
    burgers_spec,
    darcy_ip_spec,
    eikonal_spec,
    elliptic_spec,
)
from .reference import (
    ReferenceGrid,
    burgers_cole_hopf,
    darcy_forward_fd,
    eikonal_reference,
    error_metrics,
    fd_poisson,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
