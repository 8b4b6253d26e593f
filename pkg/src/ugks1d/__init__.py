"""Asymptotic-preserving UGKS solver for 1D linear kinetic transport in
diffusive scaling, with reference solvers and an experiment harness."""

from .analysis import compare, convergence_study, restrict_profile
from .coeffs import FluxCoefficients, blend_parameter, flux_coefficients
from .config import compile_expression, load_config
from .errors import (ComparisonError, ConfigError, InvalidArgumentError,
                     InvalidDataError, InvalidKernelError, SolverFailureError, UGKSError)
from .experiments import ExperimentSpec, RunResult, builtin_ids, builtin_spec, run
from .grid import (MaterialField, SpatialMesh, VelocityQuadrature, average,
                   build_double_gauss, build_gauss_legendre, sample_material)
from .penalized import (PenalizedOperator, ScatteringKernel, assemble_operator,
                        homogeneous_stability_margin, penalization_theta,
                        penalized_step, pseudo_inverse_v)
from .reference import (ChandrasekharWeight, chandrasekhar_density, diffusion_run,
                        diffusion_step, diffusion_timestep, upwind_step, upwind_timestep)
from .ugks import (BoundarySpec, KineticState, SchemeConfig, boundary_fluxes_left,
                   boundary_fluxes_right, cfl_timestep, interface_density, macro_flux,
                   mc_slope, micro_flux, moment_defect, slopes, step)

__version__ = "0.1.0"
