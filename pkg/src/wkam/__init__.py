"""Numerical weak KAM theory for random time-periodic Lagrangians on flat tori."""

__version__ = "0.1.0"

from .action import (ActionKernel, Curve, Propagator, action_kernel, action_to_target, extract_minimizer,
                     lax_step, refine_minimizer, semiconcavity_constant, superdifferential_momenta)
from .config import ExperimentConfig, load_config
from .critical import (CriticalValueEstimate, aubry_detect, alpha_closed_curves, alpha_ensemble,
                       alpha_subadditive, barrier_diagonal, closed_measure_defect, peierls_barrier)
from .errors import (ConfigurationError, DivergenceError, InternalError, InvalidInputError, InvalidStateError,
                     LegendreError, NondifferentiablePoint, TonelliViolation, WkamError)
from .lagrangian import HamiltonianView, LagrangianModel, eval_L, hamiltonian, validate_tonelli
from .minimizers import (BSet, MinimizerOrbit, b_set, calibration_of_orbit, launch_minimizer,
                         theta_flow_check, verify_global_minimizer)
from .omega import OmegaPoint, SkewProductSystem, sample_omega, theta
from .torus import SpaceGrid, TangentVector, TorusPoint, displacement, torus_distance, wrap
from .weak_kam import (WeakKamSolution, calibration_check, equivariance_check, lax_oleinik,
                       lipschitz_in_lambda_check, viscosity_check, weak_kam_solve)
