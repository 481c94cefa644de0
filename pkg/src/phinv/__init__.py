"""phi-functions of matrices, their reciprocals psi, and inverse problems built on them."""

from .exceptions import *  # noqa: F401,F403
from .estimators import NewtonPsiInverter, PhiFunction, Psi1Approximant, Psi2Solver
from .experiments import (ExperimentResult, baseline_comparison, error_surface,
                          table1_experiment, tnew_experiment)
from .inverse import (HeatDiscretization, NonlocalProblem, SolverConfig, TwoPointProblem,
                      heat_inverse_experiment, solve_nonlocal, solve_two_point)
from .krylov import (GmresConfig, SolveReport, arnoldi_psi2_baseline, gmres,
                     gmres_bound_check, psi2_apply, spectral_map_rho)
from .linalg import arnoldi, spectral_radius_estimate, spectrum_info, strip_check
from .mmio import read_matrix, read_vector, write_matrix, write_vector
from .newton import (NewtonConfig, NewtonReport, convergence_precheck, newton_invert,
                     psi_dense, psi_inverse_chain)
from .phi import (PhiEvalConfig, phi_action, phi_integral_oracle, phi_matrices, phi_matrix,
                  phi_recurrence_lift, phi_scalar)
from .psi1 import (RationalApproxParams, ShiftedSolveWorkspace, bernoulli_numbers, f_n_eval,
                   psi1_apply, psi1_scalar, psi1_squaring_scalar, r_nm_matrix, r_nm_scalar,
                   shifted_solve_batch)
from .testmatrices import TestMatrixSpec, build_matrix, itnew2_roots

__version__ = "0.1.0"
