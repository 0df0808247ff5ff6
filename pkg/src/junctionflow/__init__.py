"""Godunov solvers and verification harness for a 1:1 junction.

Hamilton-Jacobi equations and scalar conservation laws coupled at one
vertex with convex branch fluxes: coupling rules and their effective flux
limiter, the stationary germ and its algebra, paired explicit schemes tied
by an exact discrete-gradient identity, entropy and one-sided estimates as
stored-trajectory audits, and exact Riemann / variational oracles.
"""

__version__ = "0.1.0"

from .errors import AuditError, CflError, ConfigError, InternalError
from .fluxes import (Box, ConvexFlux, envelope, entropy_flux, godunov_flux,
                     godunov_gradient, inverse_branch, legendre,
                     make_quadratic_flux, make_skewed_flux)
from .germs import (ConcaveFlux, GeneralCoupling, LimitedCoupling,
                    MultiBranchJunction, as_general, dissipation_counterexample,
                    dissipation_gap, eval_coupling, flux_limiter,
                    generating_set, germ_contains, germ_from_generators,
                    godunov_coupling, halfline_germ_contains,
                    make_concave_quadratic, maximality_witness,
                    multibranch_dissipation_gap, multibranch_germ_contains,
                    sample_germ, validate_coupling)
from .grid import CflReport, Grid1D, auto_dt, check_cfl_hj, check_cfl_scl
from .hj import HJProblem, hj_solve, hj_step, lax_oleinik_oracle, sample_u
from .pairing import (convergence_study, effective_limiter_experiment,
                      riemann_oracle, run_pair, solve_riemann)
from .scl import (SCLProblem, discrete_gradient_ode_check, entropy_residual,
                  extract_traces, germ_distance, oleinik_check, scl_solve,
                  scl_step, tv_check)
