"""Keller-Segel-Stokes system with saturated chemotactic sensitivity on a MAC grid.

The solver advances cell density ``n``, signal ``c`` and Stokes velocity ``u`` with
conservative explicit steps, and records the functionals that boundedness arguments
for this system control (masses, L^p norms, ``int |grad n^(p/2)|^2``, the
sliding-window dissipation functional).
"""
from .diagnostics import (BlowupVerdict, DiagnosticsConfig, DiagnosticsRecord, blowup_verdict,
                          compute_tau, grad_np2_sq, sliding_I, testing_identity_residual, w1p_proxy_c)
from .fields import (Grid, ScalarField, VectorField, divergence, gradient, integrate, laplacian,
                     lp_norm, read_snapshot, write_snapshot)
from .model import (Bump, ForcingSpec, InitialData, ModelParams, ScalarInit, VelocityInit,
                    build_initial_state, eval_forcing, eval_phi_gradient, sensitivity)
from .odelemma import OdeBoundProblem, OdeBoundResult, lemma1_bound, verify_bound, verify_lemma1
from .poisson import PoissonSolveParams, project_divergence_free, solve_poisson_neumann
from .state import SimState
from .stokes import StokesStepReport, stokes_step
from .transport import StepControl, StepReport, advance, cfl_dt, step_c, step_n

__version__ = "0.1.0"
