"""Representative functions of monotone operators and variational solvers for parabolic flows."""
from .convex import (Abs, AddQuadratic, GridSampled, IndicatorInterval, MoreauEnvelope, PiecewiseLinear,
                     PowerP, Quadratic, ScalarConvex, conjugate, fenchel_gap, moreau_smooth, prox)
from .flow import (BenProblem, SolveOptions, SolveReport, Trajectory, assemble_ben, discrete_dt,
                   implicit_euler_solve, minimize_ben, weighted_dt_identity_check)
from .graphs import MonotoneGraph, graph_membership, identity_graph, plateau_graph, sign_graph
from .models import (ConvectionField, DiffusionLaw, build_diffusion_problem, build_heat_problem,
                     build_stefan_problem, convection_form, kirchhoff_transform)
from .representation import (ParamMonotoneFamily, Representative, certify_representative,
                             elliptic_representative, fb_family, fenchel_representative,
                             fitzpatrick_eval, inf_convolution, semimono_representative,
                             shift_by_linear)
from .spaces import DiscreteSpace, lambda_solve, laplacian_apply, pairing_H
from .stability import (OperatorSequence, estimate_limit_integrand, graph_limit_check,
                        pairing_convergence_diagnostic, run_stability_experiment)

__all__ = ["Abs", "AddQuadratic", "GridSampled", "IndicatorInterval", "MoreauEnvelope", "PiecewiseLinear",
           "PowerP", "Quadratic", "ScalarConvex", "conjugate", "fenchel_gap", "moreau_smooth", "prox",
           "BenProblem", "SolveOptions", "SolveReport", "Trajectory", "assemble_ben", "discrete_dt",
           "implicit_euler_solve", "minimize_ben", "weighted_dt_identity_check", "MonotoneGraph",
           "graph_membership", "identity_graph", "plateau_graph", "sign_graph", "ConvectionField",
           "DiffusionLaw", "build_diffusion_problem", "build_heat_problem", "build_stefan_problem",
           "convection_form", "kirchhoff_transform", "ParamMonotoneFamily", "Representative",
           "certify_representative", "elliptic_representative", "fb_family", "fenchel_representative",
           "fitzpatrick_eval", "inf_convolution", "semimono_representative", "shift_by_linear",
           "DiscreteSpace", "lambda_solve", "laplacian_apply", "pairing_H", "OperatorSequence",
           "estimate_limit_integrand", "graph_limit_check", "pairing_convergence_diagnostic",
           "run_stability_experiment"]

__version__ = "0.1.0"
