"""Piecewise-smooth flows with hidden nonlinear switching terms.

Modules
-------
expressions  parsed scalar expressions with exact derivatives
system       switching systems ``(f_plus, f_minus, h, G)``
sliding      sliding roots, region labels, branch tracking
integrator   hybrid, smooth and blow-up integration
regularize   transition functions, regularizations, slow-fast structure
pinch        pinched systems and their completions
"""

from .errors import (
    ConfigError, DegenerateGradientError, DerivativeError, DomainError, ExpressionError, HiddenDynamicsError,
    HypothesisError, IntegrationError, ModelError, OffManifoldError, ParseError, PreconditionError,
    UnboundVariableError,
)
from .expressions import Expression, ScalarFunction, differentiate, evaluate, parse, substitute, to_string
from .integrator import (
    IntegratorOptions, Trajectory, integrate_blowup, integrate_hybrid, integrate_smooth, layer_rule,
)
from .pinch import (
    CompletionReport, PinchedSystem, SmoothSystem, complete_extrinsic, complete_intrinsic, extrinsic_pinch,
    intrinsic_pinch, kappa_coefficients, manifold_dynamics, verify_completion,
)
from .regularize import (
    RegularizedSystem, TransitionFunction, builtin_transition, conjugacy_H, G_to_psi, layer_problem,
    phi_regularize, psi_regularize, psi_to_G, reduced_problem, slow_manifold_distance,
)
from .sliding import (
    LinearRegion, Region, SlidingBranch, SlidingRoot, branch_continuation, classify_point, linear_sliding_lambda,
    normal_hyperbolicity, sliding_field, sliding_set,
)
from .system import PointOnSigma, SwitchingSystem, eval_field, grad_h, normal_component, validate

__version__ = "0.1.0"
