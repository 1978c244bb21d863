"""Two-variable maps with a prescribed Baire-one diagonal.

Given continuous witnesses ``g_n -> g``, build ``f(x, y)`` with
``f(x, x) = g(x)`` that is separately continuous (CC), Lipschitz in ``y``
(CL) or continuously differentiable in ``y`` (CD), and probe those
properties numerically.
"""

from .errors import (
    BuildError,
    ExprEvalError,
    ExprSyntaxError,
    GaugeError,
    InputError,
    NotApplicable,
    SepdiagError,
    UnresolvablePointError,
)
from .extension import (
    EvalOutcome,
    ExtensionEvaluator,
    build_cc,
    build_cd,
    build_cl,
    cd_telescoping_eval,
    overlap_identity_check,
)
from .sandwich import cc_system, cd_system, cl_system, lipschitz_gauge_from_open_cover
from .spaces import CHEBYSHEV, EUCLIDEAN, Box, Equiconnector, Metric, circle_equiconnector, distance, linear_equiconnector
from .witnesses import ContinuousFn, WitnessSequence, parse_expression, ramp_witnesses, stabilization_probe

__version__ = "0.1.0"
