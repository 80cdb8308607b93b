"""Numerical verification of classical Riemann zeta-function identities.

The package evaluates both sides of a family of exact identities (Mellin
moments of fractional-part convolutions, Muntz-type formulas, a Laplace
asymptotic expansion, Jacobi theta integrals) with controlled-accuracy
quadrature and reports the discrepancies.
"""

from .special_functions import (
    AccuracyError,
    AccuracySpec,
    DEFAULT_ACCURACY,
    EULER_GAMMA,
    LOG_TWO_PI,
    PI,
    frac,
    gamma,
    jacobi_theta,
    theta_sum,
    zeta,
)
from .quadrature import (
    QuadResult,
    TailModelError,
    integrate_finite,
    integrate_semi_infinite,
    integrate_vertical_line,
)
from .phi import PhiEvaluator, build, phi_leading, phi_growth_ratio
from .identities import (
    GAUSSIAN_KERNEL,
    IdentityCheck,
    MellinKernel,
    UNIT_INTERVAL_KERNEL,
    check_classical,
    check_gaussian_parseval,
    check_laplace_expansion,
    check_mellin_convolution,
    check_muntz_gaussian,
    check_phi_mellin,
    check_phi_parseval,
    check_theta_functional,
    check_theta_moment,
    muntz_apply,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "AccuracySpec",
    "DEFAULT_ACCURACY",
    "EULER_GAMMA",
    "LOG_TWO_PI",
    "PI",
    "frac",
    "gamma",
    "jacobi_theta",
    "theta_sum",
    "zeta",
    "QuadResult",
    "TailModelError",
    "integrate_finite",
    "integrate_semi_infinite",
    "integrate_vertical_line",
    "PhiEvaluator",
    "build",
    "phi_leading",
    "phi_growth_ratio",
    "GAUSSIAN_KERNEL",
    "UNIT_INTERVAL_KERNEL",
    "IdentityCheck",
    "MellinKernel",
    "check_classical",
    "check_gaussian_parseval",
    "check_laplace_expansion",
    "check_mellin_convolution",
    "check_muntz_gaussian",
    "check_phi_mellin",
    "check_phi_parseval",
    "check_theta_functional",
    "check_theta_moment",
    "muntz_apply",
]
