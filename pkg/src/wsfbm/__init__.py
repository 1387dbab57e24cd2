"""Weighted sub-fractional Brownian motion toolkit.

Covariance kernels (quadrature and closed-form routes), Gaussian path
simulation for the base / Ornstein-Uhlenbeck / geometric processes,
d-dimensional kernel generalizations, maximum-likelihood inference with
profile-deviance intervals, and a Gram-assembly benchmark harness.
"""

__version__ = "0.1.0"

from .kernels import (  # noqa: F401
    ConstantWeight, ExponentialWeight, GramMatrix, KernelSpec, PowerLawWeight,
    TimeGrid, continuity_gap, gram, kernel_eval_closed, kernel_eval_quad,
    memory_limits, nu_cov,
)
from .processes import (  # noqa: F401
    GeomSpec, OUSpec, PathSample, geometric_sample, ou_drift_estimators,
    ou_gram, ou_sample, sample_paths,
)
from .inference import (  # noqa: F401
    Dataset, FitResult, aic, fit_mle, loglik, mse, predict, profile_ci,
)
from .quadrature import QuadConfig, QuadResult, integrate_1d, integrate_2d  # noqa: F401
