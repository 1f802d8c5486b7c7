"""Monte Carlo toolkit for the parabolic Anderson model on hyperbolic space.

Subpackages by concern:

* :mod:`hyperpam.geometry`   hyperboloid-model primitives
* :mod:`hyperpam.heatkernel` heat kernels, radial laws, ball eigenvalues
* :mod:`hyperpam.brownian`   hyperbolic Brownian path sampling + diagnostics
* :mod:`hyperpam.covariance` radial covariance profiles and positivity checks
* :mod:`hyperpam.moments`    Feynman-Kac second-moment estimators
* :mod:`hyperpam.cli`        batch experiment runner and validation driver
"""

from .brownian import BrownianPath, SamplerConfig, sample_pair, sample_path
from .covariance import CovarianceModel, lower_incomplete_gamma, phi_alpha, psd_check, psi
from .geometry import HPoint, TangentVec, angle_at, cone_sets, distance, exp_map, \
    log_map, minkowski_product, origin, triangle_deficit, uniform_sphere_direction
from .heatkernel import RadialLaw, dirichlet_eigenvalue, exit_tail_estimate, \
    hk_envelope, hk_exact_d3, sample_radial_exact_d3
from .moments import GrowthFit, MomentEstimate, PhaseRow, dyson_partial, \
    euclidean_second_moment, fk_second_moment, growth_fit, jensen_lower, \
    lambda_constant

__version__ = "0.1.0"

__all__ = [
    "BrownianPath", "SamplerConfig", "sample_pair", "sample_path",
    "CovarianceModel", "lower_incomplete_gamma", "phi_alpha", "psd_check", "psi",
    "HPoint", "TangentVec", "angle_at", "cone_sets", "distance", "exp_map",
    "log_map", "minkowski_product", "origin", "triangle_deficit",
    "uniform_sphere_direction",
    "RadialLaw", "dirichlet_eigenvalue", "exit_tail_estimate", "hk_envelope",
    "hk_exact_d3", "sample_radial_exact_d3",
    "GrowthFit", "MomentEstimate", "PhaseRow", "dyson_partial",
    "euclidean_second_moment", "fk_second_moment", "growth_fit", "jensen_lower",
    "lambda_constant",
    "__version__",
]
