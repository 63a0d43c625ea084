"""Bridge (Schrodinger) discretizations of Wasserstein gradient flows, on particles and on Gaussians."""

from .cloud import MixtureSpec, ParticleCloud, bimodal_spec, sample_exact_heat, sample_mixture
from .gaussian import Coupling2x2, Functional, GaussianState, Variant
from .scheme import FlowTrajectory, SchemeConfig, StabilityError, StepFailure, run_scheme
from .sinkhorn import SinkhornError, SinkhornSolution, solve_symmetric

__version__ = "0.1.0"

__all__ = [
    "Coupling2x2",
    "FlowTrajectory",
    "Functional",
    "GaussianState",
    "MixtureSpec",
    "ParticleCloud",
    "SchemeConfig",
    "SinkhornError",
    "SinkhornSolution",
    "StabilityError",
    "StepFailure",
    "Variant",
    "bimodal_spec",
    "run_scheme",
    "sample_exact_heat",
    "sample_mixture",
    "solve_symmetric",
]
