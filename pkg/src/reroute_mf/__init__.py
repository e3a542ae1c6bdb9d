"""Mean-field models of rerouting in finite-capacity networks.

Submodules:
    core        state spaces, probability vectors, parameters, RNG streams
    nsim        exact N-node stochastic simulators and the pathwise coupling
    mfode       mean-field ODE right-hand sides and an adaptive integrator
    equilibria  fixed-point solvers and regime classification
    stability   spectral gaps, stability criteria and linearized probes
    cli         command-line front end (``reroute-mf``)
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    UNBOUNDED,
    DarParams,
    NlMm1Model,
    ProbVec,
    RistParams,
    RistStateSpace,
    RngStream,
    enumerate_rist_space,
    total_variation,
    weighted_l2_sq,
)
from .trajectory import Trajectory  # noqa: E402

__all__ = [
    "__version__",
    "UNBOUNDED",
    "DarParams",
    "NlMm1Model",
    "ProbVec",
    "RistParams",
    "RistStateSpace",
    "RngStream",
    "Trajectory",
    "enumerate_rist_space",
    "total_variation",
    "weighted_l2_sq",
]
