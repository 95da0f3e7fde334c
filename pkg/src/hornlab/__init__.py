"""hornlab: numerical laboratory for singular horn-model geometry.

Product model spaces built from horns (half planes with the degenerate
metric ``4 dxi^2 + xi^6 dtheta^2``), hyperbolic planes and Euclidean
blocks, with their stratified metric completions.  The package computes
geodesics, discrete path flows and equivariant axes, classifies
isometries by translation length, probes axis divergence and properness
of group actions, and verifies the asymptotic cometric scalings of the
degenerating-annulus model by quadrature.
"""

__version__ = "0.1.0"

from . import actions, asymptotics, geometry, paths  # noqa: F401
from .geometry import (  # noqa: F401
    BOUNDARY,
    CompletionPoint,
    Euclidean,
    Horn,
    HyperbolicPlane,
    PerturbedHorn,
    SpaceSpec,
    TangentVector,
    distance,
    geodesic_connect,
    geodesic_shoot,
    make_point,
    midpoint,
)
