"""Model geometry: spaces, tensors, geodesics."""

from .connect import (
    PathBundle,
    curve_shortening_connect,
    distance,
    factor_distances,
    geodesic_connect,
    lower_bound_distance,
    metric_batch,
    midpoint,
    point_along,
    shooting_connect,
    upper_bound_distance,
)
from .shoot import GeodesicSegment, acceleration_fn, clairaut_series, geodesic_shoot, speed_at
from .spaces import (
    BOUNDARY,
    XI_SNAP,
    BoundaryPoint,
    CompletionPoint,
    Euclidean,
    FactorSpec,
    Horn,
    HornPoint,
    HyperbolicPlane,
    PerturbedHorn,
    SpaceSpec,
    TangentVector,
    chart_vector,
    is_horn_like,
    make_point,
    point_from_chart,
    point_from_json,
    point_key,
    point_to_json,
    points_equal,
    space_from_json,
    space_to_json,
    tangent_chart_vector,
    tangent_from_chart,
)
from .tensors import (
    WarpProfile,
    christoffel,
    curvature,
    metric_at_chart,
    metric_tensor,
    warp_profile,
)

__all__ = [
    "BOUNDARY",
    "BoundaryPoint",
    "CompletionPoint",
    "Euclidean",
    "FactorSpec",
    "GeodesicSegment",
    "Horn",
    "HornPoint",
    "HyperbolicPlane",
    "PathBundle",
    "PerturbedHorn",
    "SpaceSpec",
    "TangentVector",
    "WarpProfile",
    "XI_SNAP",
    "acceleration_fn",
    "chart_vector",
    "christoffel",
    "clairaut_series",
    "curvature",
    "curve_shortening_connect",
    "distance",
    "factor_distances",
    "geodesic_connect",
    "geodesic_shoot",
    "is_horn_like",
    "lower_bound_distance",
    "metric_batch",
    "make_point",
    "metric_at_chart",
    "metric_tensor",
    "midpoint",
    "point_along",
    "point_from_chart",
    "point_from_json",
    "point_key",
    "point_to_json",
    "points_equal",
    "shooting_connect",
    "upper_bound_distance",
    "space_from_json",
    "space_to_json",
    "speed_at",
    "tangent_chart_vector",
    "tangent_from_chart",
    "warp_profile",
]
