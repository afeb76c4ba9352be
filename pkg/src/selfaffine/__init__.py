"""Inhomogeneous self-affine sets: affinity dimension, attractor rasters,
box-count dimension estimates and numerical checks of the dimension bounds."""

from .linalg import AffineMap, compose, cover_bound, phi_s, singular_values
from .ifs import (
    IFS,
    BoundingBall,
    Circle,
    CondensationSet,
    PointCloud,
    Polygon,
    Segment,
    bounding_ball,
    compose_word,
    discretize,
    normalize,
    stopping_set,
)
from .affinity import affinity_estimate, pressure_sum, solve_sk
from .attractor import (
    RasterGrid,
    homogeneous_points,
    inhomogeneous_points,
    orbital_points,
    rasterize,
    target_raster,
)
from .boxdim import CountCurve, count_curve, estimate_dims
from .verify import (
    cosc_check_rect,
    kappa_condition,
    projection_measure_min,
    verify_sandwich,
)
from .config import RunConfig, load_config, parse_config, serialize

__version__ = "0.1.0"
