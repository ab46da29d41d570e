"""Scalar Ollivier-Ricci curvature on random geometric graphs."""

from curvlab.curvature import (
    CurvatureReport,
    EdgeCurvature,
    NodeCurvature,
    compute_curvature,
    edge_error_profile,
    estimate_manifold_orc,
    orc_edge,
    scaled_sorc,
    sorc_node,
    src_node,
)
from curvlab.geometry import FlatTorus, Sphere, make_manifold, sample_uniform
from curvlab.rgg import (
    DiscreteMeasure,
    GeometricGraph,
    build_rgg,
    neighborhood_measure,
    preprocess_weights,
    truncated_shortest_paths,
)
from curvlab.transport import TransportProblem, w1_bruteforce, w1_exact

__version__ = "0.1.0"
