"""Exact simulation of the Bruhat-Tits building of SL3(Q_p) and random walks on it."""

from .building import (
    BuildingVertex,
    Flag,
    GermChamber,
    act,
    adapted_basis,
    apartment_frame,
    attracting_flag,
    cartan_flag,
    cartan_type,
    flag_distance,
    flag_mod_p,
    germ_project,
    opposite,
    retraction_coordinate,
    sector_membership,
    standard_flag,
    standard_vertex,
    weyl_distance,
)
from .errors import BuildingError
from .padic import hermite_canonical, iwasawa_decompose, minor_valuations, smith_decompose
from .tree import (
    TreeEnd,
    TreePoint,
    TreeVertex,
    bary_ends,
    beta_eps,
    chamber_end_bijection,
    end_metric,
    end_to_chamber,
    gromov_product,
    measure_pushforward,
    project_to_tree,
    tree_distance,
)
from .walk import (
    EstimateReport,
    MeasureSpec,
    NotConverged,
    TrajectoryRecord,
    germ_stabilization,
    limit_flag,
    lyapunov_estimate,
    opposition_rate,
    sample_path,
    stationarity_residual,
    tracking_deviation,
)
from .weyl import (
    TypeVector,
    WeylElement,
    dominance_project,
    opposition_involution,
    regularity_diagnostics,
    root_pairings,
    separation_constant,
)

__version__ = "0.1.0"

__all__ = [
    "BuildingVertex",
    "Flag",
    "GermChamber",
    "act",
    "adapted_basis",
    "apartment_frame",
    "attracting_flag",
    "cartan_flag",
    "cartan_type",
    "flag_distance",
    "flag_mod_p",
    "germ_project",
    "opposite",
    "retraction_coordinate",
    "sector_membership",
    "standard_flag",
    "standard_vertex",
    "weyl_distance",
    "BuildingError",
    "hermite_canonical",
    "iwasawa_decompose",
    "minor_valuations",
    "smith_decompose",
    "TreeEnd",
    "TreePoint",
    "TreeVertex",
    "bary_ends",
    "beta_eps",
    "chamber_end_bijection",
    "end_metric",
    "end_to_chamber",
    "gromov_product",
    "measure_pushforward",
    "project_to_tree",
    "tree_distance",
    "EstimateReport",
    "MeasureSpec",
    "NotConverged",
    "TrajectoryRecord",
    "germ_stabilization",
    "limit_flag",
    "lyapunov_estimate",
    "opposition_rate",
    "sample_path",
    "stationarity_residual",
    "tracking_deviation",
    "TypeVector",
    "WeylElement",
    "dominance_project",
    "opposition_involution",
    "regularity_diagnostics",
    "root_pairings",
    "separation_constant",
]
