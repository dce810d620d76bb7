"""Polygonal approximation of sets of finite perimeter inside a container."""

__version__ = "0.1.0"

from .boundary import CommonBoundary, classify_boundary, common_boundary, relative_perimeter
from .errors import PerimetryError
from .geometry import PolygonalSet, Universe, area, make_polygon_set, perimeter
from .pushout import PushoutTrace, remove_common_boundary
from .smooth import GridField, approximate_in_container, mollify
from .verify import ApproxReport, boundary_limit_check, check_clauses
from .weighted import approximate_weighted, parse_density, weighted_area, weighted_perimeter

__all__ = [
    "ApproxReport",
    "CommonBoundary",
    "GridField",
    "PerimetryError",
    "PolygonalSet",
    "PushoutTrace",
    "Universe",
    "approximate_in_container",
    "approximate_weighted",
    "area",
    "boundary_limit_check",
    "check_clauses",
    "classify_boundary",
    "common_boundary",
    "make_polygon_set",
    "mollify",
    "parse_density",
    "perimeter",
    "relative_perimeter",
    "remove_common_boundary",
    "weighted_area",
    "weighted_perimeter",
]
