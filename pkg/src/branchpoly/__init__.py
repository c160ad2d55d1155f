"""Polygonal linearization of branch apparent-power limits for linear OPF."""

from .halfplanes import ConstraintSet, HalfPlane, contains, polygon_to_constraints
from .polygeom import (
    ChordSpec,
    CircleLimit,
    DomainError,
    Polygon,
    build_irregular,
    build_regular,
    irregular_quadrant_count,
    regular_side_count,
)

__all__ = [
    "ChordSpec", "CircleLimit", "ConstraintSet", "DomainError", "HalfPlane", "Polygon",
    "build_irregular", "build_regular", "contains", "irregular_quadrant_count",
    "polygon_to_constraints", "regular_side_count",
]
__version__ = "0.1.0"
