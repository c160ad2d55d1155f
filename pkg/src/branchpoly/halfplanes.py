"""Half-plane constraint sets generated from inscribed polygons.

Each polygon side becomes one inequality ``a*p + b*q + c >= 0`` with a unit
normal ``(a, b)`` pointing into the polygon, so ``c`` is the distance from
the origin to the side.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

from .polygeom import CircleLimit, DomainError, Kind, Point, Polygon, side_count


class DegenerateSideError(DomainError):
    """Raised when a side's two endpoints coincide."""


@dataclass(frozen=True)
class HalfPlane:
    a: float
    b: float
    c: float

    def value(self, p: float, q: float) -> float:
        return self.a * p + self.b * q + self.c


@dataclass(frozen=True)
class ConstraintSet:
    branch: Hashable
    limit: CircleLimit
    halfplanes: tuple[HalfPlane, ...]

    def __len__(self) -> int:
        return len(self.halfplanes)


def side_to_halfplane(
    v1: Point, v2: Point, limit: CircleLimit, interior: Point | None = None
) -> HalfPlane:
    """Half-plane bounded by the line through ``v1`` and ``v2`` that holds the origin.

    For a side through the centre (a diameter) the origin does not pick a
    side; ``interior`` then decides, defaulting to the left of ``v1 -> v2``.
    """
    s = limit.s
    for v in (v1, v2):
        # loose on purpose: callers may pass vertices rounded for display
        if abs(math.hypot(v[0], v[1]) - s) > 1e-3 * s:
            raise DomainError(f"vertex {v} is not on the circle of radius {s:g}")
    dx, dy = v2[0] - v1[0], v2[1] - v1[1]
    norm = math.hypot(dx, dy)
    if norm <= 1e-12 * s:
        raise DegenerateSideError(f"coincident vertices {v1} and {v2}")
    a, b = -dy / norm, dx / norm
    c = -(a * v1[0] + b * v1[1])
    if abs(c) <= 1e-12 * s:
        c = 0.0
        if interior is not None and a * interior[0] + b * interior[1] < 0:
            a, b = -a, -b
    elif c < 0:
        a, b, c = -a, -b, -c
    # a, b are zero-signed so a diameter along the P axis reports (0, +-1, 0)
    return HalfPlane(a + 0.0, b + 0.0, c)


def polygon_to_constraints(poly: Polygon, branch: Hashable = None) -> ConstraintSet:
    verts = poly.vertices
    n = len(verts)
    halfplanes = []
    for k, (v1, v2) in enumerate(poly.edges()):
        others = [verts[j] for j in range(n) if j not in (k, (k + 1) % n)]
        interior = None
        if others:
            interior = (
                sum(v[0] for v in others) / len(others),
                sum(v[1] for v in others) / len(others),
            )
        halfplanes.append(side_to_halfplane(v1, v2, poly.limit, interior))
    if branch is None:
        branch = poly.limit.index
    return ConstraintSet(branch=branch, limit=poly.limit, halfplanes=tuple(halfplanes))


def contains(cs: ConstraintSet, p: float, q: float) -> bool:
    tol = -1e-9 * cs.limit.s
    return all(h.value(p, q) >= tol for h in cs.halfplanes)


def alpha_region_check(
    points: Iterable[Point], limit: CircleLimit, alpha: float
) -> list[bool]:
    """Flag flow points inside the wedge of half-angle ``alpha`` around the Q axis.

    Points are normalized by the rating first; ``alpha`` is in radians.
    """
    if not (0 <= alpha < math.pi / 2):
        raise DomainError(f"alpha must lie in [0, pi/2), got {alpha!r}")
    s = limit.s
    return [math.atan2(abs(p / s), abs(q / s)) < alpha for p, q in points]


def count_system_constraints(limits: Sequence[CircleLimit], e: float, kind: Kind) -> int:
    total = 0
    for pos, limit in enumerate(limits):
        try:
            total += side_count(limit, e, kind)
        except DomainError as exc:
            name = limit.index if limit.index is not None else pos
            raise DomainError(f"branch {name}: {exc}") from exc
    return total


# export ---------------------------------------------------------------------

FIELDS = ("branch_id", "side_index", "a", "b", "c")


def _num(x: float) -> float:
    return float(f"{x:.12g}")


def constraint_records(sets: Iterable[ConstraintSet]) -> list[dict]:
    """Flatten constraint sets into export records, sides numbered from 1."""
    records = []
    for cs in sets:
        for k, h in enumerate(cs.halfplanes, start=1):
            records.append(
                {"branch_id": cs.branch, "side_index": k, "a": h.a, "b": h.b, "c": h.c}
            )
    return records


def to_csv(sets: Iterable[ConstraintSet]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIELDS)
    for r in constraint_records(sets):
        writer.writerow(
            [r["branch_id"], r["side_index"]] + [f"{r[k]:.12g}" for k in ("a", "b", "c")]
        )
    return buf.getvalue()


def to_json(sets: Iterable[ConstraintSet]) -> str:
    records = constraint_records(sets)
    for r in records:
        for k in ("a", "b", "c"):
            r[k] = _num(r[k])
    return json.dumps(records, indent=1)
