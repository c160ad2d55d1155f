"""Inscribed-polygon geometry for circular branch apparent-power limits.

A branch rated ``s`` MVA confines its flow point ``(p, q)`` to the disk
``p**2 + q**2 <= s**2``.  The routines here describe polygons inscribed in
that circle: chord/sagitta/angle relations, the regular polygon with equal
sides, and the irregular polygon whose vertices are evenly spaced along the
Q axis so the sides near the P axis carry the smallest error.

Angles for polygon vertices are measured anticlockwise from the +Q axis and
sides are numbered from 1 starting at ``(0, +s)``.  ``linearize_at_angle``
uses the ordinary polar convention (from the +P axis).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Literal

Kind = Literal["regular", "irregular"]
Point = tuple[float, float]

# Ratios this close to an integer are treated as that integer before ceiling,
# so exact divisions (e.g. 2*pi / (pi/2)) do not round up by one ulp.
_CEIL_SLACK = 1e-9


class DomainError(ValueError):
    """Raised when a geometric input lies outside its admissible range."""


@dataclass(frozen=True)
class CircleLimit:
    s: float
    index: Hashable = None

    def __post_init__(self):
        if not (isinstance(self.s, (int, float)) and math.isfinite(self.s) and self.s > 0):
            raise DomainError(f"branch rating must be positive and finite, got {self.s!r}")


@dataclass(frozen=True)
class ChordSpec:
    delta_theta: float
    length: float
    sagitta: float


@dataclass(frozen=True)
class AngledChord:
    """A single chord centred on a given polar angle (hot-start linearization)."""

    theta: float
    chord: ChordSpec
    start: Point
    end: Point


@dataclass(frozen=True)
class Polygon:
    limit: CircleLimit
    kind: Kind
    vertices: tuple[Point, ...]
    sides: tuple[ChordSpec, ...]
    mq: int | None = None

    @property
    def m(self) -> int:
        return len(self.vertices)

    def edges(self):
        """Yield ``(v_n, v_{n+1})`` for every side, closing the cycle."""
        n = len(self.vertices)
        for k in range(n):
            yield self.vertices[k], self.vertices[(k + 1) % n]


def _as_limit(limit: CircleLimit | float) -> CircleLimit:
    return limit if isinstance(limit, CircleLimit) else CircleLimit(float(limit))


def _check_error(s: float, e: float, allow_radius: bool = False) -> None:
    if not math.isfinite(e) or e <= 0:
        raise DomainError(f"error must be positive, got {e!r}")
    if e > s or (e == s and not allow_radius):
        raise DomainError(f"error exceeds radius: e={e:g} MVA, s={s:g} MVA")


def _check_angle(delta_theta: float) -> None:
    if not (0 < delta_theta <= math.pi):
        raise DomainError(f"arc angle must lie in (0, pi], got {delta_theta!r}")


def _ceil(x: float) -> int:
    nearest = round(x)
    if abs(x - nearest) <= _CEIL_SLACK * max(1.0, abs(x)):
        return int(nearest)
    return math.ceil(x)


def sagitta(limit: CircleLimit | float, chord_length: float) -> float:
    """Maximum gap between a chord of the given length and its arc."""
    s = _as_limit(limit).s
    if not (0 < chord_length <= 2 * s):
        raise DomainError(
            f"chord length must lie in (0, 2s]={2 * s:g}; chord cannot exceed diameter"
        )
    half = chord_length / 2
    # s - sqrt(s^2 - h^2), rearranged to avoid cancellation for short chords
    return half * half / (s + math.sqrt(max(s * s - half * half, 0.0)))


def chord_from_angle(limit: CircleLimit | float, delta_theta: float) -> float:
    s = _as_limit(limit).s
    _check_angle(delta_theta)
    # same as sqrt(2) s sqrt(1 - cos), without the cancellation at small angles
    return 2.0 * s * math.sin(0.5 * delta_theta)


def angle_from_error(limit: CircleLimit | float, e: float) -> float:
    """Arc angle of the chord whose sagitta equals ``e``."""
    s = _as_limit(limit).s
    _check_error(s, e, allow_radius=True)
    # acos(2(1 - e/s)^2 - 1) rewritten through e = 2 s sin^2(dtheta/4)
    return min(math.pi, 4.0 * math.asin(math.sqrt(min(1.0, 0.5 * e / s))))


def error_from_angle(limit: CircleLimit | float, delta_theta: float) -> float:
    s = _as_limit(limit).s
    _check_angle(delta_theta)
    return 2.0 * s * math.sin(delta_theta / 4.0) ** 2


def regular_side_count(limit: CircleLimit | float, e_max: float) -> int:
    s = _as_limit(limit).s
    _check_error(s, e_max)
    return _ceil(2.0 * math.pi / angle_from_error(s, e_max))


def irregular_quadrant_count(limit: CircleLimit | float, e_min: float) -> int:
    """Sides per quadrant of the irregular polygon; the total is ``4 * mq``."""
    s = _as_limit(limit).s
    _check_error(s, e_min)
    dtheta_min = angle_from_error(s, e_min)
    if dtheta_min >= 0.5 * math.pi:
        # the axis-adjacent side spans asin(1/mq) <= pi/2 for any mq
        return 1
    dq = s * math.sin(dtheta_min)
    return _ceil(s / dq)


def side_count(limit: CircleLimit | float, e: float, kind: Kind) -> int:
    if kind == "regular":
        return regular_side_count(limit, e)
    if kind == "irregular":
        return 4 * irregular_quadrant_count(limit, e)
    raise ValueError(f"unknown polygon kind {kind!r}")


def _chord_between(s: float, v1: Point, v2: Point) -> ChordSpec:
    length = math.hypot(v2[0] - v1[0], v2[1] - v1[1])
    ratio = min(1.0, length / (2.0 * s))
    return ChordSpec(
        delta_theta=2.0 * math.asin(ratio),
        length=length,
        sagitta=sagitta(s, min(length, 2.0 * s)),
    )


def _polygon(limit: CircleLimit, kind: Kind, vertices: list[Point], mq: int | None) -> Polygon:
    n = len(vertices)
    sides = tuple(
        _chord_between(limit.s, vertices[k], vertices[(k + 1) % n]) for k in range(n)
    )
    return Polygon(limit=limit, kind=kind, vertices=tuple(vertices), sides=sides, mq=mq)


def build_regular(limit: CircleLimit | float, e_max: float) -> Polygon:
    limit = _as_limit(limit)
    s = limit.s
    m = regular_side_count(limit, e_max)
    vertices = []
    for k in range(m):
        phi = 2.0 * math.pi * k / m
        vertices.append((-s * math.sin(phi), s * math.cos(phi)))
    return _polygon(limit, "regular", vertices, None)


def irregular_from_mq(limit: CircleLimit | float, mq: int) -> Polygon:
    """Irregular polygon with a prescribed number of sides per quadrant."""
    limit = _as_limit(limit)
    if int(mq) != mq or mq < 1:
        raise DomainError(f"sides per quadrant must be a positive integer, got {mq!r}")
    mq = int(mq)
    s = limit.s

    def q_at(k: int) -> float:
        # q_k = -s + k*s/mq, written so q is exactly 0 and +-s at the axes
        return s * (k - mq) / mq

    def p_at(k: int) -> float:
        q = q_at(k)
        return math.sqrt(max(s * s - q * q, 0.0))

    top = 2 * mq
    vertices: list[Point] = [(0.0, s)]
    vertices += [(-p_at(k), q_at(k)) for k in range(top - 1, 0, -1)]
    vertices.append((0.0, -s))
    vertices += [(p_at(k), q_at(k)) for k in range(1, top)]
    return _polygon(limit, "irregular", vertices, mq)


def build_irregular(limit: CircleLimit | float, e_min: float) -> Polygon:
    limit = _as_limit(limit)
    return irregular_from_mq(limit, irregular_quadrant_count(limit, e_min))


def build_polygon(limit: CircleLimit | float, e: float, kind: Kind) -> Polygon:
    if kind == "regular":
        return build_regular(limit, e)
    if kind == "irregular":
        return build_irregular(limit, e)
    raise ValueError(f"unknown polygon kind {kind!r}")


def first_segment_stats(limit: CircleLimit | float, mq: int) -> tuple[float, float, float]:
    """Arc angle, length and sagitta of the side next to the Q axis.

    This is the longest, least accurate side of an irregular polygon with
    ``mq`` sides per quadrant.
    """
    s = _as_limit(limit).s
    if int(mq) != mq or mq < 1:
        raise DomainError(f"sides per quadrant must be a positive integer, got {mq!r}")
    dtheta_1 = math.acos(1.0 - 1.0 / mq)
    l_fg = s * math.sqrt(2.0 / mq)
    return dtheta_1, l_fg, 2.0 * s * math.sin(dtheta_1 / 4.0) ** 2


def linearize_at_angle(limit: CircleLimit | float, theta: float, e: float) -> AngledChord:
    s = _as_limit(limit).s
    dtheta = angle_from_error(s, e)
    theta = math.fmod(theta, 2.0 * math.pi)
    if theta < 0:
        theta += 2.0 * math.pi
    a0, a1 = theta - dtheta / 2.0, theta + dtheta / 2.0
    start = (s * math.cos(a0), s * math.sin(a0))
    end = (s * math.cos(a1), s * math.sin(a1))
    chord = ChordSpec(
        delta_theta=dtheta,
        length=chord_from_angle(s, dtheta),
        sagitta=error_from_angle(s, dtheta),
    )
    return AngledChord(theta=theta, chord=chord, start=start, end=end)
