import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from branchpoly import halfplanes as hp
from branchpoly import polygeom as pg
from branchpoly.polygeom import CircleLimit, DomainError

S16 = CircleLimit(16.0, index="b1")


def test_side_to_halfplane_example():
    h = hp.side_to_halfplane((0, -16), (9.6, -12.8), S16)
    assert (h.a, h.b, h.c) == pytest.approx(
        (-0.316227766016838, 0.948683298050514, 15.1789327687843), abs=1e-10
    )
    assert math.hypot(h.a, h.b) == pytest.approx(1.0, abs=1e-12)
    assert h.value(0, 0) > 0


def test_side_next_to_positive_p_axis():
    poly = pg.irregular_from_mq(16, 5)
    v = (math.sqrt(16**2 - 3.2**2), -3.2)
    h = hp.side_to_halfplane(v, (16.0, 0.0), S16)
    # c equals s minus the side's sagitta
    assert h.c == pytest.approx(15.9189784480820, abs=1e-10)
    assert h.c == pytest.approx(16 - poly.sides[14].sagitta, abs=1e-10)
    # a rounded display vertex is accepted too
    h2 = hp.side_to_halfplane((15.677, -3.2), (16.0, 0.0), S16)
    assert h2.c == pytest.approx(h.c, abs=1e-3)


def test_diameter_side():
    h = hp.side_to_halfplane((-16, 0), (16, 0), S16)
    assert (h.a, h.b, h.c) == (0.0, 1.0, 0.0)
    flipped = hp.side_to_halfplane((-16, 0), (16, 0), S16, interior=(0, -5))
    assert (flipped.a, flipped.b, flipped.c) == (0.0, -1.0, 0.0)


def test_side_errors():
    with pytest.raises(hp.DegenerateSideError):
        hp.side_to_halfplane((16, 0), (16, 0), S16)
    with pytest.raises(DomainError, match="not on the circle"):
        hp.side_to_halfplane((10, 0), (16, 0), S16)


def test_constraint_set_irregular_s16():
    cs = hp.polygon_to_constraints(pg.build_irregular(S16, 0.1))
    assert len(cs) == 20 and cs.branch == "b1"
    assert hp.contains(cs, 0, 0)
    assert hp.contains(cs, 0, 15.95)  # (0, 16) is itself a vertex
    assert not hp.contains(cs, 15.95, 1.0)
    assert not hp.contains(cs, 16.01, 0)


def _sample_disk(rng, s, n):
    r = s * np.sqrt(rng.uniform(0, 1, n))
    t = rng.uniform(0, 2 * np.pi, n)
    return np.c_[r * np.cos(t), r * np.sin(t)]


@pytest.mark.parametrize("kind", ["regular", "irregular"])
@pytest.mark.parametrize("s, e", [(16, 0.1), (220, 0.3), (880, 0.2), (1800, 0.1)])
def test_inner_approximation(kind, s, e):
    poly = pg.build_polygon(s, e, kind)
    cs = hp.polygon_to_constraints(poly)
    a = np.array([[h.a, h.b] for h in cs.halfplanes])
    c = np.array([h.c for h in cs.halfplanes])
    assert np.allclose(np.hypot(a[:, 0], a[:, 1]), 1, atol=1e-12)

    rng = np.random.default_rng(int(s * 10 + e * 100))
    pts = _sample_disk(rng, 1.2 * s, 10_000)
    inside_poly = np.all(pts @ a.T + c >= -1e-9 * s, axis=1)
    assert np.all(np.hypot(pts[inside_poly, 0], pts[inside_poly, 1]) <= s * (1 + 1e-9))

    # disk of radius s - max sagitta lies inside the polygon
    inner = s - max(sd.sagitta for sd in poly.sides)
    pts = _sample_disk(rng, inner, 10_000)
    assert np.all(pts @ a.T + c >= -1e-9 * s)

    for v in poly.vertices:
        assert hp.contains(cs, *v)


def test_irregular_set_symmetric():
    cs = hp.polygon_to_constraints(pg.build_irregular(220, 0.2))
    keys = {(round(h.a, 9) + 0.0, round(h.b, 9) + 0.0, round(h.c, 6)) for h in cs.halfplanes}
    assert {(-a + 0.0, b, c) for a, b, c in keys} == keys
    assert {(a, -b + 0.0, c) for a, b, c in keys} == keys


def test_alpha_region_check():
    pts = [(0.0, 10.0), (10.0, 0.0), (1.0, -10.0), (5.0, 5.0)]
    assert hp.alpha_region_check(pts, S16, math.radians(10)) == [True, False, True, False]
    assert hp.alpha_region_check(pts, S16, 0.0) == [False] * 4
    with pytest.raises(DomainError):
        hp.alpha_region_check(pts, S16, math.pi / 2)


def test_count_system_constraints():
    limits = [CircleLimit(16, 0), CircleLimit(220, 1), CircleLimit(880, 2)]
    assert hp.count_system_constraints(limits, 0.1, "regular") == 29 + 105 + 209
    assert hp.count_system_constraints(limits, 0.1, "irregular") == 20 + 68 + 136
    assert hp.count_system_constraints([], 0.1, "regular") == 0
    with pytest.raises(DomainError, match="branch 0"):
        hp.count_system_constraints(limits, 20.0, "regular")


def test_csv_and_json_export():
    sets = [
        hp.polygon_to_constraints(pg.irregular_from_mq(CircleLimit(16, "x"), 1)),
        hp.polygon_to_constraints(pg.build_regular(CircleLimit(220, "y"), 0.3)),
    ]
    text = hp.to_csv(sets)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert tuple(rows[0]) == hp.FIELDS
    assert len(rows) == 4 + 61
    assert [r["side_index"] for r in rows[:4]] == ["1", "2", "3", "4"]
    assert {r["branch_id"] for r in rows} == {"x", "y"}

    records = json.loads(hp.to_json(sets))
    assert len(records) == len(rows)
    for rec, row in zip(records, rows):
        assert set(rec) == set(hp.FIELDS)
        for k in ("a", "b", "c"):
            assert rec[k] == pytest.approx(float(row[k]), rel=1e-11, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=1, max_value=3000), st.floats(min_value=1e-3, max_value=0.4),
       st.sampled_from(["regular", "irregular"]))
def test_offsets_match_sagitta(s, r, kind):
    poly = pg.build_polygon(s, r * s, kind)
    cs = hp.polygon_to_constraints(poly)
    for h, side in zip(cs.halfplanes, poly.sides):
        assert h.c == pytest.approx(s - side.sagitta, abs=1e-9 * s)
