import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import floyd_warshall
from ncorbifold.geometry import (DiscreteOrbifold, GeometryError, GPath, MetricGraph, brute_force_gpath_distance,
                                 dijkstra, gpath_length, orbifold_distance, orbifold_distance_min,
                                 orbifold_distance_quotient, orbifold_distance_table, quotient_graph, refine_circle,
                                 singular_locus, torus_graph, trivial_orbifold, write_distance_csv)
from ncorbifold.groups import GroupAction, cycle_reflection, cycle_rotation, regular_action, symmetric_group


def fixtures():
    c6 = refine_circle(6, 6.0)
    c8 = refine_circle(8, 8.0)
    return {
        "refl_c6": DiscreteOrbifold(c6, cycle_reflection(6)),
        "rot_c6": DiscreteOrbifold(c6, cycle_rotation(6, 2)),
        "trivial_c6": trivial_orbifold(c6),
        "refl_c8": DiscreteOrbifold(c8, cycle_reflection(8)),
        "rot4_c8": DiscreteOrbifold(c8, cycle_rotation(8, 4)),
    }


ORBS = fixtures()


def test_refine_circle():
    g = refine_circle(4, 2 * math.pi)
    assert all(abs(length - math.pi / 2) < 1e-15 for _, _, length in g.edge_list())
    for n in (3, 7, 64):
        assert abs(refine_circle(n, 5.0).total_length - 5.0) < 1e-12
    with pytest.raises(GeometryError):
        refine_circle(2, 1.0)


def test_graph_invariants():
    with pytest.raises(GeometryError):
        MetricGraph.from_edge_list(3, [(0, 1, 1.0), (1, 0, 2.0), (1, 2, 1.0)])
    with pytest.raises(GeometryError):
        MetricGraph.from_edge_list(3, [(0, 0, 1.0), (1, 2, 1.0)])
    with pytest.raises(GeometryError):
        MetricGraph.from_edge_list(3, [(0, 1, 0.0), (1, 2, 1.0)])
    with pytest.raises(GeometryError):
        MetricGraph.from_edge_list(4, [(0, 1, 1.0), (2, 3, 1.0)])


def test_non_isometric_action_rejected():
    g = MetricGraph.from_edge_list(4, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (3, 0, 2.0)])
    with pytest.raises(GeometryError):
        DiscreteOrbifold(g, cycle_rotation(4, 4))


def test_gpath_lengths(refl_orb):
    assert gpath_length(refl_orb, GPath(((0, 1, 2),))) == 2.0
    # 0 -> 1, then the reflection arrow (r, 5) identifies 5 with 1, then 5 -> 4
    assert gpath_length(refl_orb, GPath(((0, 1), (5, 4)), ((1, 5),))) == 2.0
    assert gpath_length(refl_orb, GPath(((3,),))) == 0.0
    with pytest.raises(GeometryError, match="junction 0"):
        gpath_length(refl_orb, GPath(((0, 1), (4, 3)), ((1, 4),)))


def test_orbifold_distance_examples(refl_orb, rot_orb):
    assert orbifold_distance(refl_orb, 1, 5) == 0.0
    assert orbifold_distance(refl_orb, 0, 3) == 3.0
    assert orbifold_distance(refl_orb, 2, 2) == 0.0
    assert orbifold_distance(rot_orb, 0, 1) == 1.0


@pytest.mark.parametrize("name", sorted(ORBS))
def test_metric_axioms_and_formulations(name):
    orb = ORBS[name]
    d = orbifold_distance_table(orb)
    n = len(d)
    orbit = orb.action.orbit_index()
    fw = floyd_warshall(orb.graph)
    for x, xp in itertools.product(range(n), repeat=2):
        assert orbifold_distance_min(orb, x, xp) == orbifold_distance_quotient(orb, x, xp)
        assert d[x, xp] == d[xp, x]
        assert (d[x, xp] == 0) == (orbit[x] == orbit[xp])
        assert d[x, xp] == min(fw[x, orb.action.act(g, xp)] for g in orb.group.elements)
    # d[x, z] <= d[x, y] + d[y, z], indexed [x, y, z]
    assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :] + 1e-12)


@pytest.mark.parametrize("name", sorted(ORBS))
def test_g_invariance(name):
    orb = ORBS[name]
    d = orbifold_distance_table(orb)
    for g, h in itertools.product(orb.group.elements, repeat=2):
        gi, hi = orb.action.table[g], orb.action.table[h]
        assert np.array_equal(d[np.ix_(gi, hi)], d)


@pytest.mark.parametrize("name", ["refl_c6", "rot_c6", "refl_c8", "rot4_c8"])
def test_brute_force_gpaths(name):
    orb = ORBS[name]
    for x in orb.graph.vertices:
        for xp in orb.graph.vertices:
            assert brute_force_gpath_distance(orb, x, xp, 3) == orbifold_distance(orb, x, xp)


def test_trivial_group_equals_graph_distance():
    g = torus_graph(3, 4, 3.0, 4.0)
    orb = trivial_orbifold(g)
    assert np.array_equal(orbifold_distance_table(orb), floyd_warshall(g))
    assert np.array_equal(dijkstra(g, 0), floyd_warshall(g)[0])


def test_quotient_graph_of_rotation(rot_orb):
    q, proj = quotient_graph(rot_orb)
    assert q.n_vertices == 3 and q.cycle_order() == 1.0
    assert proj.tolist() == [0, 1, 2, 0, 1, 2]


def test_singular_locus(refl_orb, rot_orb):
    s = singular_locus(refl_orb)
    assert s.vertices == [0, 3] and s.pointlike
    assert s.stabilizers[0] == (0, 1)
    assert singular_locus(rot_orb).is_empty and singular_locus(rot_orb).pointlike
    assert singular_locus(trivial_orbifold(refine_circle(5, 5.0))).is_empty


def test_singular_locus_not_pointlike():
    # reflection of C4 through the edge midpoints 0-1 and 2-3 fixes no vertex; through vertices it does.
    # The permutation swapping 1 <-> 3 on C4 fixes 0 and 2; the graph with a chord 0-2 has the fixed edge 0-2.
    g = MetricGraph.from_edge_list(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0), (0, 2, 1.5)])
    act = GroupAction(cycle_reflection(4).group, np.array([[0, 1, 2, 3], [0, 3, 2, 1]]))
    s = singular_locus(DiscreteOrbifold(g, act))
    assert s.vertices == [0, 2] and not s.pointlike


@settings(max_examples=30, deadline=None)
@given(n=st.integers(3, 24), data=st.data())
def test_reflection_distance_closed_form(n, data):
    orb = DiscreteOrbifold(refine_circle(n, float(n)), cycle_reflection(n))
    x = data.draw(st.integers(0, n - 1))
    xp = data.draw(st.integers(0, n - 1))
    # positions on the quotient interval [0, n/2]
    px, pxp = min(x, n - x), min(xp, n - xp)
    assert orbifold_distance(orb, x, xp) == abs(px - pxp)


def test_s3_regular_orbifold_is_one_point():
    g = MetricGraph.from_edge_list(6, [(i, j, 1.0) for i in range(6) for j in range(i + 1, 6)])
    orb = DiscreteOrbifold(g, regular_action(symmetric_group(3)))
    assert np.all(orbifold_distance_table(orb) == 0)


def test_distance_csv(tmp_path, refl_orb):
    p = tmp_path / "d.csv"
    write_distance_csv(p, refl_orb)
    lines = p.read_text().splitlines()
    assert lines[0] == "x,x',d" and len(lines) == 37
    assert "0,3,3" in lines
