import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncorbifold.algebra import ActionGroupoid, Haar, StructuralError
from ncorbifold.bitorsor import (MoritaBitorsor, PreconditionError, are_isomorphic, check_covering, compose_bitorsors,
                                 dual_bitorsor, fiber_cardinalities, find_isomorphism, identity_bitorsor, lift_graph,
                                 quotient_bitorsor, require_valid, validate_bitorsor)
from ncorbifold.dirac import ContractError
from ncorbifold.geometry import DiscreteOrbifold, refine_circle, trivial_orbifold
from ncorbifold.groups import cycle_reflection, cycle_rotation, regular_action, symmetric_group, trivial_action

C6 = refine_circle(6, 6.0)


def ident_refl(haar=Haar.COUNTING):
    return identity_bitorsor(ActionGroupoid(cycle_reflection(6), haar), C6)


def quot_rot(haar=Haar.COUNTING):
    return quotient_bitorsor(DiscreteOrbifold(C6, cycle_rotation(6, 2)), haar)


def mutate(b, table, g, q, value):
    t = getattr(b, table).copy()
    t[g, q] = value
    return dataclasses.replace(b, **{table: t})


@pytest.mark.parametrize("make", [ident_refl, quot_rot, lambda: dual_bitorsor(quot_rot()),
                                  lambda: identity_bitorsor(ActionGroupoid(regular_action(symmetric_group(3))))])
def test_constructions_validate(make):
    rep = validate_bitorsor(make())
    assert rep.passed, rep.failures()


def test_identity_bitorsor_shape_and_fibers():
    b = ident_refl()
    assert b.n_points == 12
    rho_sizes, alpha_sizes = fiber_cardinalities(b)
    assert set(rho_sizes) == {2} and set(alpha_sizes) == {2}


def test_quotient_bitorsor_fibers():
    b = quot_rot()
    assert b.n_points == 6 and b.y_graph.n_vertices == 3
    rho_sizes, alpha_sizes = fiber_cardinalities(b)
    assert set(rho_sizes) == {1} and set(alpha_sizes) == {2}
    d_rho, d_alpha = fiber_cardinalities(dual_bitorsor(b))
    assert set(d_rho) == {2} and set(d_alpha) == {1}


def test_trivial_group_bitorsor():
    a = trivial_action(5)
    b = identity_bitorsor(ActionGroupoid(a))
    assert b.alpha.tolist() == b.rho.tolist() == list(range(5))
    rho_sizes, alpha_sizes = fiber_cardinalities(b)
    assert set(rho_sizes) == set(alpha_sizes) == {1}
    q = quotient_bitorsor(trivial_orbifold(refine_circle(5, 5.0)))
    assert q.alpha.tolist() == list(range(5))


def test_quotient_rejects_reflection():
    with pytest.raises(PreconditionError, match=r"\[0, 3\]"):
        quotient_bitorsor(DiscreteOrbifold(C6, cycle_reflection(6)))


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_single_right_entry_mutation_is_caught(data):
    b = ident_refl()
    q = data.draw(st.integers(0, b.n_points - 1))
    g = data.draw(st.integers(0, 1))
    value = data.draw(st.integers(0, b.n_points - 1).filter(lambda v: v != b.right[g, q]))
    rep = validate_bitorsor(mutate(b, "right", g, q, value))
    assert not rep.passed
    name = rep.failures()[0]
    assert rep.checks[name]["witness"] is not None


def test_mutation_witness_names_commutation_or_freeness():
    b = mutate(ident_refl(), "right", 1, 0, int(ident_refl().right[1, 1]))
    fails = validate_bitorsor(b).failures()
    assert "actions_commute" in fails or "right_free_transitive_on_alpha_fibers" in fails
    with pytest.raises(ContractError):
        require_valid(b)
    with pytest.raises(ContractError):
        fiber_cardinalities(dataclasses.replace(quot_rot(), alpha=np.array([0, 1, 2, 0, 1, 1])))


def test_table_shapes_checked():
    b = quot_rot()
    with pytest.raises(StructuralError):
        dataclasses.replace(b, right=b.right[:1])
    with pytest.raises(StructuralError):
        MoritaBitorsor(b.left_groupoid.with_haar(Haar.NORMALIZED), b.right_groupoid, b.alpha, b.rho, b.left, b.right)


def test_dual_is_involution():
    for b in (ident_refl(), quot_rot()):
        dd = dual_bitorsor(dual_bitorsor(b))
        assert np.array_equal(dd.left, b.left) and np.array_equal(dd.right, b.right)
        assert np.array_equal(dd.alpha, b.alpha) and np.array_equal(dd.rho, b.rho)


def test_composition_laws():
    b = quot_rot()
    theta = b.right_groupoid
    I_theta = identity_bitorsor(theta, C6)
    I_xi = identity_bitorsor(b.left_groupoid, b.y_graph)
    assert are_isomorphic(compose_bitorsors(I_xi, b), b)
    assert are_isomorphic(compose_bitorsors(b, I_theta), b)
    assert are_isomorphic(compose_bitorsors(dual_bitorsor(b), b), I_theta)
    assert are_isomorphic(compose_bitorsors(b, dual_bitorsor(b)), I_xi)
    ir = ident_refl()
    assert are_isomorphic(compose_bitorsors(dual_bitorsor(ir), ir), ir)
    for c in (compose_bitorsors(dual_bitorsor(b), b), compose_bitorsors(b, dual_bitorsor(b))):
        assert validate_bitorsor(c).passed


def test_composition_associative():
    b = quot_rot()
    d = dual_bitorsor(b)
    lhs = compose_bitorsors(compose_bitorsors(b, d), b)
    rhs = compose_bitorsors(b, compose_bitorsors(d, b))
    assert are_isomorphic(lhs, rhs)


def test_middle_mismatch_rejected():
    with pytest.raises(StructuralError):
        compose_bitorsors(quot_rot(), ident_refl())


def test_non_isomorphic_detected():
    b = quot_rot()
    assert find_isomorphism(b, identity_bitorsor(b.right_groupoid)) is None


def test_identity_lift_is_two_cycles():
    b = ident_refl()
    check_covering(b)
    comps = _components(b.graph)
    assert sorted(len(c) for c in comps) == [6, 6]
    assert all(len(b.graph.neighbors(q)) == 2 for q in b.points)


def test_quotient_lift_covers_c3():
    b = lift_graph(quot_rot().with_graph(None))
    check_covering(b)
    assert len(b.graph.edges) == 6 and len(_components(b.graph)) == 1
    for u, v, length in b.graph.edge_list():
        assert length == C6.length(int(b.rho[u]), int(b.rho[v])) == b.y_graph.length(int(b.alpha[u]), int(b.alpha[v]))


def test_lift_rejects_bad_edges():
    b = quot_rot()
    with pytest.raises(StructuralError):
        lift_graph(b, [(0, 2)])


def _components(graph):
    seen, comps = set(), []
    for s in graph.vertices:
        if s in seen:
            continue
        stack, comp = [s], set()
        while stack:
            u = stack.pop()
            if u in comp:
                continue
            comp.add(u)
            stack.extend(graph.neighbors(u))
        seen |= comp
        comps.append(comp)
    return comps
