import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import circle_spectrum
from ncorbifold.algebra import ActionGroupoid, Haar, StructuralError, convolve, function_element, involution, \
    random_element, unit_element
from ncorbifold.dirac import (SIGMA_X, ContractError, DiracOperator, SpectralTriple, SpinorBundle, approximate_sign,
                              circle_dirac, circle_grading, commutator_norm, constant_cocycle_bundle, crossed_rep,
                              invariant_triple, rep_is_faithful, spectrum, swap_bundle, torus_dirac, trivial_bundle)
from ncorbifold.geometry import GeometryError, MetricGraph, refine_circle, torus_graph
from ncorbifold.groups import GroupAction, cycle_reflection, cycle_rotation, cyclic_group, trivial_action
from ncorbifold.models import reflection_triple, rotation_triple

seeds = st.integers(0, 2**32 - 1)


def test_circle_rank1_spectrum_n4():
    d = circle_dirac(refine_circle(4, 4.0), 1)
    assert np.allclose(spectrum(d.matrix, np.eye(4)), [-1, 0, 0, 1], atol=1e-12)


@pytest.mark.parametrize("n", [6, 9, 32])
@pytest.mark.parametrize("rank", [1, 2])
def test_circle_spectrum_matches_fourier(n, rank):
    L = 2 * np.pi
    d = circle_dirac(refine_circle(n, L), rank)
    N = np.diag(np.repeat(d.volumes, rank))
    assert np.abs(spectrum(d.matrix, N) - circle_spectrum(n, L / n, rank)).max() < 1e-10


def test_constant_section_is_harmonic():
    for rank in (1, 2):
        d = circle_dirac(refine_circle(7, 7.0), rank)
        assert np.abs(d.matrix @ np.ones(7 * rank)).max() < 1e-14


def test_rank2_grading_anticommutes():
    n = 8
    d = circle_dirac(refine_circle(n, 8.0), 2)
    w = circle_grading(n)
    assert np.abs(w @ d.matrix @ w + d.matrix).max() == 0


def test_circle_dirac_rejects_non_cycle():
    g = torus_graph(3, 3, 3.0, 3.0)
    with pytest.raises(GeometryError):
        circle_dirac(g, 1)
    with pytest.raises(GeometryError):
        circle_dirac(refine_circle(5, 5.0), 3)


def test_dirac_locality_enforced():
    g = refine_circle(6, 6.0)
    m = np.zeros((6, 6))
    m[0, 3] = m[3, 0] = 1.0
    with pytest.raises(ContractError):
        DiracOperator(g, 1, m, np.ones(6))


def test_bundle_rejects_broken_cocycle():
    act = cycle_reflection(6)
    bad = np.ones((2, 6, 1, 1), dtype=complex)
    bad[1] *= 1j  # (i)^2 = -1 != rho(e)
    with pytest.raises(StructuralError):
        SpinorBundle(act, 1, bad)


@pytest.mark.parametrize("haar", list(Haar))
def test_crossed_rep_unit_functions_and_homomorphism(haar, rng):
    act = cycle_reflection(6)
    gpd = ActionGroupoid(act, haar)
    bundle = swap_bundle(act)
    psi = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    assert np.abs(crossed_rep(unit_element(gpd), psi, bundle) - psi).max() < 1e-14
    vals = rng.standard_normal(6)
    assert np.abs(crossed_rep(function_element(gpd, vals), psi, bundle) - np.repeat(vals, 2) * psi).max() < 1e-14
    f, g = random_element(gpd, rng), random_element(gpd, rng)
    lhs = crossed_rep(convolve(f, g), psi, bundle)
    rhs = crossed_rep(f, crossed_rep(g, psi, bundle), bundle)
    assert np.abs(lhs - rhs).max() < 1e-12 * max(1, np.abs(lhs).max())


@settings(max_examples=15, deadline=None)
@given(seed=seeds)
def test_rep_is_star_homomorphism(seed):
    t = reflection_triple(8)
    r = np.random.default_rng(seed)
    f = random_element(t.groupoid, r)
    assert np.abs(t.rep(involution(f)) - t.adjoint(t.rep(f))).max() < 1e-11


def test_triple_structure_checks():
    for t in (reflection_triple(8), rotation_triple(8, rank=2, graded=True), rotation_triple(8)):
        assert max(t.check().values()) < 1e-12


def test_faithfulness_cases():
    rot = cycle_rotation(6, 2)
    assert rep_is_faithful(ActionGroupoid(rot), trivial_bundle(rot))
    refl = cycle_reflection(6)
    assert rep_is_faithful(ActionGroupoid(refl), swap_bundle(refl))
    # effective, but rank-1 stabilizer images are dependent at the fixed points
    assert not rep_is_faithful(ActionGroupoid(refl), trivial_bundle(refl))
    dead = GroupAction(cyclic_group(2), np.tile(np.arange(6), (2, 1)))
    assert not rep_is_faithful(ActionGroupoid(dead), trivial_bundle(dead))


def test_invariant_dimensions():
    assert invariant_triple(rotation_triple(6, circumference=6.0)).dim == 3
    assert invariant_triple(reflection_triple(6, 6.0)).dim == 6
    # rank-1 trivial cocycle on the reflection orbifold: use a reflection-invariant operator (graph Laplacian)
    g = refine_circle(6, 6.0)
    act = cycle_reflection(6)
    lap = 2 * np.eye(6) - np.roll(np.eye(6), 1, 1) - np.roll(np.eye(6), -1, 1)
    t = SpectralTriple(ActionGroupoid(act), trivial_bundle(act), DiracOperator(g, 1, lap, np.ones(6)))
    assert invariant_triple(t).dim == 4


def test_invariant_of_trivial_group_is_whole_triple():
    g = refine_circle(8, 8.0)
    a = trivial_action(8)
    t = SpectralTriple(ActionGroupoid(a), trivial_bundle(a), circle_dirac(g, 1))
    inv = invariant_triple(t)
    assert inv.dim == 8 and np.abs(inv.spectrum() - spectrum(t.D, t.metric)).max() < 1e-12


@pytest.mark.parametrize("make", [lambda: reflection_triple(10), lambda: rotation_triple(10, rank=2, graded=True)])
def test_invariant_spectrum_is_submultiset(make):
    t = make()
    full = list(spectrum(t.D, t.metric))
    for lam in invariant_triple(t).spectrum():
        i = int(np.argmin([abs(lam - m) for m in full]))
        assert abs(full[i] - lam) < 1e-10
        full.pop(i)


def test_invariant_triple_rejects_non_invariant_dirac():
    act = cycle_reflection(6)
    t = SpectralTriple(ActionGroupoid(act), trivial_bundle(act), circle_dirac(refine_circle(6, 6.0), 1))
    with pytest.raises(ContractError):
        invariant_triple(t)


def test_approximate_sign():
    assert np.abs(approximate_sign(np.zeros((3, 3)))).max() == 0
    F = approximate_sign(np.diag([1.0, -1.0]))
    assert np.allclose(np.linalg.eigvalsh(F), [-1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-15)
    t = reflection_triple(12)
    F = approximate_sign(t.D, t.metric)
    u = t.unitary(1)
    assert np.abs(u @ F - F @ u).max() < 1e-12
    s = np.sqrt(t.metric.real)
    assert np.linalg.norm(s @ F @ np.linalg.inv(s), 2) < 1


def test_spectrum_basics():
    assert np.allclose(spectrum(np.diag([3.0, 1.0, 2.0])), [1, 2, 3])
    with pytest.raises(ContractError):
        spectrum(np.array([[0, 1], [0, 0]]))
    t = reflection_triple(8)
    u = t.unitary(1)
    assert np.abs(spectrum(u @ t.D @ u.conj().T, t.metric) - spectrum(t.D, t.metric)).max() < 1e-12


def test_commutator_norm_against_dense(rng):
    n = 12
    g = refine_circle(n, 12.0)
    a = trivial_action(n)
    t = SpectralTriple(ActionGroupoid(a), trivial_bundle(a), circle_dirac(g, 1))
    vals = rng.standard_normal(n)
    A = np.diag(vals)
    dense = np.linalg.norm(t.D @ A - A @ t.D, 2)  # metric is h * I, so weights cancel
    assert abs(commutator_norm(t, vals) - dense) < 1e-12
    # central difference: bounded by the largest difference quotient over two steps
    h = 1.0
    bound = max(abs(vals[(j + 1) % n] - vals[(j - 1) % n]) for j in range(n)) / (2 * h) * 2
    assert commutator_norm(t, vals) <= bound + 1e-12


def test_torus_dirac_hermitian_and_invariant_structure():
    g = torus_graph(4, 5, 4.0, 5.0)
    d = torus_dirac(g, 4, 5)
    N = np.diag(np.repeat(d.volumes, 2))
    assert np.abs(N @ d.matrix - (N @ d.matrix).conj().T).max() < 1e-12
    assert len(spectrum(d.matrix, N)) == 40


def test_constant_cocycle_bundle_swap_matches():
    act = cycle_reflection(4)
    b = constant_cocycle_bundle(act, [np.eye(2), SIGMA_X])
    assert np.array_equal(b.unitary(1), swap_bundle(act).unitary(1))
