"""Ready-made triples and bitorsors on refined circles."""

from __future__ import annotations

import math

from .algebra import ActionGroupoid, Haar
from .bitorsor import quotient_bitorsor
from .dirac import SpectralTriple, circle_dirac, circle_grading, swap_bundle, trivial_bundle
from .geometry import DiscreteOrbifold, refine_circle
from .groups import cycle_reflection, cycle_rotation, trivial_action

TWO_PI = 2 * math.pi


def circle_triple(n: int, circumference: float = TWO_PI, rank: int = 1, haar="counting",
                  graded: bool = False) -> SpectralTriple:
    """Trivial group acting on the n-cycle."""
    g = refine_circle(n, circumference)
    a = trivial_action(n)
    om = circle_grading(n) if graded and rank == 2 else None
    return SpectralTriple(ActionGroupoid(a, Haar.parse(haar)), trivial_bundle(a, rank), circle_dirac(g, rank), om, 1)


def reflection_triple(n: int, circumference: float = TWO_PI, haar="counting") -> SpectralTriple:
    """Z2 acting by j -> -j with the rank-2 swap bundle (ungraded)."""
    g = refine_circle(n, circumference)
    a = cycle_reflection(n)
    return SpectralTriple(ActionGroupoid(a, Haar.parse(haar)), swap_bundle(a), circle_dirac(g, 2), None, 1)


def rotation_triple(n: int, order: int = 2, circumference: float = TWO_PI, rank: int = 1, haar="counting",
                    graded: bool = False) -> SpectralTriple:
    g = refine_circle(n, circumference)
    a = cycle_rotation(n, order)
    om = circle_grading(n) if graded and rank == 2 else None
    return SpectralTriple(ActionGroupoid(a, Haar.parse(haar)), trivial_bundle(a, rank), circle_dirac(g, rank), om, 1)


def rotation_quotient(n: int, order: int = 2, circumference: float = TWO_PI, rank: int = 1, haar="counting",
                      graded: bool = False):
    """(b, t1, t2): free rotation on C_n, its quotient cycle, and the quotient bitorsor."""
    t1 = rotation_triple(n, order, circumference, rank, haar, graded)
    b = quotient_bitorsor(DiscreteOrbifold(t1.dirac.graph, t1.groupoid.action), haar)
    ya = b.left_groupoid.action
    m = b.y_graph.n_vertices
    om = circle_grading(m) if graded and rank == 2 else None
    t2 = SpectralTriple(b.left_groupoid, trivial_bundle(ya, rank), circle_dirac(b.y_graph, rank), om, 1)
    return b, t1, t2
