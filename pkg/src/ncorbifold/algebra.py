"""Action groupoids and their convolution (crossed-product) algebras.

Arrows of ``G x| X`` are pairs ``(g, x)`` with source ``x`` and target ``g.x``.
Algebra elements are complex arrays of shape ``(#G, |X|)`` indexed by arrows.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .groups import GroupAction


class StructuralError(ValueError):
    """Objects from different groupoids, bundles or bitorsors were combined."""


class Haar(enum.Enum):
    """Fiber-integral convention on the target fibers of an action groupoid."""

    COUNTING = "counting"
    NORMALIZED = "normalized"

    def weight(self, group_order: int) -> float:
        return 1.0 if self is Haar.COUNTING else 1.0 / group_order

    @classmethod
    def parse(cls, value) -> "Haar":
        if isinstance(value, Haar):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True, eq=False)
class ActionGroupoid:
    action: GroupAction
    haar: Haar = Haar.COUNTING

    @property
    def group(self):
        return self.action.group

    @property
    def n_points(self) -> int:
        return self.action.n_points

    @property
    def shape(self) -> tuple[int, int]:
        return (self.group.order, self.n_points)

    @property
    def n_arrows(self) -> int:
        return self.group.order * self.n_points

    @property
    def weight(self) -> float:
        return self.haar.weight(self.group.order)

    def arrows(self):
        for g in self.group.elements:
            for x in self.action.points:
                yield (g, x)

    def source(self, arrow) -> int:
        return arrow[1]

    def target(self, arrow) -> int:
        g, x = arrow
        return self.action.act(g, x)

    def inverse(self, arrow):
        g, x = arrow
        return (self.group.inv(g), self.action.act(g, x))

    def compose(self, sigma, tau):
        """``sigma o tau``: first tau, then sigma."""
        if self.source(sigma) != self.target(tau):
            raise StructuralError(
                f"arrows {sigma} and {tau} are not composable: "
                f"s{sigma}={self.source(sigma)} but t{tau}={self.target(tau)}"
            )
        return (self.group.mul(sigma[0], tau[0]), tau[1])

    def with_haar(self, haar) -> "ActionGroupoid":
        return ActionGroupoid(self.action, Haar.parse(haar))

    def same_as(self, other: "ActionGroupoid") -> bool:
        return self is other or (
            self.haar is other.haar
            and np.array_equal(self.group.table, other.group.table)
            and np.array_equal(self.action.table, other.action.table)
        )


def compose_arrows(groupoid: ActionGroupoid, sigma, tau):
    return groupoid.compose(sigma, tau)


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    groupoid: ActionGroupoid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.groupoid.shape:
            raise StructuralError(f"values of shape {v.shape} do not match arrows {self.groupoid.shape}")
        object.__setattr__(self, "values", v)

    def _check(self, other: "AlgebraElement"):
        if not self.groupoid.same_as(other.groupoid):
            raise StructuralError("algebra elements live on different groupoids")

    def __add__(self, other):
        self._check(other)
        return AlgebraElement(self.groupoid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return AlgebraElement(self.groupoid, self.values - other.values)

    def __mul__(self, scalar):
        return AlgebraElement(self.groupoid, self.values * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return convolve(self, other)

    def __call__(self, arrow) -> complex:
        return complex(self.values[arrow[0], arrow[1]])

    @property
    def star(self) -> "AlgebraElement":
        return involution(self)

    def allclose(self, other, atol=1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.values, other.values, rtol=0, atol=atol))


def point_mass(groupoid: ActionGroupoid, arrow) -> AlgebraElement:
    v = np.zeros(groupoid.shape, dtype=complex)
    v[arrow[0], arrow[1]] = 1.0
    return AlgebraElement(groupoid, v)


def random_element(groupoid: ActionGroupoid, rng, real=False) -> AlgebraElement:
    v = rng.standard_normal(groupoid.shape)
    if not real:
        v = v + 1j * rng.standard_normal(groupoid.shape)
    return AlgebraElement(groupoid, v)


def convolve(f: AlgebraElement, g: AlgebraElement) -> AlgebraElement:
    """(f.g)(k, x) = w * sum_h f(k h^-1, h.x) g(h, x), w the Haar weight."""
    f._check(g)
    gpd = f.groupoid
    G, act = gpd.group, gpd.action.table
    out = np.zeros(gpd.shape, dtype=complex)
    for h in G.elements:
        hinv = G.inverse[h]
        rows = G.table[:, hinv]  # k h^-1 for every k
        out += f.values[rows][:, act[h]] * g.values[h][None, :]
    return AlgebraElement(gpd, gpd.weight * out)


def unit_element(groupoid: ActionGroupoid) -> AlgebraElement:
    """Multiplicative unit: the indicator of the identity arrows, scaled by #G when normalized."""
    v = np.zeros(groupoid.shape, dtype=complex)
    v[groupoid.group.identity, :] = 1.0 / groupoid.weight
    return AlgebraElement(groupoid, v)


def involution(f: AlgebraElement) -> AlgebraElement:
    """f*(g, x) = conj f(g^-1, g.x)."""
    gpd = f.groupoid
    G, act = gpd.group, gpd.action.table
    out = np.empty(gpd.shape, dtype=complex)
    for g in G.elements:
        out[g] = np.conj(f.values[G.inverse[g], act[g]])
    return AlgebraElement(gpd, out)


def group_element(groupoid: ActionGroupoid, g: int) -> AlgebraElement:
    """Image of g under G -> G x| A, i.e. the function (g', x) -> [g' = g], unit-normalized."""
    v = np.zeros(groupoid.shape, dtype=complex)
    v[g, :] = 1.0 / groupoid.weight
    return AlgebraElement(groupoid, v)


def function_element(groupoid: ActionGroupoid, values) -> AlgebraElement:
    """Embed a function on X as an element supported on the identity arrows."""
    v = np.zeros(groupoid.shape, dtype=complex)
    v[groupoid.group.identity, :] = np.asarray(values) / groupoid.weight
    return AlgebraElement(groupoid, v)


def invariant_subalgebra_basis(groupoid: ActionGroupoid) -> list[AlgebraElement]:
    """Orbit indicators on X, embedded on the identity arrows (one per orbit)."""
    out = []
    for orbit in groupoid.action.orbits():
        ind = np.zeros(groupoid.n_points)
        ind[orbit] = 1.0
        out.append(function_element(groupoid, ind))
    return out


def regular_representation(f: AlgebraElement) -> np.ndarray:
    """Matrix of left convolution by f on l2(arrows), arrows flattened row-major as g*|X| + x.

    This representation is faithful for every finite groupoid, so operator
    inequalities in the C*-completion can be checked on it.
    """
    gpd = f.groupoid
    G, act = gpd.group, gpd.action.table
    n = gpd.n_points
    N = gpd.n_arrows
    mat = np.zeros((N, N), dtype=complex)
    # (f.g)(k, x) = w sum_h f(k h^-1, h.x) g(h, x)
    for k in G.elements:
        for h in G.elements:
            kh = G.table[k, G.inverse[h]]
            rows = k * n + np.arange(n)
            cols = h * n + np.arange(n)
            mat[rows, cols] += gpd.weight * f.values[kh, act[h]]
    return mat


def cstar_norm(f: AlgebraElement) -> float:
    return float(np.linalg.norm(regular_representation(f), 2))


def haar_left_invariance_defect(groupoid: ActionGroupoid, fn: np.ndarray) -> float:
    """max over arrows sigma of |int f(sigma tau) dmu^{s(sigma)}(tau) - int f(tau) dmu^{t(sigma)}(tau)|.

    The Haar measure mu^x lives on the target fiber t^{-1}(x).
    """
    G, act = groupoid.group, groupoid.action.table
    w = groupoid.weight
    worst = 0.0
    for g, x in groupoid.arrows():
        # tau = (h, h^-1 x) ranges over t^-1(x); sigma tau = (g h, h^-1 x)
        lhs = w * sum(fn[G.table[g, h], act[G.inverse[h], x]] for h in G.elements)
        y = act[g, x]
        rhs = w * sum(fn[h, act[G.inverse[h], y]] for h in G.elements)
        worst = max(worst, abs(lhs - rhs))
    return float(worst)
