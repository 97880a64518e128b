"""Finite groups and finite group actions, stored as dense integer tables."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np


class GroupError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    """A finite group on the element ids ``0..order-1``.

    ``table[a, b]`` is the id of ``a*b``. The table is checked eagerly.
    """

    table: np.ndarray
    identity: int = 0
    name: str = ""
    inverse: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.int64)
        object.__setattr__(self, "table", t)
        n = t.shape[0]
        if t.ndim != 2 or t.shape != (n, n) or n == 0:
            raise GroupError(f"multiplication table must be square and non-empty, got {t.shape}")
        if t.min() < 0 or t.max() >= n:
            raise GroupError("multiplication table is not closed over the elements")
        e = self.identity
        if not (np.array_equal(t[e], np.arange(n)) and np.array_equal(t[:, e], np.arange(n))):
            raise GroupError(f"element {e} is not a two-sided identity")
        # associativity: (ab)c == a(bc) for all triples
        lhs = t[t[:, :, None], np.arange(n)[None, None, :]]
        rhs = t[np.arange(n)[:, None, None], t[None, :, :]]
        if not np.array_equal(lhs, rhs):
            bad = np.argwhere(lhs != rhs)[0]
            raise GroupError(f"table is not associative at {tuple(int(i) for i in bad)}")
        inv = np.full(n, -1, dtype=np.int64)
        for a in range(n):
            hits = np.flatnonzero(t[a] == e)
            if len(hits) != 1 or t[hits[0], a] != e:
                raise GroupError(f"element {a} has no two-sided inverse")
            inv[a] = hits[0]
        object.__setattr__(self, "inverse", inv)

    @property
    def order(self) -> int:
        return self.table.shape[0]

    @property
    def elements(self) -> range:
        return range(self.order)

    def mul(self, a: int, b: int) -> int:
        return int(self.table[a, b])

    def inv(self, a: int) -> int:
        return int(self.inverse[a])

    def is_subgroup(self, subset) -> bool:
        s = set(int(a) for a in subset)
        if self.identity not in s:
            return False
        return all(self.mul(a, self.inv(b)) in s for a in s for b in s)


def cyclic_group(n: int) -> FiniteGroup:
    idx = np.arange(n)
    return FiniteGroup((idx[:, None] + idx[None, :]) % n, 0, name=f"Z{n}")


def trivial_group() -> FiniteGroup:
    return FiniteGroup(np.zeros((1, 1), dtype=np.int64), 0, name="1")


def permutation_group(perms) -> FiniteGroup:
    """Group whose elements are the given permutations (tuples), composed as functions.

    ``a*b`` means "apply b, then a", which makes the permutations act on the left.
    """
    perms = [tuple(int(i) for i in p) for p in perms]
    index = {p: i for i, p in enumerate(perms)}
    if len(index) != len(perms):
        raise GroupError("duplicate permutations")
    n = len(perms)
    table = np.empty((n, n), dtype=np.int64)
    for i, a in enumerate(perms):
        for j, b in enumerate(perms):
            c = tuple(a[b[k]] for k in range(len(b)))
            if c not in index:
                raise GroupError("permutations are not closed under composition")
            table[i, j] = index[c]
    ident = tuple(range(len(perms[0])))
    if ident not in index:
        raise GroupError("identity permutation missing")
    return FiniteGroup(table, index[ident])


def symmetric_group(k: int) -> FiniteGroup:
    perms = sorted(itertools.permutations(range(k)))
    g = permutation_group(perms)
    return FiniteGroup(g.table, g.identity, name=f"S{k}")


@dataclass(frozen=True, eq=False)
class GroupAction:
    """Left action ``act[g, x]`` of a finite group on the points ``0..n_points-1``."""

    group: FiniteGroup
    table: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.table, dtype=np.int64)
        object.__setattr__(self, "table", a)
        G = self.group
        if a.ndim != 2 or a.shape[0] != G.order:
            raise GroupError(f"action table needs one row per group element, got shape {a.shape}")
        n = a.shape[1]
        if n == 0 or a.min() < 0 or a.max() >= n:
            raise GroupError("action table maps outside the point set")
        for g in G.elements:
            if len(set(a[g].tolist())) != n:
                raise GroupError(f"element {g} does not act bijectively")
        if not np.array_equal(a[G.identity], np.arange(n)):
            raise GroupError("identity element does not act trivially")
        # g.(h.x) == (gh).x
        lhs = a[:, a]  # lhs[g, h, x] = a[g, a[h, x]]
        rhs = a[G.table]  # rhs[g, h, x] = a[gh, x]
        if not np.array_equal(lhs, rhs):
            g, h, x = (int(i) for i in np.argwhere(lhs != rhs)[0])
            raise GroupError(f"action is not compatible with multiplication at g={g}, h={h}, x={x}")

    @property
    def n_points(self) -> int:
        return self.table.shape[1]

    @property
    def points(self) -> range:
        return range(self.n_points)

    def act(self, g: int, x: int) -> int:
        return int(self.table[g, x])

    def stabilizer(self, x: int) -> list[int]:
        return [g for g in self.group.elements if self.table[g, x] == x]

    def orbit(self, x: int) -> list[int]:
        return sorted(set(self.table[:, x].tolist()))

    def orbits(self) -> list[list[int]]:
        """Orbits sorted by their smallest point."""
        seen, out = set(), []
        for x in self.points:
            if x not in seen:
                o = self.orbit(x)
                seen.update(o)
                out.append(o)
        return out

    def orbit_index(self) -> np.ndarray:
        idx = np.empty(self.n_points, dtype=np.int64)
        for i, o in enumerate(self.orbits()):
            idx[o] = i
        return idx

    @property
    def is_effective(self) -> bool:
        ident = np.arange(self.n_points)
        return all(
            not np.array_equal(self.table[g], ident)
            for g in self.group.elements
            if g != self.group.identity
        )

    @property
    def is_free(self) -> bool:
        return all(len(self.stabilizer(x)) == 1 for x in self.points)


def trivial_action(n_points: int) -> GroupAction:
    return GroupAction(trivial_group(), np.arange(n_points)[None, :])


def cycle_reflection(n: int) -> GroupAction:
    """Z2 acting on the n-cycle by j -> -j mod n."""
    idx = np.arange(n)
    return GroupAction(cyclic_group(2), np.stack([idx, (-idx) % n]))


def cycle_rotation(n: int, order: int) -> GroupAction:
    """Z_order acting on the n-cycle by rotations through multiples of n/order."""
    if n % order:
        raise GroupError(f"rotation of order {order} does not divide the {n}-cycle")
    step = n // order
    idx = np.arange(n)
    return GroupAction(cyclic_group(order), np.stack([(idx + k * step) % n for k in range(order)]))


def regular_action(group: FiniteGroup) -> GroupAction:
    """The group acting on itself by left multiplication."""
    return GroupAction(group, group.table.copy())
