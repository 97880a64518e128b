"""Equivariant spinor bundles over metric graphs, lattice Dirac operators and
finite crossed-product spectral triples.

Sections are vectors of length ``rank * |X|`` ordered vertex-major
(index ``x * rank + c``). The L2 inner product is ``<psi, phi> = psi^H N phi``
with ``N`` block-diagonal, ``N_x = nu(x) * H_x`` (volume times fiber metric).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import ActionGroupoid, AlgebraElement, StructuralError, function_element, group_element
from .geometry import GeometryError, MetricGraph
from .groups import GroupAction


class ContractError(RuntimeError):
    """A documented pre/post-condition failed numerically."""


STRUCT_TOL = 1e-12
EIGEN_TOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _hpsd_sqrt(m: np.ndarray):
    w, v = np.linalg.eigh(m)
    if w.min() <= 0:
        raise ContractError("metric is not positive definite")
    s = (v * np.sqrt(w)) @ v.conj().T
    si = (v / np.sqrt(w)) @ v.conj().T
    return s, si


@dataclass(frozen=True, eq=False)
class SpinorBundle:
    """Rank-r bundle on the vertices with a G-action ``cocycle[g, x]: fiber_x -> fiber_{g.x}``."""

    action: GroupAction
    rank: int
    cocycle: np.ndarray
    fiber_metric: np.ndarray = None

    def __post_init__(self):
        G, n, r = self.action.group, self.action.n_points, self.rank
        rho = np.asarray(self.cocycle, dtype=complex)
        if rho.shape != (G.order, n, r, r):
            raise StructuralError(f"cocycle shape {rho.shape} != {(G.order, n, r, r)}")
        object.__setattr__(self, "cocycle", rho)
        hm = self.fiber_metric
        hm = np.broadcast_to(np.eye(r), (n, r, r)).copy() if hm is None else np.asarray(hm, dtype=complex)
        object.__setattr__(self, "fiber_metric", hm)
        act = self.action.table
        for g in G.elements:
            for h in G.elements:
                gh = G.table[g, h]
                for x in range(n):
                    lhs = rho[gh, x]
                    rhs = rho[g, act[h, x]] @ rho[h, x]
                    if np.abs(lhs - rhs).max() > 1e-10:
                        raise StructuralError(f"cocycle condition fails at g={g}, h={h}, x={x}")
        for g in G.elements:
            for x in range(n):
                m = rho[g, x].conj().T @ hm[act[g, x]] @ rho[g, x]
                if np.abs(m - hm[x]).max() > 1e-10:
                    raise StructuralError(f"rho({g}) at {x} is not unitary for the (G-invariant) fiber metric")

    @property
    def n_points(self) -> int:
        return self.action.n_points

    @property
    def dim(self) -> int:
        return self.rank * self.n_points

    def unitary(self, g: int) -> np.ndarray:
        """Matrix of (U(g) psi)_{g.x} = rho(g)_x psi_x."""
        r, n = self.rank, self.n_points
        u = np.zeros((r * n, r * n), dtype=complex)
        for x in range(n):
            gx = self.action.table[g, x]
            u[gx * r:(gx + 1) * r, x * r:(x + 1) * r] = self.cocycle[g, x]
        return u


def constant_cocycle_bundle(action: GroupAction, matrices) -> SpinorBundle:
    """Bundle whose cocycle is a group representation g -> matrices[g], constant over X."""
    mats = np.asarray(matrices, dtype=complex)
    rho = np.broadcast_to(mats[:, None], (mats.shape[0], action.n_points) + mats.shape[1:]).copy()
    return SpinorBundle(action, mats.shape[1], rho)


def trivial_bundle(action: GroupAction, rank: int = 1) -> SpinorBundle:
    return constant_cocycle_bundle(action, np.broadcast_to(np.eye(rank), (action.group.order, rank, rank)))


def swap_bundle(action: GroupAction) -> SpinorBundle:
    """Rank-2 bundle for an order-2 group: the non-identity element swaps the two components.

    This is the cocycle under which the reflection j -> -j commutes with the
    forward/backward rank-2 lattice Dirac operator.
    """
    G = action.group
    if G.order != 2:
        raise StructuralError("swap bundle needs a group of order 2")
    mats = [np.eye(2), SIGMA_X]
    if G.identity == 1:
        mats = mats[::-1]
    return constant_cocycle_bundle(action, mats)


@dataclass(frozen=True, eq=False)
class DiracOperator:
    """Hermitian (for the volume-weighted L2 product) local operator on sections.

    ``clifford`` and ``step`` record the stencil as D ~ clifford * d/ds with
    forward-edge derivative, used by the Leibniz-residual check.
    """

    graph: MetricGraph
    rank: int
    matrix: np.ndarray
    volumes: np.ndarray
    stencil: str = "custom"
    clifford: np.ndarray = None
    step: float = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        dim = self.rank * self.graph.n_vertices
        if m.shape != (dim, dim):
            raise StructuralError(f"Dirac matrix shape {m.shape} != {(dim, dim)}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "volumes", np.asarray(self.volumes, dtype=float))
        r = self.rank
        for x in self.graph.vertices:
            for y in self.graph.vertices:
                if x != y and not self.graph.has_edge(x, y):
                    if np.abs(m[x * r:(x + 1) * r, y * r:(y + 1) * r]).max() > 0:
                        raise ContractError(f"Dirac stencil couples non-adjacent vertices {x}, {y}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def scaled(self, factor: float) -> "DiracOperator":
        return DiracOperator(self.graph, self.rank, factor * self.matrix, self.volumes, self.stencil,
                             None if self.clifford is None else factor * self.clifford, self.step)


def metric_matrix(volumes, fiber_metric) -> np.ndarray:
    n, r = fiber_metric.shape[0], fiber_metric.shape[1]
    N = np.zeros((n * r, n * r), dtype=complex)
    for x in range(n):
        N[x * r:(x + 1) * r, x * r:(x + 1) * r] = volumes[x] * fiber_metric[x]
    return N


def circle_dirac(graph: MetricGraph, rank: int = 1) -> DiracOperator:
    """Lattice Dirac operator on the cycle 0-1-...-(n-1)-0 with uniform spacing h.

    rank 1: (D psi)_j = (i / 2h) (psi_{j+1} - psi_{j-1}).
    rank 2: D = [[0, A], [A^*, 0]] per vertex, A = (shift - 1) / h, anticommuting with diag(1, -1).
    """
    h = graph.cycle_order()
    if h is None:
        raise GeometryError("circle_dirac needs a uniform cycle graph 0-1-...-(n-1)-0")
    n = graph.n_vertices
    shift = np.roll(np.eye(n), 1, axis=1)  # (S psi)_j = psi_{j+1}
    vol = np.full(n, h)
    if rank == 1:
        m = (1j / (2 * h)) * (shift - shift.T)
        return DiracOperator(graph, 1, m, vol, "central", np.array([[1j]]), h)
    if rank == 2:
        a = (shift - np.eye(n)) / h
        m = np.kron(a, np.array([[0, 1], [0, 0]])) + np.kron(a.conj().T, np.array([[0, 0], [1, 0]]))
        return DiracOperator(graph, 2, m, vol, "forward", np.array([[0, 1], [-1, 0]], dtype=complex), h)
    raise GeometryError(f"circle_dirac supports rank 1 or 2, got {rank}")


def circle_grading(n: int) -> np.ndarray:
    return np.kron(np.eye(n), SIGMA_Z)


def torus_dirac(graph: MetricGraph, n: int, m: int) -> DiracOperator:
    """Rank-2 central-difference Dirac on the n x m periodic grid from ``torus_graph``."""
    hx = graph.length(0, m % (n * m)) if n > 1 else 1.0
    hy = graph.length(0, 1)

    def central(k, h):
        s = np.roll(np.eye(k), 1, axis=1)
        return (1j / (2 * h)) * (s - s.T)

    d1 = np.kron(central(n, hx), np.eye(m))
    d2 = np.kron(np.eye(n), central(m, hy))
    mat = np.kron(d1, SIGMA_X) + np.kron(d2, SIGMA_Y)
    vol = np.full(n * m, hx * hy)
    return DiracOperator(graph, 2, mat, vol, "central2d")


@dataclass(frozen=True, eq=False)
class SpectralTriple:
    """Finite crossed-product spectral triple (G x| C(X), L2(bundle), D, omega)."""

    groupoid: ActionGroupoid
    bundle: SpinorBundle
    dirac: DiracOperator
    grading: np.ndarray = None
    base_dimension: int = None
    metric: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.bundle.action is not self.groupoid.action and not np.array_equal(
            self.bundle.action.table, self.groupoid.action.table
        ):
            raise StructuralError("bundle and groupoid carry different actions")
        if self.dirac.rank != self.bundle.rank or self.dirac.dim != self.bundle.dim:
            raise StructuralError("Dirac operator and bundle disagree on rank or size")
        object.__setattr__(self, "metric", metric_matrix(self.dirac.volumes, self.bundle.fiber_metric))
        if self.grading is not None:
            object.__setattr__(self, "grading", np.asarray(self.grading, dtype=complex))

    @property
    def dim(self) -> int:
        return self.bundle.dim

    @property
    def D(self) -> np.ndarray:
        return self.dirac.matrix

    @property
    def omega(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex) if self.grading is None else self.grading

    def rep(self, a: AlgebraElement) -> np.ndarray:
        return crossed_rep_matrix(a, self.bundle)

    def unitary(self, g: int) -> np.ndarray:
        return self.rep(group_element(self.groupoid, g))

    def function(self, values) -> np.ndarray:
        return self.rep(function_element(self.groupoid, values))

    def adjoint(self, op: np.ndarray) -> np.ndarray:
        """Adjoint for the weighted inner product: N^{-1} op^H N."""
        return np.linalg.solve(self.metric, op.conj().T @ self.metric)

    def with_dirac(self, dirac: DiracOperator) -> "SpectralTriple":
        return SpectralTriple(self.groupoid, self.bundle, dirac, self.grading, self.base_dimension)

    def check(self) -> dict:
        """Residuals of the triple's structural identities (all should be ~0)."""
        D, N = self.D, self.metric
        out = {"dirac_hermitian": float(np.abs(N @ D - (N @ D).conj().T).max())}
        us = [self.unitary(g) for g in self.groupoid.group.elements]
        out["unitary_commutes_dirac"] = max(float(np.abs(u @ D - D @ u).max()) for u in us)
        if self.grading is not None:
            w = self.grading
            out["grading_involution"] = float(np.abs(w @ w - np.eye(self.dim)).max())
            out["grading_hermitian"] = float(np.abs(N @ w - (N @ w).conj().T).max())
            out["grading_anticommutes_dirac"] = float(np.abs(w @ D + D @ w).max())
            out["unitary_commutes_grading"] = max(float(np.abs(u @ w - w @ u).max()) for u in us)
            out["grading_commutes_functions"] = max(
                float(np.abs(w @ self.function(e) - self.function(e) @ w).max())
                for e in np.eye(self.bundle.n_points)
            )
        return out


def crossed_rep_matrix(a: AlgebraElement, bundle: SpinorBundle) -> np.ndarray:
    """Matrix of (a.psi)_x = w sum_g a(g, g^-1 x) rho(g)_{g^-1 x} psi_{g^-1 x}."""
    gpd = a.groupoid
    if gpd.group.order != bundle.action.group.order or gpd.n_points != bundle.n_points:
        raise StructuralError("algebra element and bundle live over different groupoids")
    r, n = bundle.rank, bundle.n_points
    act = gpd.action.table
    m = np.zeros((r * n, r * n), dtype=complex)
    for g in gpd.group.elements:
        for y in range(n):
            c = a.values[g, y]
            if c != 0:
                gy = act[g, y]
                m[gy * r:(gy + 1) * r, y * r:(y + 1) * r] += c * bundle.cocycle[g, y]
    return gpd.weight * m


def crossed_rep(a: AlgebraElement, psi: np.ndarray, bundle: SpinorBundle) -> np.ndarray:
    return crossed_rep_matrix(a, bundle) @ np.asarray(psi, dtype=complex)


def rep_is_faithful(groupoid: ActionGroupoid, bundle: SpinorBundle, tol: float = 1e-10) -> bool:
    """Injectivity of the crossed-product representation, by rank over the arrow basis."""
    mats = []
    for g, x in groupoid.arrows():
        v = np.zeros(groupoid.shape)
        v[g, x] = 1.0
        mats.append(crossed_rep_matrix(AlgebraElement(groupoid, v), bundle).ravel())
    s = np.linalg.svd(np.array(mats), compute_uv=False)
    return bool(s.min() > tol * s.max())


def symmetrize(op: np.ndarray, metric: np.ndarray) -> np.ndarray:
    """Express an operator in N-orthonormal coordinates: N^{1/2} op N^{-1/2}."""
    s, si = _hpsd_sqrt(metric)
    return s @ op @ si


def spectrum(op: np.ndarray, metric: np.ndarray = None) -> np.ndarray:
    """Ascending eigenvalues (with multiplicity) of an operator self-adjoint for ``metric``."""
    op = np.asarray(op, dtype=complex)
    if metric is not None:
        op = symmetrize(op, metric)
    scale = max(1.0, float(np.abs(op).max()))
    if np.abs(op - op.conj().T).max() > EIGEN_TOL * scale:
        raise ContractError("spectrum requested for a non-hermitian operator")
    return np.linalg.eigvalsh(0.5 * (op + op.conj().T))


def approximate_sign(op: np.ndarray, metric: np.ndarray = None) -> np.ndarray:
    """F = D (1 + D^2)^{-1/2} by functional calculus."""
    op = np.asarray(op, dtype=complex)
    if metric is None:
        s = si = np.eye(op.shape[0])
    else:
        s, si = _hpsd_sqrt(metric)
    h = s @ op @ si
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    f = (v * (w / np.sqrt(1.0 + w**2))) @ v.conj().T
    return si @ f @ s


def weighted_norm(op: np.ndarray, metric: np.ndarray = None, metric_in: np.ndarray = None) -> float:
    """Operator norm between weighted spaces (``metric`` on the output, ``metric_in`` on the input)."""
    if metric is not None:
        s, _ = _hpsd_sqrt(metric)
        op = s @ op
    if metric_in is not None:
        _, si = _hpsd_sqrt(metric_in)
        op = op @ si
    return float(np.linalg.norm(op, 2))


def commutator_norm(triple: SpectralTriple, values) -> float:
    """||[D, a]|| for a function a on the vertices."""
    a = np.repeat(np.asarray(values, dtype=float), triple.bundle.rank)
    c = triple.D * a[None, :] - a[:, None] * triple.D
    return weighted_norm(c, triple.metric, triple.metric)


@dataclass(frozen=True, eq=False)
class InvariantTriple:
    """Compression of a triple to the G-invariant sections.

    ``basis`` columns are N-orthonormal and span range(P_G); operators are
    expressed in that basis.
    """

    parent: SpectralTriple
    basis: np.ndarray
    D: np.ndarray
    omega: np.ndarray
    algebra: list  # matrices of the orbit-indicator basis

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def compress(self, op: np.ndarray) -> np.ndarray:
        return self.basis.conj().T @ self.parent.metric @ op @ self.basis

    def function(self, values) -> np.ndarray:
        """Compressed multiplication operator of a G-invariant function on X."""
        return self.compress(self.parent.function(values))

    def commutator_norm(self, values) -> float:
        a = self.function(values)
        return float(np.linalg.norm(self.D @ a - a @ self.D, 2))

    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.D + self.D.conj().T))


def invariant_projection(triple: SpectralTriple) -> np.ndarray:
    G = triple.groupoid.group
    return sum(triple.unitary(g) for g in G.elements) / G.order


def invariant_triple(triple: SpectralTriple, tol: float = EIGEN_TOL) -> InvariantTriple:
    D, w = triple.D, triple.omega
    P = invariant_projection(triple)
    scale = max(1.0, float(np.abs(D).max()))
    if np.abs(P @ D - D @ P).max() > tol * scale or np.abs(P @ w - w @ P).max() > tol:
        raise ContractError("group action does not commute with D and omega")
    s, si = _hpsd_sqrt(triple.metric)
    Ps = s @ P @ si  # orthogonal projector in orthonormal coordinates
    vals, vecs = np.linalg.eigh(0.5 * (Ps + Ps.conj().T))
    keep = vecs[:, vals > 0.5]
    basis = si @ keep
    comp = lambda op: basis.conj().T @ triple.metric @ op @ basis
    from .algebra import invariant_subalgebra_basis

    alg = [comp(triple.rep(e)) for e in invariant_subalgebra_basis(triple.groupoid)]
    return InvariantTriple(triple, basis, comp(D), comp(w), alg)
