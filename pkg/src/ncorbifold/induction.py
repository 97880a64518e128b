"""Induction of crossed-product spectral triples along a bitorsor.

Three spaces appear:

* the algebraic induced space ``C(Q) (.)_A H`` modulo its gram null space
  (``InducedHilbert``), in orthonormal coordinates;
* sections of the pushforward bundle, stored either at Q level
  (``rank * |Q|`` entries, ordered q-major) or by their values at the canonical
  point ``q_y`` of each alpha-fiber (``rank * |Y|`` "section coordinates");
* the original Hilbert space of the triple.

Because ``delta_q (.) psi`` only depends on ``psi`` at ``rho(q)``, the induced
space is spanned by the local generators ``(q, c) = delta_q (.) e_c`` with
``e_c`` the c-th fiber vector at ``rho(q)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import ActionGroupoid, AlgebraElement, StructuralError, function_element, point_mass
from .bimodule import BimoduleElement, delta, pairing_theta
from .bitorsor import MoritaBitorsor, check_covering
from .dirac import (
    ContractError,
    DiracOperator,
    SpectralTriple,
    SpinorBundle,
    approximate_sign,
    crossed_rep_matrix,
    invariant_triple,
    metric_matrix,
)
from .geometry import GeometryError

GRAM_TOL = 1e-10


def _check_sides(b: MoritaBitorsor, t: SpectralTriple):
    if not b.right_groupoid.same_as(t.groupoid):
        raise StructuralError("the triple does not live over the right groupoid of the bitorsor")


@dataclass(frozen=True, eq=False)
class InducedHilbert:
    bitorsor: MoritaBitorsor
    triple: SpectralTriple
    gram: np.ndarray  # on local generators (q, c), index q*rank + c
    coords: np.ndarray  # S = Lambda^1/2 V^H : generator coefficients -> orthonormal coordinates
    coords_pinv: np.ndarray  # V Lambda^-1/2
    eigen_floor: float
    ambient_dim: int

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    @property
    def rank(self) -> int:
        return self.triple.bundle.rank

    def generator_matrix(self, u) -> np.ndarray:
        """Coefficients of u (.) psi on the local generators, as a matrix acting on psi."""
        b, r = self.bitorsor, self.rank
        u = np.asarray(u, dtype=complex)
        m = np.zeros((b.n_points * r, self.triple.dim), dtype=complex)
        for q in b.points:
            x = b.rho[q]
            m[q * r:(q + 1) * r, x * r:(x + 1) * r] = u[q] * np.eye(r)
        return m

    def T(self, u) -> np.ndarray:
        """T_u: psi -> u (.) psi, into orthonormal coordinates."""
        return self.coords @ self.generator_matrix(u)

    def T_adjoint(self, u) -> np.ndarray:
        """Adjoint of T_u for the weighted inner product of the triple."""
        return np.linalg.solve(self.triple.metric, self.T(u).conj().T)

    def left_generator_matrix(self, a: AlgebraElement) -> np.ndarray:
        """Left Xi action on local generators: (q, c) -> w_K sum_k a(k, alpha(q)) (k.q, c)."""
        b, r = self.bitorsor, self.rank
        if not a.groupoid.same_as(b.left_groupoid):
            raise StructuralError("left action by an element of the wrong groupoid")
        m = np.zeros((b.n_points * r,) * 2, dtype=complex)
        for k in b.K.elements:
            for q in b.points:
                p = b.left[k, q]
                m[p * r:(p + 1) * r, q * r:(q + 1) * r] += a.groupoid.weight * a.values[k, b.alpha[q]] * np.eye(r)
        return m

    def left_action(self, a: AlgebraElement) -> np.ndarray:
        return self.coords @ self.left_generator_matrix(a) @ self.coords_pinv

    def null_leakage(self, a: AlgebraElement) -> float:
        """How far the left action is from preserving the gram null space (should be ~0)."""
        m = self.left_generator_matrix(a)
        proj = np.eye(self.gram.shape[0]) - self.coords_pinv @ self.coords
        return float(np.abs(self.coords @ m @ proj).max(initial=0.0))


def local_gram(b: MoritaBitorsor, t: SpectralTriple) -> np.ndarray:
    """<(q,c), (q',c')> = w_K w_G sum_{h: q.h = q'} nu(rho q) [H_{rho q} rho(h)_{rho q'}]_{c c'}."""
    _check_sides(b, t)
    r = t.bundle.rank
    w = b.left_groupoid.weight * b.right_groupoid.weight
    vol, hm, cocycle = t.dirac.volumes, t.bundle.fiber_metric, t.bundle.cocycle
    gram = np.zeros((b.n_points * r,) * 2, dtype=complex)
    for q in b.points:
        x = b.rho[q]
        for h in b.G.elements:
            qp = b.right[h, q]
            gram[q * r:(q + 1) * r, qp * r:(qp + 1) * r] += w * vol[x] * hm[x] @ cocycle[h, b.rho[qp]]
    return gram


def ambient_gram(b: MoritaBitorsor, t: SpectralTriple) -> np.ndarray:
    """Gram matrix on the full product basis delta_q (.) e_{x,c}, from the Theta-pairing directly."""
    _check_sides(b, t)
    dim = t.dim
    gram = np.zeros((b.n_points * dim,) * 2, dtype=complex)
    for q in b.points:
        for qp in b.points:
            # <u (.) psi, u' (.) psi'> = <psi, pi((u, u')_Theta) psi'>
            p = crossed_rep_matrix(pairing_theta(delta(b, q), delta(b, qp)), t.bundle)
            gram[q * dim:(q + 1) * dim, qp * dim:(qp + 1) * dim] = t.metric @ p
    return gram


def gram_quotient(gram: np.ndarray, tol: float = GRAM_TOL):
    gram = 0.5 * (gram + gram.conj().T)
    w, v = np.linalg.eigh(gram)
    scale = max(1.0, float(np.abs(w).max()))
    if w.min() < -tol * scale:
        raise ContractError(f"gram matrix has eigenvalue {w.min():.3e} < 0: not a valid bimodule")
    keep = w > tol * scale
    lam, vk = w[keep], v[:, keep]
    return (np.sqrt(lam)[:, None] * vk.conj().T), vk / np.sqrt(lam)[None, :], float(w.min())


def induced_space(b: MoritaBitorsor, t: SpectralTriple) -> InducedHilbert:
    gram = local_gram(b, t)
    s, sp, floor = gram_quotient(gram)
    return InducedHilbert(b, t, gram, s, sp, floor, b.n_points * t.dim)


@dataclass(frozen=True, eq=False)
class InducedBundle:
    bitorsor: MoritaBitorsor
    rank: int
    canonical: np.ndarray  # q_y
    embed: np.ndarray  # J: section coordinates -> Q-level sections
    volumes: np.ndarray  # nu_#
    fiber_metric: np.ndarray  # H_# per y
    bundle: SpinorBundle  # K action on Y with the induced cocycle

    @property
    def dim(self) -> int:
        return self.embed.shape[1]

    @property
    def metric(self) -> np.ndarray:
        return metric_matrix(self.volumes, self.fiber_metric)

    def restrict(self, eta_q: np.ndarray) -> np.ndarray:
        """Q-level section -> section coordinates (values at q_y)."""
        r = self.rank
        idx = (self.canonical[:, None] * r + np.arange(r)[None, :]).ravel()
        return eta_q[idx]

    def restriction_matrix(self) -> np.ndarray:
        r = self.rank
        idx = (self.canonical[:, None] * r + np.arange(r)[None, :]).ravel()
        m = np.zeros((len(idx), self.embed.shape[0]))
        m[np.arange(len(idx)), idx] = 1.0
        return m

    def k_action(self, k: int) -> np.ndarray:
        """(k.eta)_q = eta_{k^-1 . q} on Q-level sections."""
        b, r = self.bitorsor, self.rank
        kinv = b.K.inverse[k]
        m = np.zeros((b.n_points * r,) * 2)
        for q in b.points:
            p = b.left[kinv, q]
            m[q * r:(q + 1) * r, p * r:(p + 1) * r] = np.eye(r)
        return m


def equivariance_constraints(b: MoritaBitorsor, bundle: SpinorBundle) -> np.ndarray:
    """Rows of eta_{q.g} - rho(g^-1)_{rho q} eta_q = 0 for all (g, q)."""
    r = bundle.rank
    rows = []
    for g in b.G.elements:
        ginv = b.G.inverse[g]
        for q in b.points:
            qg = b.right[g, q]
            blk = np.zeros((r, b.n_points * r), dtype=complex)
            blk[:, qg * r:(qg + 1) * r] += np.eye(r)
            blk[:, q * r:(q + 1) * r] -= bundle.cocycle[ginv, b.rho[q]]
            rows.append(blk)
    return np.vstack(rows)


def pushforward_bundle(b: MoritaBitorsor, bundle: SpinorBundle, volumes) -> InducedBundle:
    if bundle.action.group.order != b.G.order or bundle.n_points != b.right_groupoid.n_points:
        raise StructuralError("bundle does not live over the right side of the bitorsor")
    r = bundle.rank
    ny = b.left_groupoid.n_points
    canon = b.canonical_points()
    volumes = np.asarray(volumes, dtype=float)
    # J: value v_y at q_y spreads to q_y . g as rho(g^-1) v_y
    J = np.zeros((b.n_points * r, ny * r), dtype=complex)
    for y in range(ny):
        qy = canon[y]
        for g in b.G.elements:
            q = b.right[g, qy]
            J[q * r:(q + 1) * r, y * r:(y + 1) * r] = bundle.cocycle[b.G.inverse[g], b.rho[qy]]
    cons = equivariance_constraints(b, bundle)
    if np.abs(cons @ J).max() > 1e-12:
        raise ContractError("canonical sections violate the equivariance constraint")
    sv = np.linalg.svd(cons, compute_uv=False)
    kernel_dim = b.n_points * r - int((sv > 1e-10 * max(1.0, sv.max())).sum())
    if kernel_dim != ny * r:
        raise ContractError(f"equivariant section space has dimension {kernel_dim}, expected {ny * r}")
    nu = np.empty(ny)
    for y in range(ny):
        vals = volumes[b.rho[b.alpha_fiber(y)]]
        if np.ptp(vals) > 1e-12 * max(1.0, vals.max()):
            raise ContractError(f"induced volume is ill defined over y={y}: {vals.tolist()}")
        nu[y] = vals[0]
    hm = bundle.fiber_metric[b.rho[canon]]
    # induced cocycle: k maps fiber at y to fiber at k.y
    K, kact = b.K, b.left_groupoid.action.table
    rho_sharp = np.zeros((K.order, ny, r, r), dtype=complex)
    for k in K.elements:
        kinv = K.inverse[k]
        for y in range(ny):
            ky = kact[k, y]
            p = b.left[kinv, canon[ky]]  # lies over y
            g = int(np.flatnonzero(b.right[:, canon[y]] == p)[0])
            rho_sharp[k, y] = bundle.cocycle[b.G.inverse[g], b.rho[canon[y]]]
    ind = SpinorBundle(b.left_groupoid.action, r, rho_sharp, hm)
    return InducedBundle(b, r, canon, J, nu, hm, ind)


def chi(b: MoritaBitorsor, bundle: SpinorBundle, f, psi) -> np.ndarray:
    """chi(f (.) psi)_q = w_G sum_g f(q.g) rho(g)_{g^-1 rho q} psi_{g^-1 rho q}, as a Q-level section."""
    G, act = b.G, b.right_groupoid.action.table
    r = bundle.rank
    f = np.asarray(f, dtype=complex)
    psi = np.asarray(psi, dtype=complex).reshape(-1, r)
    out = np.zeros((b.n_points, r), dtype=complex)
    for q in b.points:
        x = b.rho[q]
        for g in G.elements:
            z = act[G.inverse[g], x]
            out[q] += f[b.right[g, q]] * (bundle.cocycle[g, z] @ psi[z])
    return b.right_groupoid.weight * out.ravel()


def chi_generators(b: MoritaBitorsor, bundle: SpinorBundle) -> np.ndarray:
    """Q-level matrix of chi on the local generators (p, c)."""
    r = bundle.rank
    G = b.G
    m = np.zeros((b.n_points * r,) * 2, dtype=complex)
    w = b.right_groupoid.weight
    for p in b.points:
        for g in G.elements:
            q = b.right[G.inverse[g], p]
            m[q * r:(q + 1) * r, p * r:(p + 1) * r] += w * bundle.cocycle[g, b.rho[p]]
    return m


def xi_action_on_sections(b: MoritaBitorsor, a: AlgebraElement, r: int) -> np.ndarray:
    """(a.eta)_q = w_K sum_k a(k, k^-1 alpha(q)) eta_{k^-1 . q} on Q-level sections."""
    K, kact = b.K, b.left_groupoid.action.table
    m = np.zeros((b.n_points * r,) * 2, dtype=complex)
    for k in K.elements:
        kinv = K.inverse[k]
        for q in b.points:
            p = b.left[kinv, q]
            m[q * r:(q + 1) * r, p * r:(p + 1) * r] += a.values[k, kact[kinv, b.alpha[q]]] * np.eye(r)
    return a.groupoid.weight * m


@dataclass(frozen=True, eq=False)
class ChiIso:
    space: InducedHilbert
    pushforward: InducedBundle
    matrix: np.ndarray  # orthonormal induced coordinates -> section coordinates
    generator_matrix: np.ndarray  # Q-level chi on local generators
    scale: float  # <chi u, chi v>_Y = scale <u, v>
    scale_deviation: float
    intertwining_residual: float
    rank: int

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    def pull(self, op_sections: np.ndarray) -> np.ndarray:
        """Conjugate an operator on section coordinates back to the induced space."""
        return np.linalg.solve(self.matrix, op_sections @ self.matrix)


def chi_iso(b: MoritaBitorsor, t: SpectralTriple, rng=None, n_pairs: int = 200,
            space: InducedHilbert = None, push: InducedBundle = None) -> ChiIso:
    _check_sides(b, t)
    rng = np.random.default_rng(0) if rng is None else rng
    space = induced_space(b, t) if space is None else space
    push = pushforward_bundle(b, t.bundle, t.dirac.volumes) if push is None else push
    mq = chi_generators(b, t.bundle)
    if np.abs(mq - push.embed @ push.restrict(mq)).max() > 1e-10:
        raise ContractError("chi image leaves the equivariant section space")
    leak = np.abs(push.restrict(mq) @ (np.eye(mq.shape[1]) - space.coords_pinv @ space.coords)).max(initial=0)
    if leak > 1e-10 * max(1.0, np.abs(mq).max()):
        raise ContractError("chi does not vanish on the gram null space")
    C = push.restrict(mq) @ space.coords_pinv
    sv = np.linalg.svd(C, compute_uv=False) if C.size else np.zeros(0)
    rank = int((sv > 1e-10 * max(1.0, sv.max(initial=0))).sum())
    expected = push.dim
    if rank != expected or C.shape[0] != C.shape[1]:
        raise ContractError(f"chi has rank {rank} on an induced space of dimension {space.dim}, expected {expected}")
    N = push.metric
    ratios = []
    for _ in range(n_pairs):
        u = rng.standard_normal(space.dim) + 1j * rng.standard_normal(space.dim)
        v = rng.standard_normal(space.dim) + 1j * rng.standard_normal(space.dim)
        ratios.append(((C @ u).conj() @ N @ (C @ v)) / (u.conj() @ v))
    ratios = np.array(ratios)
    scale = float(np.real(np.mean(ratios)))
    dev = float(np.abs(ratios - scale).max())
    resid = 0.0
    for k, y in b.left_groupoid.arrows():
        a = point_mass(b.left_groupoid, (k, y))
        lhs = C @ space.left_action(a)
        rhs = push.restrict(xi_action_on_sections(b, a, push.rank) @ push.embed) @ C
        resid = max(resid, float(np.abs(lhs - rhs).max()))
    return ChiIso(space, push, C, mq, scale, dev, resid, rank)


def lifted_operator(b: MoritaBitorsor, op: np.ndarray, rank: int) -> np.ndarray:
    """Covering lift of a local operator on X to Q-level sections along the graph of Q."""
    if b.graph is None:
        raise GeometryError("bitorsor has no graph on Q; use lift_graph first")
    check_covering(b)
    r = rank
    out = np.zeros((b.n_points * r,) * 2, dtype=complex)
    for q in b.points:
        x = b.rho[q]
        out[q * r:(q + 1) * r, q * r:(q + 1) * r] = op[x * r:(x + 1) * r, x * r:(x + 1) * r]
        for p in b.graph.neighbors(q):
            z = b.rho[p]
            out[q * r:(q + 1) * r, p * r:(p + 1) * r] = op[x * r:(x + 1) * r, z * r:(z + 1) * r]
    return out


def _restrict_operator(push: InducedBundle, lifted: np.ndarray, what: str) -> np.ndarray:
    J = push.embed
    op = push.restrict(lifted @ J)
    resid = float(np.abs(lifted @ J - J @ op).max())
    if resid > 1e-10 * max(1.0, float(np.abs(lifted).max())):
        raise ContractError(f"lifted {what} does not preserve equivariant sections (residual {resid:.3e})")
    return op


def induced_dirac(b: MoritaBitorsor, t: SpectralTriple, push: InducedBundle = None) -> np.ndarray:
    push = pushforward_bundle(b, t.bundle, t.dirac.volumes) if push is None else push
    return _restrict_operator(push, lifted_operator(b, t.D, t.bundle.rank), "Dirac operator")


def induced_grading(b: MoritaBitorsor, t: SpectralTriple, push: InducedBundle = None) -> np.ndarray:
    push = pushforward_bundle(b, t.bundle, t.dirac.volumes) if push is None else push
    return _restrict_operator(push, lifted_operator(b, t.omega, t.bundle.rank), "grading")


def induced_triple(b: MoritaBitorsor, t: SpectralTriple) -> SpectralTriple:
    """The spectral triple over the left groupoid carried by the pushforward bundle."""
    _check_sides(b, t)
    if b.y_graph is None:
        raise GeometryError("inducing a triple needs a graph on Y")
    push = pushforward_bundle(b, t.bundle, t.dirac.volumes)
    d = induced_dirac(b, t, push)
    dirac = DiracOperator(b.y_graph, push.rank, d, push.volumes, t.dirac.stencil, t.dirac.clifford, t.dirac.step)
    grading = None if t.grading is None else induced_grading(b, t, push)
    return SpectralTriple(b.left_groupoid, push.bundle, dirac, grading, t.base_dimension)


def forward_neighbors(b: MoritaBitorsor) -> np.ndarray:
    """For each q, the lift at q of the cycle edge rho(q) -> rho(q)+1."""
    gx = b.x_graph
    if gx is None or gx.cycle_order() is None:
        raise GeometryError("forward differences need X to be a uniform cycle")
    n = gx.n_vertices
    out = np.empty(b.n_points, dtype=np.int64)
    for q in b.points:
        target = (b.rho[q] + 1) % n
        lifts = [p for p in b.graph.neighbors(q) if b.rho[p] == target]
        if len(lifts) != 1:
            raise StructuralError(f"forward edge at {q} has {len(lifts)} lifts")
        out[q] = lifts[0]
    return out


def verify_prop5(b: MoritaBitorsor, t: SpectralTriple, f, psi) -> dict:
    """Discrete Leibniz identity through chi.

    Compares D_# chi(f (.) psi) with chi(grad f (.) gamma psi) + chi(f (.) D psi),
    where grad f is the forward difference along lifted edges and gamma the
    Clifford coefficient of the stencil. Residual is measured in L2(nu_#).
    """
    if t.dirac.clifford is None or t.dirac.step is None:
        raise GeometryError("Dirac operator carries no stencil data")
    push = pushforward_bundle(b, t.bundle, t.dirac.volumes)
    r = t.bundle.rank
    f = np.asarray(f, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    h = t.dirac.step
    fwd = forward_neighbors(b)
    grad = (f[fwd] - f) / h
    gamma_psi = (psi.reshape(-1, r) @ t.dirac.clifford.T).ravel()
    lifted = lifted_operator(b, t.D, r)
    lhs = lifted @ chi(b, t.bundle, f, psi)
    rhs = chi(b, t.bundle, grad, gamma_psi) + chi(b, t.bundle, f, t.D @ psi)
    diff = push.restrict(lhs - rhs)
    N = push.metric
    resid = float(np.sqrt(np.real(diff.conj() @ N @ diff)))
    ref = push.restrict(lhs)
    scale = float(np.sqrt(np.real(ref.conj() @ N @ ref)))
    return {"h": float(h), "residual": resid, "lhs_norm": scale}


@dataclass(frozen=True, eq=False)
class UPhi:
    matrix: np.ndarray  # invariant coords of side 1 -> invariant coords of side 2
    scale: float  # sqrt(#G/#K)
    measured_scale: float
    isometry_defect: float
    dirac_residual: float
    grading_residual: float
    algebra_residual: float
    spectrum_gap: float


def pushforward_map(b: MoritaBitorsor, rank: int) -> np.ndarray:
    """phi_#: psi -> (values psi_{rho(q_y)}) in section coordinates."""
    canon = b.canonical_points()
    ny, nx = len(canon), b.right_groupoid.n_points
    m = np.zeros((ny * rank, nx * rank))
    for y, q in enumerate(canon):
        x = b.rho[q]
        m[y * rank:(y + 1) * rank, x * rank:(x + 1) * rank] = np.eye(rank)
    return m


def u_phi(b: MoritaBitorsor, t1: SpectralTriple, t2: SpectralTriple = None) -> UPhi:
    """Unitary sqrt(#G/#K) phi_# between invariant triples (orientation sign fixed to +1)."""
    _check_sides(b, t1)
    t2 = induced_triple(b, t1) if t2 is None else t2
    if not t2.groupoid.same_as(b.left_groupoid):
        raise StructuralError("target triple does not live over the left groupoid")
    inv1, inv2 = invariant_triple(t1), invariant_triple(t2)
    r = t1.bundle.rank
    phi = pushforward_map(b, r)
    scale = np.sqrt(b.G.order / b.K.order)
    B1, B2 = inv1.basis, inv2.basis
    img = phi @ B1
    n1 = np.real(np.einsum("ij,ik,kj->j", B1.conj(), t1.metric, B1))
    n2 = np.real(np.einsum("ij,ik,kj->j", img.conj(), t2.metric, img))
    measured = float(np.sqrt(np.mean(n1 / n2))) if len(n1) else float("nan")
    U = scale * (B2.conj().T @ t2.metric @ img)
    iso = float(max(np.abs(U.conj().T @ U - np.eye(U.shape[1])).max(initial=0),
                    np.abs(U @ U.conj().T - np.eye(U.shape[0])).max(initial=0)))
    dres = float(np.abs(U @ inv1.D - inv2.D @ U).max(initial=0))
    gres = float(np.abs(U @ inv1.omega - inv2.omega @ U).max(initial=0))
    canon = b.canonical_points()
    ares = 0.0
    for orbit in t1.groupoid.action.orbits():
        ind = np.zeros(t1.groupoid.n_points)
        ind[orbit] = 1.0
        pushed = ind[b.rho[canon]]
        ares = max(ares, float(np.abs(U @ inv1.function(ind) - inv2.function(pushed) @ U).max(initial=0)))
    s1, s2 = inv1.spectrum(), inv2.spectrum()
    gap = float(np.abs(s1 - s2).max(initial=0)) if len(s1) == len(s2) else float("inf")
    return UPhi(U, float(scale), measured, iso, dres, gres, ares, gap)


def induced_sign(chi_map: ChiIso, d_sections: np.ndarray) -> np.ndarray:
    """F~_2 on the induced space: chi^-1 F(D_#) chi."""
    F = approximate_sign(d_sections, chi_map.pushforward.metric)
    return chi_map.pull(F)


def orbit_integral_identity(b: MoritaBitorsor, values, volumes) -> float:
    """|#G sum_Y f nu_# - #K sum_X f nu| for a G-invariant function f on X."""
    values = np.asarray(values, dtype=float)
    volumes = np.asarray(volumes, dtype=float)
    canon = b.canonical_points()
    lhs = b.G.order * float(np.sum(values[b.rho[canon]] * volumes[b.rho[canon]]))
    rhs = b.K.order * float(np.sum(values * volumes))
    return abs(lhs - rhs)


def covering_integral_identity(b: MoritaBitorsor, integrand, volumes) -> float:
    """|sum_Q rho*(integrand nu) - #K sum_X integrand nu|."""
    integrand = np.asarray(integrand)
    volumes = np.asarray(volumes, dtype=float)
    lhs = np.sum(integrand[b.rho] * volumes[b.rho])
    return float(abs(lhs - b.K.order * np.sum(integrand * volumes)))
