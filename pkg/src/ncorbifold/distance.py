"""Connes spectral distance on finite triples, with a shortest-path upper bound
and a refinement harness against the orbifold geodesic distance."""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bitorsor import PreconditionError
from .dirac import SpectralTriple, _hpsd_sqrt, invariant_projection
from .geometry import DiscreteOrbifold, orbifold_distance, singular_locus


@dataclass(frozen=True)
class SolverSettings:
    stall_tol: float = 1e-8
    stall_window: int = 50
    max_iter: int = 10_000
    gap_tol: float = 1e-12
    initial_step: float = 0.1
    sdp: bool = True


@dataclass(frozen=True, eq=False)
class DistanceQuery:
    triple: SpectralTriple
    x: int
    xp: int
    invariant_only: bool = False
    budget: float = 1.0
    settings: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        n = self.triple.bundle.n_points
        if not (0 <= self.x < n and 0 <= self.xp < n):
            raise ValueError(f"endpoints {(self.x, self.xp)} are not vertices of the base graph")


@dataclass
class DistanceBracket:
    lower: float
    upper: float
    certificate: np.ndarray  # vertex -> value
    converged: bool
    iterations: int
    constraint_norm: float
    method: str = "ascent"

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "converged": self.converged,
                "iterations": self.iterations, "constraint_norm": self.constraint_norm, "method": self.method,
                "certificate": [float(v) for v in self.certificate]}


@dataclass(frozen=True, eq=False)
class WorkSpace:
    """Hermitian D in orthonormal coordinates, with each coordinate labelled by the
    part (vertex or orbit) whose indicator acts on it as the identity."""

    S: np.ndarray
    labels: np.ndarray
    n_parts: int
    part_of_vertex: np.ndarray

    def commutator(self, a_parts: np.ndarray) -> np.ndarray:
        a = a_parts[self.labels]
        return self.S * a[None, :] - a[:, None] * self.S

    def norm_and_grad(self, a_parts: np.ndarray):
        """||[D, a]|| and its supergradient over part values, from the top singular pair."""
        M = self.commutator(a_parts)
        H = 1j * M  # hermitian since M is anti-hermitian
        w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
        i = int(np.argmax(np.abs(w)))
        sigma = float(abs(w[i]))
        if sigma == 0.0:
            return 0.0, np.zeros(self.n_parts)
        v = V[:, i]
        u = M @ v / sigma
        su = self.S.conj().T @ u
        sv = self.S @ v
        per_coord = np.real(np.conj(su) * v - np.conj(u) * sv)
        grad = np.bincount(self.labels, weights=per_coord, minlength=self.n_parts)
        return sigma, grad

    def edge_constants(self) -> dict:
        """c_{PP'} = ||P S P'|| for parts P != P' (lower bounds ||[D,a]|| >= c |a_P - a_P'|)."""
        out = {}
        idx = [np.flatnonzero(self.labels == p) for p in range(self.n_parts)]
        for p in range(self.n_parts):
            for pp in range(p + 1, self.n_parts):
                blk = self.S[np.ix_(idx[p], idx[pp])]
                if np.abs(blk).max(initial=0) > 0:
                    out[(p, pp)] = float(np.linalg.norm(blk, 2))
        return out


def workspace(triple: SpectralTriple, invariant_only: bool) -> WorkSpace:
    r = triple.bundle.rank
    n = triple.bundle.n_points
    s, si = _hpsd_sqrt(triple.metric)
    S = s @ triple.D @ si
    S = 0.5 * (S + S.conj().T)
    if not invariant_only:
        labels = np.repeat(np.arange(n), r)
        return WorkSpace(S, labels, n, np.arange(n))
    # invariant sections, basis built orbit by orbit so orbit indicators are diagonal
    P = s @ invariant_projection(triple) @ si
    cols, labels = [], []
    orbit_idx = triple.groupoid.action.orbit_index()
    for o, orbit in enumerate(triple.groupoid.action.orbits()):
        mask = np.zeros(n * r)
        for x in orbit:
            mask[x * r:(x + 1) * r] = 1.0
        Po = P * mask[None, :]  # P restricted to sections supported on the orbit
        Po = Po * mask[:, None]
        w, V = np.linalg.eigh(0.5 * (Po + Po.conj().T))
        keep = V[:, w > 0.5]
        cols.append(keep)
        labels += [o] * keep.shape[1]
    B = np.hstack(cols)
    SG = B.conj().T @ S @ B
    return WorkSpace(0.5 * (SG + SG.conj().T), np.array(labels, dtype=np.int64), len(cols), orbit_idx)


def _shortest_path(n_parts: int, weights: dict, src: int, dst: int) -> float:
    adj = [[] for _ in range(n_parts)]
    for (p, q), c in weights.items():
        adj[p].append((q, 1.0 / c))
        adj[q].append((p, 1.0 / c))
    dist = [math.inf] * n_parts
    dist[src] = 0.0
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        if u == dst:
            return d
        for v, w in sorted(adj[u]):
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist[dst]


def upper_bound(ws: WorkSpace, px: int, pxp: int, budget: float = 1.0) -> float:
    return budget * _shortest_path(ws.n_parts, ws.edge_constants(), px, pxp)


def geodesic_oracle(orb: DiscreteOrbifold, x: int, xp: int) -> float:
    return orbifold_distance(orb, x, xp)


def _ascend(ws: WorkSpace, a, grad, upper: float, px: int, free, st: SolverSettings):
    """Projected supergradient ascent on a(x) / ||[D, a]||, starting from a feasible ``a``."""
    best = a[px]
    step = st.initial_step * max(abs(best), 1e-3)
    history = [best]
    it = 0
    closed = False
    while it < st.max_iter:
        it += 1
        if upper - best <= st.gap_tol * max(1.0, upper):
            closed = True
            break
        g = -best * grad
        g[px] += 1.0
        g[~free] = 0.0
        gn = np.linalg.norm(g)
        if gn == 0:
            break
        trial = a + step * g / gn
        s_t, g_t = ws.norm_and_grad(trial)
        if s_t > 0 and trial[px] / s_t > best:
            a, grad = trial / s_t, g_t
            best = a[px]
            step *= 1.5
        else:
            step *= 0.5
        history.append(best)
        if len(history) > st.stall_window:
            old = history[-1 - st.stall_window]
            if best - old <= st.stall_tol * max(abs(best), 1e-300):
                break
        if step < 1e-16 * max(1.0, abs(best)):
            break
    return a, grad, it, closed


def _sdp_solve(ws: WorkSpace, px: int, pxp: int):
    """max a_px s.t. -1 <= i[D, a] <= 1, a_pxp = 0, as a semidefinite program.

    D is rescaled to unit norm for conditioning; the caller rescales the
    result to exact feasibility, so a slightly inaccurate optimum is usable.
    """
    import cvxpy as cp  # deferred: only needed when the ascent leaves a gap

    scale = float(np.linalg.norm(ws.S, 2))
    if scale == 0.0:
        return None
    a = cp.Variable(ws.n_parts)
    lab = np.zeros((len(ws.labels), ws.n_parts))
    lab[np.arange(len(ws.labels)), ws.labels] = 1.0
    da = cp.diag(lab @ a)
    s = ws.S / scale
    m = 1j * (s @ da - da @ s)
    h = 0.5 * (m + m.H)
    prob = cp.Problem(cp.Maximize(a[px]), [cp.lambda_max(h) <= 1, cp.lambda_max(-h) <= 1, a[pxp] == 0])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    except cp.error.SolverError:
        return None
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or a.value is None:
        return None
    return np.asarray(a.value, dtype=float)


def connes_distance(query: DistanceQuery, warm_start=None) -> DistanceBracket:
    """sup { a(x) - a(x') : a real, admissible, ||[D, a]|| <= budget }.

    Ascent from the geodesic profile first; if that leaves a gap to the path
    bound, a semidefinite solve supplies a better start and the ascent polishes
    it. The reported lower bound is always the value of a feasible certificate.
    """
    t, st = query.triple, query.settings
    ws = workspace(t, query.invariant_only)
    px, pxp = int(ws.part_of_vertex[query.x]), int(ws.part_of_vertex[query.xp])
    n = t.bundle.n_points
    if px == pxp:
        return DistanceBracket(0.0, 0.0, np.zeros(n), True, 0, 0.0, "trivial")
    upper = upper_bound(ws, px, pxp, 1.0)
    free = np.ones(ws.n_parts, dtype=bool)
    free[pxp] = False  # quotient by constants: pin a(x') = 0

    if warm_start is None:
        orb = DiscreteOrbifold(t.dirac.graph, t.groupoid.action)
        d = np.array([orbifold_distance(orb, z, query.xp) for z in range(n)])
    else:
        d = np.asarray(warm_start, dtype=float)
    a = np.zeros(ws.n_parts)
    for z in range(n):
        a[ws.part_of_vertex[z]] = d[z]
    a -= a[pxp]
    sigma, grad = ws.norm_and_grad(a)
    if sigma == 0.0 or a[px] <= 0:
        a = np.zeros(ws.n_parts)
        a[px] = 1.0
        sigma, grad = ws.norm_and_grad(a)
    a = a / sigma  # grad of sigma is scale invariant
    a, grad, it, closed = _ascend(ws, a, grad, upper, px, free, st)
    method = "gap-closed" if closed else "ascent"
    converged = closed
    if not closed and st.sdp:
        cand = _sdp_solve(ws, px, pxp)
        if cand is not None:
            converged = True
            s_c, g_c = ws.norm_and_grad(cand)
            if s_c > 0 and cand[px] / s_c > a[px]:
                a2, g2, it2, closed = _ascend(ws, cand / s_c, g_c, upper, px, free, st)
                a, it, method = a2, it + it2, "sdp"
    sigma, _ = ws.norm_and_grad(a)
    a = a / sigma * query.budget
    cert = a[ws.part_of_vertex]
    upper *= query.budget
    return DistanceBracket(float(a[px]), float(max(upper, a[px])), cert, converged, it, float(sigma * query.budget),
                           method)


def constraint_norm(triple: SpectralTriple, values, invariant_only: bool = False) -> float:
    """||[D, a]|| for a vertex function (compressed to invariant sections when requested)."""
    ws = workspace(triple, invariant_only)
    a_parts = np.zeros(ws.n_parts)
    a_parts[ws.part_of_vertex] = np.asarray(values, dtype=float)
    return ws.norm_and_grad(a_parts)[0]


def theorem3_harness(build, refinements, endpoints, settings: SolverSettings = None) -> list[dict]:
    """Invariant spectral distance vs the orbifold geodesic distance under refinement.

    ``build(n)`` returns a SpectralTriple on the n-th mesh; ``endpoints(n)``
    returns a list of (x, x') pairs.
    """
    settings = SolverSettings() if settings is None else settings
    rows = []
    for n in refinements:
        t = build(n)
        orb = DiscreteOrbifold(t.dirac.graph, t.groupoid.action)
        locus = singular_locus(orb)
        if not locus.pointlike:
            raise PreconditionError(f"singular locus {locus.vertices} is not pointlike")
        for x, xp in endpoints(n):
            br = connes_distance(DistanceQuery(t, x, xp, invariant_only=True, settings=settings))
            geo = geodesic_oracle(orb, x, xp)
            rel = abs(br.lower - geo) / geo if geo > 0 else abs(br.lower)
            rows.append({"n": n, "x": x, "xp": xp, "spectral_lower": br.lower, "spectral_upper": br.upper,
                         "geodesic": geo, "rel_error": rel, "converged": br.converged})
    return rows


def trend_violations(values, tol: float = 1e-10) -> int:
    """Number of steps where the sequence increases by more than ``tol``."""
    v = list(values)
    return sum(1 for a, b in zip(v, v[1:]) if b > a + tol)
