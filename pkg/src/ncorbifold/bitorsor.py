"""Finite Morita bitorsors K x| Y <- Q -> G x| X.

A bitorsor is stored as action tables on the point set ``Q = 0..n-1``:

* ``left[k, q]`` is ``(k, alpha(q)) . q``; it moves alpha by k and fixes rho.
* ``right[g, q]`` is ``q . (g, g^-1 rho(q))``; it sends rho(q) to g^-1 rho(q) and fixes alpha.

With these conventions ``left[k', left[k, q]] = left[k'k, q]`` and
``right[g', right[g, q]] = right[g g', q]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import ActionGroupoid, StructuralError
from .dirac import ContractError
from .geometry import DiscreteOrbifold, GeometryError, MetricGraph, quotient_graph, singular_locus
from .groups import GroupAction, trivial_group


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MoritaBitorsor:
    left_groupoid: ActionGroupoid  # Xi = K x| Y
    right_groupoid: ActionGroupoid  # Theta = G x| X
    alpha: np.ndarray
    rho: np.ndarray
    left: np.ndarray
    right: np.ndarray
    graph: MetricGraph = None  # graph on Q
    x_graph: MetricGraph = None
    y_graph: MetricGraph = None
    name: str = ""

    def __post_init__(self):
        for attr in ("alpha", "rho", "left", "right"):
            object.__setattr__(self, attr, np.asarray(getattr(self, attr), dtype=np.int64))
        n = self.n_points
        if self.rho.shape != (n,):
            raise StructuralError("anchor tables must have one entry per torsor point")
        if self.left.shape != (self.K.order, n):
            raise StructuralError(f"left action table has shape {self.left.shape}, expected {(self.K.order, n)}")
        if self.right.shape != (self.G.order, n):
            raise StructuralError(f"right action table has shape {self.right.shape}, expected {(self.G.order, n)}")
        if self.left_groupoid.haar is not self.right_groupoid.haar:
            raise StructuralError("both sides of a bitorsor must use the same Haar convention")

    @property
    def n_points(self) -> int:
        return len(self.alpha)

    @property
    def K(self):
        return self.left_groupoid.group

    @property
    def G(self):
        return self.right_groupoid.group

    @property
    def points(self) -> range:
        return range(self.n_points)

    def rho_fiber(self, x: int) -> list[int]:
        return np.flatnonzero(self.rho == x).tolist()

    def alpha_fiber(self, y: int) -> list[int]:
        return np.flatnonzero(self.alpha == y).tolist()

    def canonical_points(self) -> np.ndarray:
        """Smallest torsor point in each alpha-fiber, indexed by y."""
        ny = self.left_groupoid.n_points
        out = np.full(ny, -1, dtype=np.int64)
        for q in reversed(range(self.n_points)):
            out[self.alpha[q]] = q
        if (out < 0).any():
            raise ContractError(f"alpha misses the points {np.flatnonzero(out < 0).tolist()}")
        return out

    def with_graph(self, graph: MetricGraph) -> "MoritaBitorsor":
        return MoritaBitorsor(self.left_groupoid, self.right_groupoid, self.alpha, self.rho, self.left,
                              self.right, graph, self.x_graph, self.y_graph, self.name)

    def with_haar(self, haar) -> "MoritaBitorsor":
        return MoritaBitorsor(self.left_groupoid.with_haar(haar), self.right_groupoid.with_haar(haar), self.alpha,
                              self.rho, self.left, self.right, self.graph, self.x_graph, self.y_graph, self.name)


@dataclass
class ValidationReport:
    checks: dict = field(default_factory=dict)  # name -> {"passed": bool, "witness": ...}

    def record(self, name: str, witness=None):
        self.checks[name] = {"passed": witness is None, "witness": witness}

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def failures(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c["passed"]]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": self.checks}


def _first(cond_iter):
    for w in cond_iter:
        return w
    return None


def validate_bitorsor(b: MoritaBitorsor) -> ValidationReport:
    rep = ValidationReport()
    K, G = b.K, b.G
    ka, ga = b.left_groupoid.action.table, b.right_groupoid.action.table
    nY, nX, nQ = b.left_groupoid.n_points, b.right_groupoid.n_points, b.n_points
    in_range = (
        b.alpha.min(initial=0) >= 0 and b.alpha.max(initial=0) < nY
        and b.rho.min(initial=0) >= 0 and b.rho.max(initial=0) < nX
        and b.left.min() >= 0 and b.left.max() < nQ and b.right.min() >= 0 and b.right.max() < nQ
    )
    rep.record("tables_in_range", None if in_range else {"message": "anchor or action table out of range"})
    if not in_range:
        return rep
    Q = range(nQ)
    rep.record("anchors_surjective", _first(
        [{"missing_y": y} for y in range(nY) if y not in set(b.alpha.tolist())]
        + [{"missing_x": x} for x in range(nX) if x not in set(b.rho.tolist())]
    ))
    rep.record("left_unit", _first({"q": q} for q in Q if b.left[K.identity, q] != q))
    rep.record("right_unit", _first({"q": q} for q in Q if b.right[G.identity, q] != q))
    rep.record("left_action_law", _first(
        {"k1": k1, "k2": k2, "q": q}
        for k1 in K.elements for k2 in K.elements for q in Q
        if b.left[k2, b.left[k1, q]] != b.left[K.table[k2, k1], q]
    ))
    rep.record("right_action_law", _first(
        {"g1": g1, "g2": g2, "q": q}
        for g1 in G.elements for g2 in G.elements for q in Q
        if b.right[g2, b.right[g1, q]] != b.right[G.table[g1, g2], q]
    ))
    rep.record("left_anchor_equivariance", _first(
        {"k": k, "q": q} for k in K.elements for q in Q
        if b.alpha[b.left[k, q]] != ka[k, b.alpha[q]] or b.rho[b.left[k, q]] != b.rho[q]
    ))
    rep.record("right_anchor_equivariance", _first(
        {"g": g, "q": q} for g in G.elements for q in Q
        if b.rho[b.right[g, q]] != ga[G.inverse[g], b.rho[q]] or b.alpha[b.right[g, q]] != b.alpha[q]
    ))
    rep.record("actions_commute", _first(
        {"k": k, "g": g, "q": q} for k in K.elements for g in G.elements for q in Q
        if b.left[k, b.right[g, q]] != b.right[g, b.left[k, q]]
    ))

    def torsor_witness(table, anchor, label):
        for q in Q:
            image = table[:, q].tolist()
            fiber = set(np.flatnonzero(anchor == anchor[q]).tolist())
            if len(set(image)) != len(image):
                return {"q": q, "reason": f"{label} action not free", "image": image}
            if set(image) != fiber:
                return {"q": q, "reason": f"{label} action not transitive on the fiber", "image": image,
                        "fiber": sorted(fiber)}
        return None

    rep.record("right_free_transitive_on_alpha_fibers", torsor_witness(b.right, b.alpha, "right"))
    rep.record("left_free_transitive_on_rho_fibers", torsor_witness(b.left, b.rho, "left"))
    if b.graph is not None:
        try:
            check_covering(b)
            rep.record("graph_covering")
        except StructuralError as exc:
            rep.record("graph_covering", {"message": str(exc)})
    return rep


def require_valid(b: MoritaBitorsor) -> MoritaBitorsor:
    rep = validate_bitorsor(b)
    if not rep.passed:
        name = rep.failures()[0]
        raise ContractError(f"invalid bitorsor: {name} fails with witness {rep.checks[name]['witness']}")
    return b


def fiber_cardinalities(b: MoritaBitorsor):
    """Sizes of rho-fibers over X and alpha-fibers over Y (must be #K and #G)."""
    nx, ny = b.right_groupoid.n_points, b.left_groupoid.n_points
    rho_sizes = np.bincount(b.rho, minlength=nx)
    alpha_sizes = np.bincount(b.alpha, minlength=ny)
    if (rho_sizes != b.K.order).any():
        x = int(np.flatnonzero(rho_sizes != b.K.order)[0])
        raise ContractError(f"rho-fiber over {x} has {rho_sizes[x]} points, expected #K = {b.K.order}")
    if (alpha_sizes != b.G.order).any():
        y = int(np.flatnonzero(alpha_sizes != b.G.order)[0])
        raise ContractError(f"alpha-fiber over {y} has {alpha_sizes[y]} points, expected #G = {b.G.order}")
    return rho_sizes, alpha_sizes


def identity_bitorsor(theta: ActionGroupoid, graph: MetricGraph = None) -> MoritaBitorsor:
    """Q = arrows (g, x) -> index g*|X| + x, alpha = target, rho = source."""
    G, act = theta.group, theta.action.table
    n = theta.n_points
    g_idx, x_idx = np.divmod(np.arange(theta.n_arrows), n)
    alpha = act[g_idx, x_idx]
    rho = x_idx
    left = np.stack([G.table[k, g_idx] * n + x_idx for k in G.elements])
    # (g, x) o (h, h^-1 x) = (g h, h^-1 x)
    right = np.stack([G.table[g_idx, h] * n + act[G.inverse[h], x_idx] for h in G.elements])
    qgraph = None
    if graph is not None:
        edges = {}
        for u, v, length in graph.edge_list():
            for g in G.elements:
                edges[frozenset((g * n + u, g * n + v))] = length
        qgraph = MetricGraph(theta.n_arrows, edges, require_connected=False)
    return MoritaBitorsor(theta, theta, alpha, rho, left, right, qgraph, graph, graph, "identity")


def quotient_bitorsor(orb: DiscreteOrbifold, haar="counting") -> MoritaBitorsor:
    """Equivalence between a free action groupoid and the unit groupoid of its orbit graph."""
    locus = singular_locus(orb)
    if not locus.is_empty:
        raise PreconditionError(f"action is not free; singular vertices {locus.vertices}")
    ygraph, proj = quotient_graph(orb)
    theta = ActionGroupoid(orb.action).with_haar(haar)
    ny = ygraph.n_vertices
    xi = ActionGroupoid(GroupAction(trivial_group(), np.arange(ny)[None, :])).with_haar(haar)
    G, act = orb.group, orb.action.table
    n = orb.graph.n_vertices
    right = np.stack([act[G.inverse[g]] for g in G.elements])
    qgraph = MetricGraph(n, dict(orb.graph.edges), require_connected=False)
    return MoritaBitorsor(xi, theta, proj, np.arange(n), np.arange(n)[None, :], right, qgraph, orb.graph,
                          ygraph, "quotient")


def dual_bitorsor(b: MoritaBitorsor) -> MoritaBitorsor:
    """Swap the two sides; left and right actions are exchanged through inverses."""
    K, G = b.K, b.G
    new_left = b.right[G.inverse]  # new_left[g, q] = right[g^-1, q]
    new_right = b.left[K.inverse]
    return MoritaBitorsor(b.right_groupoid, b.left_groupoid, b.rho.copy(), b.alpha.copy(), new_left, new_right,
                          b.graph, b.y_graph, b.x_graph, f"dual({b.name})" if b.name else "dual")


def compose_bitorsors(p: MoritaBitorsor, q: MoritaBitorsor) -> MoritaBitorsor:
    """P: L x| Z <- P -> K x| Y composed with Q: K x| Y <- Q -> G x| X.

    Points are classes of pairs (p, q) with rho_P(p) = alpha_Q(q) under
    (right_P[k, p], left_Q[k^-1, q]) ~ (p, q).
    """
    if not p.right_groupoid.same_as(q.left_groupoid):
        raise StructuralError("middle groupoids of the composed bitorsors differ")
    K = p.G
    pairs = [(a, c) for a in p.points for c in q.points if p.rho[a] == q.alpha[c]]
    rep_of = {}
    classes = []
    for a, c in pairs:
        if (a, c) in rep_of:
            continue
        cls = len(classes)
        orbit = {(int(p.right[k, a]), int(q.left[K.inverse[k], c])) for k in K.elements}
        for pair in orbit:
            rep_of[pair] = cls
        classes.append(min(orbit))
    n = len(classes)
    alpha = np.array([p.alpha[a] for a, _ in classes])
    rho = np.array([q.rho[c] for _, c in classes])
    left = np.array([[rep_of[(int(p.left[l, a]), c)] for a, c in classes] for l in p.K.elements])
    right = np.array([[rep_of[(a, int(q.right[g, c]))] for a, c in classes] for g in q.G.elements])
    graph = None
    if p.graph is not None and q.graph is not None:
        edges = {}
        for i, (a, c) in enumerate(classes):
            for c2 in q.graph.neighbors(c):
                # lift the Y-edge alpha_Q(c) -> alpha_Q(c2) through rho_P at a
                lifts = [a2 for a2 in p.graph.neighbors(a) if p.rho[a2] == q.alpha[c2]]
                if len(lifts) != 1:
                    raise StructuralError(f"edge {(c, c2)} has {len(lifts)} lifts at point {a}")
                j = rep_of[(lifts[0], c2)]
                edges[frozenset((i, j))] = q.graph.length(c, c2)
        graph = MetricGraph(n, edges, require_connected=False)
    return MoritaBitorsor(p.left_groupoid, q.right_groupoid, alpha, rho, left, right, graph, q.x_graph, p.y_graph,
                          f"({p.name} o {q.name})")


def find_isomorphism(b1: MoritaBitorsor, b2: MoritaBitorsor):
    """Bijection phi: Q1 -> Q2 commuting with anchors and both actions, or None.

    Backtracking over one representative per (K x G)-orbit; the rest of each
    orbit is forced by equivariance.
    """
    if not (b1.left_groupoid.same_as(b2.left_groupoid) and b1.right_groupoid.same_as(b2.right_groupoid)):
        return None
    if b1.n_points != b2.n_points:
        return None
    K, G = b1.K, b1.G
    orbits = []
    seen = set()
    for q in b1.points:
        if q not in seen:
            orb = {int(b1.right[g, b1.left[k, q]]) for k in K.elements for g in G.elements}
            seen |= orb
            orbits.append(q)

    def propagate(q0, t0, phi, used):
        new = {}
        for k in K.elements:
            for g in G.elements:
                s = int(b1.right[g, b1.left[k, q0]])
                t = int(b2.right[g, b2.left[k, t0]])
                prev = phi.get(s, new.get(s))
                if prev is not None:
                    if prev != t:
                        return None
                    continue
                if t in used or t in new.values():
                    return None
                if b1.alpha[s] != b2.alpha[t] or b1.rho[s] != b2.rho[t]:
                    return None
                new[s] = t
        return new

    def search(i, phi, used):
        if i == len(orbits):
            return dict(phi)
        q0 = orbits[i]
        for t0 in b2.points:
            if t0 in used or b2.alpha[t0] != b1.alpha[q0] or b2.rho[t0] != b1.rho[q0]:
                continue
            new = propagate(q0, t0, phi, used)
            if new is None:
                continue
            phi.update(new)
            res = search(i + 1, phi, used | set(new.values()))
            if res is not None:
                return res
            for s in new:
                del phi[s]
        return None

    res = search(0, {}, set())
    if res is None:
        return None
    return np.array([res[q] for q in b1.points])


def are_isomorphic(b1: MoritaBitorsor, b2: MoritaBitorsor) -> bool:
    return find_isomorphism(b1, b2) is not None


def check_covering(b: MoritaBitorsor) -> None:
    """Raise StructuralError unless rho (and alpha, when Y has a graph) are length-preserving graph coverings
    and both actions map Q-edges to Q-edges."""
    gq = b.graph
    if gq is None:
        raise StructuralError("bitorsor carries no graph on Q")
    for q in b.points:
        nbrs = gq.neighbors(q)
        for anchor, base, label in ((b.rho, b.x_graph, "rho"), (b.alpha, b.y_graph, "alpha")):
            if base is None:
                continue
            images = [int(anchor[r]) for r in nbrs]
            target = base.neighbors(int(anchor[q]))
            if sorted(images) != target:
                raise StructuralError(f"{label} is not a covering at point {q}: neighbours map to {sorted(images)}, "
                                      f"base neighbours {target}")
            for r in nbrs:
                if abs(gq.length(q, r) - base.length(int(anchor[q]), int(anchor[r]))) > 1e-12:
                    raise StructuralError(f"edge {(q, r)} length is not pulled back along {label}")
    for table, label in ((b.left, "left"), (b.right, "right")):
        for u, v, _ in gq.edge_list():
            for row in table:
                if not gq.has_edge(int(row[u]), int(row[v])):
                    raise StructuralError(f"{label} action maps edge {(u, v)} to a non-edge")


def lift_graph(b: MoritaBitorsor, edges=None) -> MoritaBitorsor:
    """Attach a graph to Q making the anchors coverings.

    ``edges`` is an explicit list of (q, q') pairs; lengths are pulled back
    from X. Without it, each X-edge is lifted at every q by choosing the
    unique rho-preimage neighbour whose alpha image is adjacent in Y.
    """
    if b.x_graph is None:
        raise GeometryError("lift_graph needs a graph on X")
    gx = b.x_graph
    out = {}
    if edges is not None:
        for q1, q2 in edges:
            x1, x2 = int(b.rho[q1]), int(b.rho[q2])
            if not gx.has_edge(x1, x2):
                raise StructuralError(f"edge {(q1, q2)} does not lie over an edge of X")
            out[frozenset((int(q1), int(q2)))] = gx.length(x1, x2)
    else:
        if b.y_graph is None:
            raise GeometryError("deriving a lift needs graphs on both X and Y")
        for q in b.points:
            x = int(b.rho[q])
            for x2 in gx.neighbors(x):
                cands = [q2 for q2 in b.rho_fiber(x2) if b.y_graph.has_edge(int(b.alpha[q]), int(b.alpha[q2]))]
                if len(cands) != 1:
                    raise StructuralError(f"X-edge {(x, x2)} has {len(cands)} admissible lifts at point {q}")
                out[frozenset((q, cands[0]))] = gx.length(x, x2)
    lifted = b.with_graph(MetricGraph(b.n_points, out, require_connected=False))
    check_covering(lifted)
    return lifted
