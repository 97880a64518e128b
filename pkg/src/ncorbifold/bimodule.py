"""The bimodule C(Q) of a bitorsor: both actions, both algebra-valued pairings,
and a numerical check of the imprimitivity axioms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import AlgebraElement, StructuralError, convolve, cstar_norm, random_element, regular_representation
from .bitorsor import MoritaBitorsor, PreconditionError, require_valid

POSITIVITY_TOL = 1e-10
EXACT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BimoduleElement:
    bitorsor: MoritaBitorsor
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.bitorsor.n_points,):
            raise StructuralError(f"bimodule element needs {self.bitorsor.n_points} values, got {v.shape}")
        object.__setattr__(self, "values", v)

    def _check(self, other):
        if other.bitorsor is not self.bitorsor:
            raise StructuralError("bimodule elements over different bitorsors")

    def __add__(self, other):
        self._check(other)
        return BimoduleElement(self.bitorsor, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return BimoduleElement(self.bitorsor, self.values - other.values)

    def __mul__(self, scalar):
        return BimoduleElement(self.bitorsor, self.values * scalar)

    __rmul__ = __mul__


def random_bimodule_element(b: MoritaBitorsor, rng) -> BimoduleElement:
    return BimoduleElement(b, rng.standard_normal(b.n_points) + 1j * rng.standard_normal(b.n_points))


def delta(b: MoritaBitorsor, q: int) -> BimoduleElement:
    v = np.zeros(b.n_points, dtype=complex)
    v[q] = 1.0
    return BimoduleElement(b, v)


def right_action(f: BimoduleElement, a: AlgebraElement) -> BimoduleElement:
    """(f.a)(q) = w_G sum_g a(g^-1, rho(q)) f(q.(g, g^-1 rho(q)))."""
    b = f.bitorsor
    if not a.groupoid.same_as(b.right_groupoid):
        raise StructuralError("right action by an element of the wrong groupoid")
    G = b.G
    out = np.zeros(b.n_points, dtype=complex)
    for g in G.elements:
        out += a.values[G.inverse[g], b.rho] * f.values[b.right[g]]
    return BimoduleElement(b, a.groupoid.weight * out)


def left_action(a: AlgebraElement, f: BimoduleElement) -> BimoduleElement:
    """(a.f)(q) = w_K sum_k a(k, k^-1 alpha(q)) f((k^-1, alpha(q)).q)."""
    b = f.bitorsor
    if not a.groupoid.same_as(b.left_groupoid):
        raise StructuralError("left action by an element of the wrong groupoid")
    K, kact = b.K, b.left_groupoid.action.table
    out = np.zeros(b.n_points, dtype=complex)
    for k in K.elements:
        kinv = K.inverse[k]
        out += a.values[k, kact[kinv, b.alpha]] * f.values[b.left[kinv]]
    return BimoduleElement(b, a.groupoid.weight * out)


def pairing_theta(f: BimoduleElement, g: BimoduleElement) -> AlgebraElement:
    """(f, g)_Theta(h, x) = w_K sum over q' in rho^-1(h.x) of conj f(q') g(q'.(h, x))."""
    f._check(g)
    b = f.bitorsor
    G, act = b.G, b.right_groupoid.action.table
    out = np.zeros(b.right_groupoid.shape, dtype=complex)
    cf = np.conj(f.values)
    for h in G.elements:
        xs = act[G.inverse[h], b.rho]
        np.add.at(out[h], xs, cf * g.values[b.right[h]])
    return AlgebraElement(b.right_groupoid, b.left_groupoid.weight * out)


def pairing_xi(f: BimoduleElement, g: BimoduleElement) -> AlgebraElement:
    """_Xi(f, g)(k, y) = w_G sum over q' in alpha^-1(k.y) of f(q') conj g((k^-1, k.y).q').

    The shifted point sits in the conjugated slot; this is the placement for which
    u (v, w)_Theta = _Xi(u, v) w and _Xi(c u, v) = c _Xi(u, v) hold.
    """
    f._check(g)
    b = f.bitorsor
    K, kact = b.K, b.left_groupoid.action.table
    out = np.zeros(b.left_groupoid.shape, dtype=complex)
    cg = np.conj(g.values)
    for k in K.elements:
        kinv = K.inverse[k]
        ys = kact[kinv, b.alpha]
        np.add.at(out[k], ys, f.values * cg[b.left[kinv]])
    return AlgebraElement(b.left_groupoid, b.right_groupoid.weight * out)


def pairing_choice_deviation(f: BimoduleElement, g: BimoduleElement) -> tuple[float, float]:
    """Evaluate both pairings pointwise from every admissible base point q and
    return the largest spread between choices (Theta side, Xi side)."""
    b = f.bitorsor
    K, G = b.K, b.G
    act, kact = b.right_groupoid.action.table, b.left_groupoid.action.table
    wK, wG = b.left_groupoid.weight, b.right_groupoid.weight
    dev_t = dev_x = 0.0
    for h in G.elements:
        for x in range(b.right_groupoid.n_points):
            vals = []
            for q in b.rho_fiber(act[h, x]):
                s = 0j
                for k in K.elements:
                    p = b.left[K.inverse[k], q]  # tau^-1 . q with tau = (k, k^-1 alpha(q))
                    s += np.conj(f.values[p]) * g.values[b.right[h, p]]
                vals.append(wK * s)
            dev_t = max(dev_t, float(np.max(np.abs(np.array(vals) - vals[0]))) if vals else 0.0)
    for k in K.elements:
        for y in range(b.left_groupoid.n_points):
            vals = []
            for q in b.alpha_fiber(kact[k, y]):
                s = 0j
                for gg in G.elements:
                    p = b.right[gg, q]  # q . sigma, sigma in Theta^{rho(q)}
                    s += f.values[p] * np.conj(g.values[b.left[K.inverse[k], p]])
                vals.append(wG * s)
            dev_x = max(dev_x, float(np.max(np.abs(np.array(vals) - vals[0]))) if vals else 0.0)
    return dev_t, dev_x


def _min_eig(mat: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T)).min())


def _rank(vectors, tol=1e-9) -> int:
    m = np.array(vectors)
    s = np.linalg.svd(m, compute_uv=False)
    return int((s > tol * max(1.0, s.max())).sum())


def check_imprimitivity(b: MoritaBitorsor, rng=None, n_samples: int = 100, n_norm_samples: int = 200,
                        strict: bool = True) -> dict:
    """Numerical imprimitivity axioms 1-4 plus norm equivalence.

    Positivity and norm inequalities are tested in the left regular
    representation of each convolution algebra. With ``strict=False`` the
    bitorsor laws are not checked first, so corrupted tables produce axiom
    residuals and witnesses instead of an exception.
    """
    if strict:
        require_valid(b)
    for side, gpd in (("right", b.right_groupoid), ("left", b.left_groupoid)):
        if not gpd.action.is_effective:
            raise PreconditionError(f"{side} action is not effective; positivity checks need a faithful representation")
    rng = np.random.default_rng(0) if rng is None else rng
    theta, xi = b.right_groupoid, b.left_groupoid
    rnd = lambda: random_bimodule_element(b, rng)
    report = {}

    # axiom 1: sesquilinearity, hermiticity, module compatibility, positivity
    herm = lin = compat = 0.0
    floor_t = floor_x = np.inf
    choice = 0.0
    for i in range(n_samples):
        f, g, h = rnd(), rnd(), rnd()
        lam = complex(rng.standard_normal(), rng.standard_normal())
        a, c = random_element(theta, rng), random_element(xi, rng)
        fg_t, gf_t = pairing_theta(f, g), pairing_theta(g, f)
        fg_x, gf_x = pairing_xi(f, g), pairing_xi(g, f)
        herm = max(herm, np.abs(fg_t.star.values - gf_t.values).max(), np.abs(fg_x.star.values - gf_x.values).max())
        lin = max(lin,
                  np.abs(pairing_theta(f, g + h * lam).values - fg_t.values - lam * pairing_theta(f, h).values).max(),
                  np.abs(pairing_xi(f + g * lam, h).values - pairing_xi(f, h).values
                         - lam * pairing_xi(g, h).values).max())
        compat = max(compat,
                     np.abs(pairing_theta(f, right_action(g, a)).values - convolve(fg_t, a).values).max(),
                     np.abs(pairing_xi(left_action(c, f), g).values - convolve(c, fg_x).values).max())
        floor_t = min(floor_t, _min_eig(regular_representation(pairing_theta(f, f))))
        floor_x = min(floor_x, _min_eig(regular_representation(pairing_xi(f, f))))
        if i < 5:
            choice = max(choice, *pairing_choice_deviation(f, g))
    ok1 = max(herm, lin, compat, choice) <= EXACT_TOL * 10 and min(floor_t, floor_x) >= -POSITIVITY_TOL
    report["axiom1"] = {"passed": bool(ok1), "hermiticity": float(herm), "linearity": float(lin),
                        "module_compatibility": float(compat), "choice_independence": float(choice),
                        "positivity_floor_theta": float(floor_t), "positivity_floor_xi": float(floor_x)}

    # axiom 2: pairings span the full algebras
    deltas = [delta(b, q) for q in b.points]
    span_t = _rank([pairing_theta(u, v).values.ravel() for u in deltas for v in deltas])
    span_x = _rank([pairing_xi(u, v).values.ravel() for u in deltas for v in deltas])
    report["axiom2"] = {"passed": span_t == theta.n_arrows and span_x == xi.n_arrows,
                        "span_theta": span_t, "dim_theta": theta.n_arrows,
                        "span_xi": span_x, "dim_xi": xi.n_arrows}

    # axiom 3: ||c||^2 (u,u) - (cu, cu) >= 0 on both sides
    floor3 = np.inf
    for _ in range(n_samples // 4 or 1):
        u = rnd()
        a, c = random_element(theta, rng), random_element(xi, rng)
        m = cstar_norm(c) ** 2 * regular_representation(pairing_theta(u, u)) - regular_representation(
            pairing_theta(left_action(c, u), left_action(c, u)))
        floor3 = min(floor3, _min_eig(m) / max(1.0, np.abs(m).max()))
        ua = right_action(u, a)
        m = cstar_norm(a) ** 2 * regular_representation(pairing_xi(u, u)) - regular_representation(pairing_xi(ua, ua))
        floor3 = min(floor3, _min_eig(m) / max(1.0, np.abs(m).max()))
    report["axiom3"] = {"passed": bool(floor3 >= -POSITIVITY_TOL), "relative_floor": float(floor3)}

    # axiom 4: u (v, w)_Theta = _Xi(u, v) w
    res4, witness4 = 0.0, None
    for _ in range(n_samples):
        u, v, w = rnd(), rnd(), rnd()
        lhs = right_action(u, pairing_theta(v, w))
        rhs = left_action(pairing_xi(u, v), w)
        diff = np.abs(lhs.values - rhs.values)
        if diff.max() > res4:
            res4, witness4 = float(diff.max()), int(np.argmax(diff))
    report["axiom4"] = {"passed": bool(res4 <= EXACT_TOL), "max_residual": res4}
    if res4 > EXACT_TOL:
        report["axiom4"]["witness_point"] = witness4

    # norm equivalence between ||(f,f)_Theta||^1/2 and ||_Xi(f,f)||^1/2
    ratios = []
    for _ in range(n_norm_samples):
        f = rnd()
        nt, nx = cstar_norm(pairing_theta(f, f)), cstar_norm(pairing_xi(f, f))
        ratios.append(np.sqrt(nt / nx))
    report["norm_equivalence"] = {"passed": bool(np.isfinite(ratios).all() and min(ratios) > 0),
                                  "ratio_min": float(min(ratios)), "ratio_max": float(max(ratios))}
    report["passed"] = all(report[k]["passed"] for k in ("axiom1", "axiom2", "axiom3", "axiom4"))
    return report
