"""M1-M5 checks for two crossed-product spectral triples joined by a bitorsor."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import point_mass
from .bimodule import check_imprimitivity
from .bitorsor import MoritaBitorsor, PreconditionError
from .dirac import ContractError, SpectralTriple, approximate_sign, invariant_triple, weighted_norm
from .geometry import DiscreteOrbifold, singular_locus
from .induction import chi_iso, induced_dirac, induced_grading, u_phi

TOL = 1e-10
M3_RATIO = 1.1
M4_GAP = 0.2
MIN_WEYL_EIGS = 8


def check_m1(b: MoritaBitorsor, rng=None, n_samples: int = 100) -> dict:
    error = None
    try:
        rep = check_imprimitivity(b, rng=rng, n_samples=n_samples)
    except PreconditionError as exc:
        return {"passed": False, "error": str(exc)}
    except ContractError as exc:
        # invalid bitorsor: still report which axioms break and where
        error = str(exc)
        rep = check_imprimitivity(b, rng=rng, n_samples=n_samples, strict=False)
    out = {k: rep[k] for k in ("axiom1", "axiom2", "axiom3", "axiom4", "norm_equivalence")}
    out["passed"] = rep["passed"] and error is None
    if error is not None:
        out["error"] = error
    return out


@dataclass
class Intertwiner:
    matrix: np.ndarray  # induced orthonormal coordinates -> H_2
    chi: object
    induced_dirac: np.ndarray  # on the induced space
    induced_grading: np.ndarray


def _intertwiner(b, t1, t2, alignment=None) -> Intertwiner:
    ci = chi_iso(b, t1)
    push = ci.pushforward
    A = np.eye(push.dim) if alignment is None else np.asarray(alignment, dtype=complex)
    if A.shape != (t2.dim, push.dim):
        raise ContractError(f"alignment maps {push.dim} section coordinates to {t2.dim}, got shape {A.shape}")
    W = A @ ci.matrix / np.sqrt(ci.scale)
    d_ind = ci.pull(induced_dirac(b, t1, push))
    w_ind = ci.pull(induced_grading(b, t1, push))
    return Intertwiner(W, ci, d_ind, w_ind)


def check_m2(b: MoritaBitorsor, t1: SpectralTriple, t2: SpectralTriple, alignment=None, tol: float = TOL) -> dict:
    """Unitary from the induced space onto H_2 intertwining the Xi-algebra, D and omega."""
    try:
        it = _intertwiner(b, t1, t2, alignment)
    except ContractError as exc:
        return {"passed": False, "error": str(exc)}
    W = it.matrix
    space = it.chi.space
    unit = float(np.abs(W.conj().T @ t2.metric @ W - np.eye(W.shape[1])).max())
    alg = 0.0
    for arrow in t2.groupoid.arrows():
        a = point_mass(t2.groupoid, arrow)
        alg = max(alg, float(np.abs(W @ space.left_action(a) - t2.rep(a) @ W).max()))
    dscale = max(1.0, float(np.abs(t2.D).max()))
    dres = float(np.abs(W @ it.induced_dirac - t2.D @ W).max()) / dscale
    gres = float(np.abs(W @ it.induced_grading - t2.omega @ W).max())
    worst = max(unit, alg, dres, gres)
    return {"passed": bool(worst <= tol), "unitarity": unit, "algebra_residual": alg,
            "dirac_residual": dres, "grading_residual": gres, "chi_scale": it.chi.scale,
            "max_residual": worst}


def circle_modes(b: MoritaBitorsor, ks=(0, 1, 2)) -> list:
    """u_k(q) = exp(2 pi i k rho(q) / |X|): smooth functions on Q for cycle-ordered X."""
    n = b.right_groupoid.n_points
    return [np.exp(2j * np.pi * k * b.rho / n) for k in ks]


def connection_defects(b: MoritaBitorsor, t1: SpectralTriple, t2: SpectralTriple, modes=None,
                       alignment=None) -> dict:
    """||T_u F_1 - F~_2 T_u|| and ||T_u* F~_2 - F_1 T_u*|| for each u in ``modes``."""
    it = _intertwiner(b, t1, t2, alignment)
    space = it.chi.space
    W = it.matrix
    F1 = approximate_sign(t1.D, t1.metric)
    F2_on_h2 = approximate_sign(t2.D, t2.metric)
    F2 = np.linalg.solve(W, F2_on_h2 @ W)  # transported to the induced space
    modes = circle_modes(b) if modes is None else modes
    out = []
    for u in modes:
        Tu, Ta = space.T(u), space.T_adjoint(u)
        d1 = weighted_norm(Tu @ F1 - F2 @ Tu, None, t1.metric)
        d2 = weighted_norm(Ta @ F2 - F1 @ Ta, t1.metric, None)
        out.append((float(d1), float(d2)))
    return {"defects": out, "max_defect": max(max(d) for d in out),
            "dirac_norm": weighted_norm(t1.D, t1.metric, t1.metric)}


def check_m3(family, modes=None, ratio: float = M3_RATIO) -> dict:
    """``family`` is a list of (b, t1, t2) at increasing mesh size.

    With one entry the defects are only reported (compactness is automatic in
    finite dimension); with several, the defect must not grow by more than
    ``ratio`` between successive refinements.
    """
    rows = []
    for b, t1, t2 in family:
        try:
            d = connection_defects(b, t1, t2, None if modes is None else modes(b))
        except ContractError as exc:
            return {"passed": False, "error": str(exc)}
        rows.append({"n": t1.dirac.graph.n_vertices, **d})
    ratios = [rows[i + 1]["max_defect"] / rows[i]["max_defect"] if rows[i]["max_defect"] > 0 else
              (0.0 if rows[i + 1]["max_defect"] == 0 else np.inf) for i in range(len(rows) - 1)]
    finite = all(np.isfinite(r["max_defect"]) for r in rows)
    ok = finite and all(r <= ratio for r in ratios)
    return {"passed": bool(ok), "rows": rows, "ratios": [float(r) for r in ratios],
            "semantics": "refinement-bounded" if len(rows) > 1 else "single-mesh"}


def weyl_exponent(eigs, fraction: float = 0.5):
    """Slope of log N(L) against log L over the lower part of the nonzero spectrum.

    Returns (exponent, number of eigenvalues used) or (None, count) if there
    are fewer than eight usable eigenvalues.
    """
    a = np.sort(np.abs(np.asarray(eigs, dtype=float)))
    a = a[a > 1e-9 * max(1.0, a.max(initial=0))]
    if len(a) < MIN_WEYL_EIGS:
        return None, len(a)
    a = a[: max(MIN_WEYL_EIGS, int(len(a) * fraction))]
    levels = np.unique(np.round(a, 10))
    counts = np.searchsorted(a, levels + 1e-9, side="right")
    if len(levels) < 3:
        return None, len(a)
    slope = np.polyfit(np.log(levels), np.log(counts), 1)[0]
    return float(slope), len(a)


def check_m4(t1: SpectralTriple, t2: SpectralTriple, gap: float = M4_GAP) -> dict:
    from .dirac import spectrum

    d1, n1 = weyl_exponent(spectrum(t1.D, t1.metric))
    d2, n2 = weyl_exponent(spectrum(t2.D, t2.metric))
    if d1 is not None and d2 is not None:
        return {"passed": bool(abs(d1 - d2) <= gap), "status": "weyl", "exponents": [d1, d2]}
    if t1.base_dimension is not None and t2.base_dimension is not None:
        return {"passed": t1.base_dimension == t2.base_dimension, "status": "declared",
                "exponents": [d1, d2], "declared": [t1.base_dimension, t2.base_dimension]}
    return {"passed": False, "status": "inconclusive", "usable_eigenvalues": [n1, n2]}


def check_m5(b: MoritaBitorsor, t1: SpectralTriple, t2: SpectralTriple, tol: float = TOL) -> dict:
    try:
        u = u_phi(b, t1, t2)
    except ContractError as exc:
        return {"passed": False, "error": str(exc)}
    dscale = max(1.0, float(np.abs(t2.D).max()))
    res = {"isometry": u.isometry_defect, "dirac": u.dirac_residual / dscale, "grading": u.grading_residual,
           "algebra": u.algebra_residual}
    ok = all(v <= tol for v in res.values()) and abs(u.measured_scale - u.scale) <= tol
    out = {"passed": bool(ok), "scale": u.scale, "measured_scale": u.measured_scale, "residuals": res}
    if not ok:
        out["spectral_gap"] = u.spectrum_gap
    return out


def smoothness_verdict(t1: SpectralTriple, quotient: SpectralTriple = None, tol: float = TOL) -> dict:
    """Free actions reduce to the invariant triple; a nonempty singular locus gives a negative verdict."""
    orb = DiscreteOrbifold(t1.dirac.graph, t1.groupoid.action)
    locus = singular_locus(orb)
    out = {"free": locus.is_empty, "singular_vertices": locus.vertices, "pointlike": locus.pointlike}
    if not locus.is_empty:
        out["verdict"] = False
        return out
    if quotient is not None:
        s1 = invariant_triple(t1).spectrum()
        s2 = invariant_triple(quotient).spectrum()
        match = len(s1) == len(s2) and float(np.abs(s1 - s2).max(initial=0)) <= tol * max(1.0, np.abs(s1).max())
        out["spectral_match"] = bool(match)
        out["verdict"] = bool(match)
    else:
        out["verdict"] = True
    return out


@dataclass
class MoritaReport:
    m1: dict
    m2: dict
    m3: dict
    m4: dict
    m5: dict
    smoothness: dict = field(default=None)

    @property
    def passed(self) -> bool:
        return all(m["passed"] for m in (self.m1, self.m2, self.m3, self.m4, self.m5))

    def to_dict(self) -> dict:
        d = {"M1": self.m1, "M2": self.m2, "M3": self.m3, "M4": self.m4, "M5": self.m5, "passed": self.passed}
        if self.smoothness is not None:
            d["smoothness"] = self.smoothness
        return d


def full_report(b: MoritaBitorsor, t1: SpectralTriple, t2: SpectralTriple, family=None, rng=None,
                n_samples: int = 100, tol: float = TOL) -> MoritaReport:
    """Run M1-M5. ``family`` optionally supplies refinements for M3."""
    m1 = check_m1(b, rng=rng, n_samples=n_samples)
    m2 = check_m2(b, t1, t2, tol=tol)
    m3 = check_m3(family if family is not None else [(b, t1, t2)])
    m4 = check_m4(t1, t2)
    m5 = check_m5(b, t1, t2, tol=tol)
    smooth = None
    if b.K.order == 1 or b.G.order == 1:
        side = t1 if b.K.order == 1 else t2
        other = t2 if b.K.order == 1 else t1
        smooth = smoothness_verdict(side, other, tol=tol)
    return MoritaReport(m1, m2, m3, m4, m5, smooth)
