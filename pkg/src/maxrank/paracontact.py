"""Almost (para-)contact metric structures (phi, xi, eta, g) with epsilon = +-1.

epsilon = -1 is the almost contact metric case, epsilon = +1 the almost
para-contact metric case.  Axioms checked::

    phi^2 = epsilon (Id - eta (x) xi),   eta(xi) = 1
    g(phi X, phi Y) = -epsilon (g(X, Y) - eta(X) eta(Y))

Exterior-derivative conventions: ``deta[i, j] = (d_i eta_j - d_j eta_i) / 2`` and
3-forms are alternations normalized the same way on both sides, so
``dPhi = 2 eta ^ Phi`` and ``deta = Phi`` read componentwise.  The normality
tensor is ``[phi, phi] - 2 epsilon deta (x) xi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import numpy as np
import scipy.linalg

from .expr import ExprError, ScalarExpression, parse
from .manifold import (
    ChartManifold,
    PointGeometry,
    SpecError,
    matrix_jets,
    vector_jets,
)


class AxiomViolation(ValueError):
    def __init__(self, axiom: str, point, magnitude: float):
        self.axiom = axiom
        self.point = np.asarray(point)
        self.magnitude = magnitude
        super().__init__(
            f"AXIOM_VIOLATION {axiom} at {np.array2string(self.point, precision=6)}: "
            f"magnitude {magnitude:.3g}"
        )


class WrongEpsilon(ValueError):
    pass


@dataclass(frozen=True)
class ParaContactStructure:
    manifold: ChartManifold
    epsilon: int
    phi: tuple[tuple[ScalarExpression, ...], ...]
    xi: tuple[ScalarExpression, ...]
    eta: tuple[ScalarExpression, ...]

    @property
    def n(self) -> int:
        return (self.manifold.dim - 1) // 2

    def at(self, p) -> "StructureAtPoint":
        M = self.manifold
        x = M.point(p)
        phi, dphi = matrix_jets(M, self.phi, x, 1)
        xi, dxi, _ = vector_jets(M, self.xi, x, 1)
        eta, deta, _ = vector_jets(M, self.eta, x, 1)
        g, dg, _, _ = M.metric_jets(x, 1)
        return StructureAtPoint(self.epsilon, x, g, dg, phi, dphi, xi, dxi, eta, deta)


@dataclass(frozen=True)
class StructureAtPoint:
    """Numeric values at one point; ``d*[a, ...]`` are coordinate partials ``d_a``."""

    epsilon: int
    x: np.ndarray
    g: np.ndarray
    dg: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    xi: np.ndarray
    dxi: np.ndarray
    eta: np.ndarray
    deta: np.ndarray


def structure_from_dict(M: ChartManifold, data: Mapping[str, Any], signature=None):
    path = "structure"
    if not isinstance(data, Mapping):
        raise SpecError("expected an object", path)
    unknown = set(data) - {"epsilon", "phi", "xi", "eta"}
    if unknown:
        raise SpecError(f"unknown field(s) {sorted(unknown)}", path)
    for key in ("epsilon", "phi", "xi", "eta"):
        if key not in data:
            raise SpecError(f"missing required field {key!r}", path)
    eps = data["epsilon"]
    if eps not in (-1, 1) or isinstance(eps, bool):
        raise SpecError("epsilon must be -1 or +1", f"{path}.epsilon")
    d = M.dim
    if d % 2 != 1:
        raise SpecError(f"almost para-contact structures need odd dimension, got {d}", path)

    def expr(src, where):
        if isinstance(src, (int, float)) and not isinstance(src, bool):
            src = repr(float(src))
        if not isinstance(src, str):
            raise SpecError("expected expression string", where)
        try:
            return parse(src, M.coords)
        except ExprError as exc:
            raise SpecError(str(exc), where) from None

    def vec(arr, where):
        if not isinstance(arr, list) or len(arr) != d:
            raise SpecError(f"expected list of {d} expressions", where)
        return tuple(expr(s, f"{where}[{i}]") for i, s in enumerate(arr))

    rows = data["phi"]
    if not isinstance(rows, list) or len(rows) != d:
        raise SpecError(f"expected {d} rows", f"{path}.phi")
    phi = tuple(vec(r, f"{path}.phi[{i}]") for i, r in enumerate(rows))
    return ParaContactStructure(
        M, int(eps), phi, vec(data["xi"], f"{path}.xi"), vec(data["eta"], f"{path}.eta")
    )


def with_structure(M: ChartManifold, structure: ParaContactStructure) -> ChartManifold:
    M2 = replace(M)
    object.__setattr__(M2, "structure", replace(structure, manifold=M2))
    return M2


# --------------------------------------------------------------------------
# validation


AXIOMS = (
    "eta_xi",
    "phi_squared",
    "metric_compat",
    "phi_xi",
    "eta_phi",
    "minimal_polynomial",
    "signature",
    "eigenspaces",
)


@dataclass
class ValidationReport:
    max_violation: dict[str, float] = field(default_factory=lambda: dict.fromkeys(AXIOMS, 0.0))
    worst_point: dict[str, np.ndarray] = field(default_factory=dict)
    points_checked: int = 0
    tol: float = 1e-9

    @property
    def violated(self) -> list[str]:
        return [a for a in AXIOMS if self.max_violation[a] > self.tol]

    @property
    def ok(self) -> bool:
        return not self.violated

    def violations(self) -> list[AxiomViolation]:
        return [AxiomViolation(a, self.worst_point[a], self.max_violation[a]) for a in self.violated]

    def raise_for_violations(self):
        if not self.ok:
            raise self.violations()[0]

    def record(self, axiom, value, point):
        if value > self.max_violation[axiom] or (
            axiom not in self.worst_point and value >= self.max_violation[axiom]
        ):
            self.max_violation[axiom] = float(value)
            self.worst_point[axiom] = np.asarray(point)


def axiom_residuals(sp: StructureAtPoint) -> dict[str, float]:
    eps = sp.epsilon
    d = len(sp.xi)
    n = (d - 1) // 2
    I = np.eye(d)
    P = I - np.outer(sp.xi, sp.eta)  # Id - xi (x) eta as a matrix acting on vectors
    phi, g = sp.phi, sp.g
    scale = max(1.0, np.linalg.norm(phi, 2) ** 2)
    res = {
        "eta_xi": abs(sp.eta @ sp.xi - 1.0),
        "phi_squared": np.max(np.abs(phi @ phi - eps * P)) / scale,
        "metric_compat": np.max(
            np.abs(phi.T @ g @ phi + eps * (g - np.outer(sp.eta, sp.eta)))
        ) / max(1.0, np.linalg.norm(g, 2) * scale),
        "phi_xi": np.max(np.abs(phi @ sp.xi)),
        "eta_phi": np.max(np.abs(sp.eta @ phi)),
        "minimal_polynomial": np.max(np.abs(phi @ phi @ phi - eps * phi)) / scale ** 1.5,
    }
    w = np.linalg.eigvalsh(g)
    negatives = int(np.sum(w < 0))
    res["signature"] = 0.0
    res["eigenspaces"] = 0.0
    if eps == 1:
        # signature (n, n+1) and phi = +-1 on n-dimensional isotropic eigenspaces
        res["signature"] = float(abs(negatives - n))
        worst = 0.0
        for lam in (1.0, -1.0):
            V = scipy.linalg.null_space(phi - lam * I, rcond=1e-9)
            worst = max(worst, abs(V.shape[1] - n))
            if V.shape[1]:
                worst = max(worst, np.max(np.abs(V.T @ g @ V)) / max(1.0, np.linalg.norm(g, 2)))
        res["eigenspaces"] = float(worst)
    else:
        res["signature"] = float(negatives)  # the almost contact metric case is Riemannian
    return {k: float(v) for k, v in res.items()}


def validate_structure(S: ParaContactStructure, points=None, tol: float = 1e-9) -> ValidationReport:
    """Check every axiom on ``points`` (default: the manifold's sample grid)."""
    from ._parallel import parallel_map

    M = S.manifold
    if M.dim % 2 != 1:
        raise ValueError("almost para-contact structures need odd dimension")
    pts = M.sample_grid() if points is None else np.atleast_2d(points)
    report = ValidationReport(tol=tol)
    for p, res in zip(pts, parallel_map(lambda q: axiom_residuals(S.at(q)), pts)):
        for k, v in res.items():
            report.record(k, v, p)
    report.points_checked = len(pts)
    return report


# --------------------------------------------------------------------------
# derived tensors


@dataclass(frozen=True)
class DerivedTensors:
    point: np.ndarray
    Phi: np.ndarray            # Phi[i, j] = g(e_i, phi e_j)
    dPhi: np.ndarray           # 3-form components
    deta: np.ndarray           # 2-form components
    eta_wedge_Phi: np.ndarray  # 3-form components
    h: np.ndarray
    h_prime: np.ndarray
    nijenhuis: np.ndarray      # [k, i, j] = [phi, phi](e_i, e_j)^k
    normality: np.ndarray      # nijenhuis - 2 eps deta (x) xi
    volume: float              # eta ^ Phi^n evaluated on the coordinate basis

    @property
    def normality_defect(self) -> float:
        return float(np.max(np.abs(self.normality)))


def _cyclic(T3):
    return (T3 + T3.transpose(1, 2, 0) + T3.transpose(2, 0, 1)) / 3.0


def derived_tensors(S: ParaContactStructure, p) -> DerivedTensors:
    sp = S.at(p)
    eps = sp.epsilon
    g, dg, phi, dphi = sp.g, sp.dg, sp.phi, sp.dphi
    xi, dxi, eta, deta_p = sp.xi, sp.dxi, sp.eta, sp.deta
    d = len(xi)
    n = (d - 1) // 2

    Phi = g @ phi
    dPhi_p = np.einsum("aik,kj->aij", dg, phi) + np.einsum("ik,akj->aij", g, dphi)
    # (dPhi)_abc = alt of d_a Phi_bc
    dPhi = _cyclic(dPhi_p)
    deta = 0.5 * (deta_p - deta_p.T)
    eta_wedge_Phi = _cyclic(np.einsum("a,bc->abc", eta, Phi))

    # (L_xi phi)^k_i = xi^a d_a phi^k_i - phi^a_i d_a xi^k + phi^k_a d_i xi^a
    lie_phi = (
        np.einsum("a,aki->ki", xi, dphi)
        - np.einsum("ai,ak->ki", phi, dxi)
        + np.einsum("ka,ia->ki", phi, dxi)
    )
    h = 0.5 * lie_phi
    h_prime = h @ phi

    # [phi,phi](e_i,e_j)^k = phi^l_i d_l phi^k_j - phi^l_j d_l phi^k_i
    #                        - phi^k_l (d_i phi^l_j - d_j phi^l_i)
    N = (
        np.einsum("li,lkj->kij", phi, dphi)
        - np.einsum("lj,lki->kij", phi, dphi)
        - np.einsum("kl,ilj->kij", phi, dphi)
        + np.einsum("kl,jli->kij", phi, dphi)
    )
    normality = N - 2.0 * eps * np.einsum("ij,k->kij", deta, xi)

    # eta ^ Phi^n = n! Pf([[0, eta], [-eta, Phi]]) dx^1 ^ ... ^ dx^d
    B = np.zeros((d + 1, d + 1))
    B[0, 1:] = eta
    B[1:, 0] = -eta
    B[1:, 1:] = 0.5 * (Phi - Phi.T)
    volume = math.factorial(n) * math.sqrt(max(np.linalg.det(B), 0.0))
    return DerivedTensors(
        sp.x, Phi, dPhi, deta, eta_wedge_Phi, h, h_prime, N, normality, volume
    )


# --------------------------------------------------------------------------
# classes

LABELS = (
    "para-contact metric",
    "almost para-cosymplectic",
    "almost para-Kenmotsu",
    "normal",
)

_COMBINED = {
    "para-contact metric": "para-Sasakian",
    "almost para-cosymplectic": "para-cosymplectic",
    "almost para-Kenmotsu": "para-Kenmotsu",
}


@dataclass(frozen=True)
class Classification:
    labels: frozenset[str]
    defects: Mapping[str, float]

    @property
    def names(self) -> list[str]:
        """Labels with normal variants merged, e.g. ``para-Kenmotsu``."""
        out = []
        for base, combined in _COMBINED.items():
            if base in self.labels:
                out.append(combined if "normal" in self.labels else base)
        if not out and "normal" in self.labels:
            out.append("normal")
        return out


def class_defects(S: ParaContactStructure, points) -> dict[str, float]:
    worst = {
        "deta=Phi": 0.0, "deta=0": 0.0, "dPhi=0": 0.0, "dPhi=2eta^Phi": 0.0, "normality": 0.0,
    }
    for p in np.atleast_2d(points):
        D = derived_tensors(S, p)
        vals = {
            "deta=Phi": np.max(np.abs(D.deta - D.Phi)),
            "deta=0": np.max(np.abs(D.deta)),
            "dPhi=0": np.max(np.abs(D.dPhi)),
            "dPhi=2eta^Phi": np.max(np.abs(D.dPhi - 2.0 * D.eta_wedge_Phi)),
            "normality": D.normality_defect,
        }
        for k, v in vals.items():
            worst[k] = max(worst[k], float(v))
    return worst


def classify(S: ParaContactStructure, points=None, tol: float = 1e-8) -> Classification:
    pts = S.manifold.sample_grid() if points is None else points
    dfx = class_defects(S, pts)
    labels = set()
    if dfx["deta=Phi"] <= tol:
        labels.add("para-contact metric")
    if dfx["deta=0"] <= tol and dfx["dPhi=0"] <= tol:
        labels.add("almost para-cosymplectic")
    if dfx["deta=0"] <= tol and dfx["dPhi=2eta^Phi"] <= tol:
        labels.add("almost para-Kenmotsu")
    if dfx["normality"] <= tol:
        labels.add("normal")
    return Classification(frozenset(labels), dfx)


# --------------------------------------------------------------------------
# projectors


def projectors(S: ParaContactStructure, p, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """P_+- = (Id - xi (x) eta +- phi) / 2, the spectral projectors of phi on ker eta."""
    if S.epsilon != 1:
        raise WrongEpsilon("projectors P_+- exist only for epsilon = +1")
    sp = S.at(p)
    d = len(sp.xi)
    Pi = np.eye(d) - np.outer(sp.xi, sp.eta)
    Pp = 0.5 * (Pi + sp.phi)
    Pm = 0.5 * (Pi - sp.phi)
    scale = max(1.0, np.linalg.norm(sp.phi, 2))
    for name, r in (
        ("P+^2 = P+", Pp @ Pp - Pp),
        ("P-^2 = P-", Pm @ Pm - Pm),
        ("P+P- = 0", Pp @ Pm),
        ("P-P+ = 0", Pm @ Pp),
    ):
        if np.max(np.abs(r)) > tol * scale:
            raise AxiomViolation(f"projector {name}", sp.x, float(np.max(np.abs(r))))
    return Pp, Pm


# --------------------------------------------------------------------------
# nullity fit


@dataclass(frozen=True)
class NullityParams:
    kappa: float
    mu: float
    nu: float
    residual: float
    flags: Mapping[str, str]  # coefficient -> "identifiable" | "unidentifiable"
    scale: float = 0.0        # ||R|| at the fit point

    @property
    def identifiable(self) -> dict[str, bool]:
        return {k: v == "identifiable" for k, v in self.flags.items()}


def nullity_design(geo: PointGeometry, xi, eta, h, h_prime):
    """Design matrix (columns: identity, h, h' terms) and target R(e_i, e_j) xi over i<j."""
    d = len(xi)
    rows_A, rows_b = [], []
    R_xi = np.einsum("lijk,k->lij", geo.riemann_up, xi)  # [l, i, j] = (R(e_i,e_j) xi)^l
    I = np.eye(d)
    for i in range(d):
        for j in range(i + 1, d):
            cols = []
            for T in (I, h, h_prime):
                cols.append(eta[j] * T[:, i] - eta[i] * T[:, j])
            rows_A.append(np.stack(cols, axis=1))
            rows_b.append(R_xi[:, i, j])
    return np.concatenate(rows_A), np.concatenate(rows_b)


def fit_nullity_point(S: ParaContactStructure, p) -> NullityParams:
    geo = S.manifold.geometry(p, 2)
    D = derived_tensors(S, p)
    sp = S.at(p)
    A, b = nullity_design(geo, sp.xi, sp.eta, D.h, D.h_prime)
    coef, *_ = np.linalg.lstsq(A, b, rcond=1e-10)
    resid = float(np.max(np.abs(A @ coef - b))) if b.size else 0.0
    # a coefficient is unidentifiable when the design null space has a component along it
    _, s, Vt = np.linalg.svd(A, full_matrices=True)
    smax = s[0] if s.size and s[0] > 0 else 0.0
    rank = int(np.sum(s > 1e-10 * max(smax, 1.0)))
    null = Vt[rank:]
    flags = {}
    for k, name in enumerate(("kappa", "mu", "nu")):
        flags[name] = "unidentifiable" if null.size and np.max(np.abs(null[:, k])) > 1e-8 else "identifiable"
    return NullityParams(
        float(coef[0]), float(coef[1]), float(coef[2]), resid, flags, geo.curvature_norm()
    )


@dataclass(frozen=True)
class NullityFit:
    per_point: list[NullityParams]
    points: np.ndarray
    is_nullity_space: bool
    max_residual: float


def nullity_fit(S: ParaContactStructure, points=None, rtol: float = 1e-7) -> NullityFit:
    from ._parallel import parallel_map

    pts = S.manifold.sample_grid(per_axis=3) if points is None else np.atleast_2d(points)
    fits = parallel_map(lambda q: fit_nullity_point(S, q), pts)
    worst = max((f.residual for f in fits), default=0.0)
    ok = all(f.residual <= rtol * max(f.scale, 1.0) for f in fits)
    return NullityFit(fits, pts, ok, worst)
