"""Single-chart pseudo-Riemannian manifolds and their curvature.

Index conventions (all arrays are plain numpy, coordinate basis):

* ``dg[a, i, j] = d_a g_ij``, ``d2g[a, b, i, j]``, ``d3g[a, b, c, i, j]``
* ``christoffel[k, i, j] = Gamma^k_ij`` so that ``nabla_{e_i} e_j = Gamma^k_ij e_k``
* ``riemann_up[l, i, j, k] = R^l_ijk`` with ``R(e_i, e_j) e_k = R^l_ijk e_l`` and
  ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y]``
* ``riemann_down[i, j, k, l] = g(R(e_i, e_j) e_k, e_l)``
* ``ricci[j, k] = R^i_ijk`` so that ``Ric(xi, xi) = tr J_xi``

With these conventions the unit sphere has ``g(R(X, Y) Y, X) > 0``.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .expr import FUNCTIONS, ExprError, ScalarExpression, derivative, jet_arrays, parse
from .linalg_point import Endomorphism, MetricSignature, PointBilinear, signature_of


class SpecError(ValueError):
    """Invalid manifold description; ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        where = path or "<root>"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"{where}: {message}")


class DegenerateMetric(ValueError):
    pass


@dataclass(frozen=True)
class ChartManifold:
    name: str
    coords: tuple[str, ...]
    metric: tuple[tuple[ScalarExpression, ...], ...]
    domain: Mapping[str, tuple[float, float]]
    fields: Mapping[str, tuple[ScalarExpression, ...]] = field(default_factory=dict)
    structure: Any = None  # paracontact.ParaContactStructure, attached after construction

    @property
    def dim(self) -> int:
        return len(self.coords)

    @cached_property
    def _metric_entries(self):
        return [(i, j, self.metric[i][j]) for i in range(self.dim) for j in range(i, self.dim)]

    @cached_property
    def _metric_derivatives(self):
        # d_c g_ij as trees, for third derivatives
        return [
            [(i, j, derivative(e, c)) for (i, j, e) in self._metric_entries]
            for c in self.coords
        ]

    def point(self, p) -> np.ndarray:
        if isinstance(p, Mapping):
            try:
                return np.array([float(p[c]) for c in self.coords])
            except KeyError as exc:
                raise ValueError(f"point is missing coordinate {exc.args[0]!r}") from None
        arr = np.asarray(p, dtype=float).reshape(-1)
        if arr.shape[0] != self.dim:
            raise ValueError(f"point has {arr.shape[0]} coordinates, manifold has {self.dim}")
        return arr

    def contains(self, p) -> bool:
        x = self.point(p)
        return all(lo < v < hi for v, (lo, hi) in zip(x, (self.domain[c] for c in self.coords)))

    def metric_jets(self, p, order: int = 2):
        """(g, dg, d2g, d3g) at ``p``; entries beyond ``order`` are None."""
        x = self.point(p)
        d = self.dim
        g = np.empty((d, d))
        dg = np.empty((d, d, d)) if order >= 1 else None
        d2g = np.empty((d, d, d, d)) if order >= 2 else None
        for i, j, e in self._metric_entries:
            v, gr, h = jet_arrays(e, self.coords, x, min(order, 2))
            g[i, j] = g[j, i] = v
            if dg is not None:
                dg[:, i, j] = dg[:, j, i] = gr
            if d2g is not None:
                d2g[:, :, i, j] = d2g[:, :, j, i] = h
        d3g = None
        if order >= 3:
            d3g = np.empty((d, d, d, d, d))
            for c, entries in enumerate(self._metric_derivatives):
                for i, j, e in entries:
                    _, _, h = jet_arrays(e, self.coords, x, 2)
                    d3g[:, :, c, i, j] = d3g[:, :, c, j, i] = h
        return g, dg, d2g, d3g

    def metric_at(self, p) -> PointBilinear:
        g = self.metric_jets(p, 0)[0]
        try:
            return PointBilinear(g)
        except np.linalg.LinAlgError as exc:
            raise DegenerateMetric(f"metric of {self.name} degenerate at {self.point(p)}") from exc

    def field_at(self, name: str, p, order: int = 0):
        """Components (and jets) of a named vector field."""
        try:
            comps = self.fields[name]
        except KeyError:
            raise KeyError(
                f"unknown field {name!r}; {self.name} defines {sorted(self.fields)}"
            ) from None
        return vector_jets(self, comps, p, order)

    def geometry(self, p, order: int = 2) -> "PointGeometry":
        return PointGeometry(self, self.point(p), order)

    def sample_grid(self, per_axis: int = 5, inset: float = 0.1, cap: int = 2000, seed: int = 0):
        """Deterministic grid, ``per_axis`` points per coordinate inside a 10% inset."""
        axes = []
        for c in self.coords:
            lo, hi = self.domain[c]
            w = hi - lo
            axes.append(np.linspace(lo + inset * w, hi - inset * w, per_axis))
        pts = np.array(list(product(*axes)))
        if len(pts) > cap:
            rng = np.random.default_rng(seed)
            pts = pts[np.sort(rng.choice(len(pts), cap, replace=False))]
        return pts

    def random_points(self, count: int, rng: np.random.Generator, inset: float = 0.1):
        lo = np.array([self.domain[c][0] for c in self.coords])
        hi = np.array([self.domain[c][1] for c in self.coords])
        w = hi - lo
        return rng.uniform(lo + inset * w, hi - inset * w, size=(count, self.dim))

    def signature_on_grid(self) -> MetricSignature:
        sigs = {self.metric_at(p).signature for p in self.sample_grid(cap=500)}
        if len(sigs) != 1:
            raise SpecError(f"metric signature changes across the domain: {sorted(map(str, sigs))}", "metric")
        return sigs.pop()


def vector_jets(M: ChartManifold, comps: Sequence[ScalarExpression], p, order: int = 0):
    """Returns (v, dv, d2v) with ``dv[a, k] = d_a v^k`` and ``d2v[a, b, k]``."""
    x = M.point(p)
    d = M.dim
    v = np.empty(d)
    dv = np.empty((d, d)) if order >= 1 else None
    d2v = np.empty((d, d, d)) if order >= 2 else None
    for k, e in enumerate(comps):
        val, gr, h = jet_arrays(e, M.coords, x, order)
        v[k] = val
        if dv is not None:
            dv[:, k] = gr
        if d2v is not None:
            d2v[:, :, k] = h
    return v, dv, d2v


def matrix_jets(M: ChartManifold, comps, p, order: int = 1):
    """Returns (T, dT) with ``dT[a, i, j] = d_a T[i][j]``."""
    x = M.point(p)
    d = M.dim
    T = np.empty((d, d))
    dT = np.empty((d, d, d)) if order >= 1 else None
    for i in range(d):
        for j in range(d):
            val, gr, _ = jet_arrays(comps[i][j], M.coords, x, min(order, 1))
            T[i, j] = val
            if dT is not None:
                dT[:, i, j] = gr
    return T, dT


# --------------------------------------------------------------------------
# pointwise geometry


class PointGeometry:
    """Connection and curvature data at one point.

    ``order`` is the number of metric derivatives evaluated: 2 gives the
    curvature, 3 adds its covariant derivative.
    """

    def __init__(self, M: ChartManifold, x: np.ndarray, order: int = 2):
        self.manifold = M
        self.x = x
        self.order = order
        g, dg, d2g, d3g = M.metric_jets(x, order)
        try:
            ginv = np.linalg.inv(g)
            sig = signature_of(g)
        except np.linalg.LinAlgError:
            raise DegenerateMetric(f"metric of {M.name} degenerate at {x}") from None
        self.g, self.dg, self.d2g, self.d3g = g, dg, d2g, d3g
        self.ginv = ginv
        self.signature = sig

        # Gamma_{l i j} = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
        low = 0.5 * (
            np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg
        )
        self._gamma_low = low
        self.christoffel = np.einsum("kl,lij->kij", ginv, low)
        if order >= 2:
            dginv = -np.einsum("kp,apq,ql->akl", ginv, dg, ginv)
            dlow = 0.5 * (
                np.einsum("aijl->alij", d2g) + np.einsum("ajil->alij", d2g) - d2g
            )
            self.dchristoffel = np.einsum("akl,lij->akij", dginv, low) + np.einsum(
                "kl,alij->akij", ginv, dlow
            )
            self._dginv = dginv
            self._dlow = dlow
            self._curvature()
        if order >= 3:
            self._curvature_derivative()

    @property
    def metric(self) -> PointBilinear:
        return PointBilinear(self.g, self.signature)

    def _curvature(self):
        G, dG = self.christoffel, self.dchristoffel
        # R^l_ijk = d_i G^l_jk - d_j G^l_ik + G^l_ip G^p_jk - G^l_jp G^p_ik
        R = (
            np.einsum("iljk->lijk", dG)
            - np.einsum("jlik->lijk", dG)
            + np.einsum("lip,pjk->lijk", G, G)
            - np.einsum("ljp,pik->lijk", G, G)
        )
        self.riemann_up = R
        self.riemann_down = np.einsum("mijk,ml->ijkl", R, self.g)
        self.ricci = np.einsum("iijk->jk", R)

    def _curvature_derivative(self):
        dg, d2g, d3g = self.dg, self.d2g, self.d3g
        ginv, dginv = self.ginv, self._dginv
        d2ginv = -(
            np.einsum("bkp,apq,ql->abkl", dginv, dg, ginv)
            + np.einsum("kp,abpq,ql->abkl", ginv, d2g, ginv)
            + np.einsum("kp,apq,bql->abkl", ginv, dg, dginv)
        )
        d2low = 0.5 * (
            np.einsum("abijl->ablij", d3g) + np.einsum("abjil->ablij", d3g) - d3g
        )
        d2G = (
            np.einsum("abkl,lij->abkij", d2ginv, self._gamma_low)
            + np.einsum("akl,blij->abkij", dginv, self._dlow)
            + np.einsum("bkl,alij->abkij", dginv, self._dlow)
            + np.einsum("kl,ablij->abkij", ginv, d2low)
        )
        self.d2christoffel = d2G
        G, dG, R = self.christoffel, self.dchristoffel, self.riemann_up
        dR = (
            np.einsum("miljk->mlijk", d2G)
            - np.einsum("mjlik->mlijk", d2G)
            + np.einsum("mlip,pjk->mlijk", dG, G)
            + np.einsum("lip,mpjk->mlijk", G, dG)
            - np.einsum("mljp,pik->mlijk", dG, G)
            - np.einsum("ljp,mpik->mlijk", G, dG)
        )
        self.d_riemann = dR
        # nabla_m R^l_ijk
        self.nabla_riemann = (
            dR
            + np.einsum("lmp,pijk->mlijk", G, R)
            - np.einsum("pmi,lpjk->mlijk", G, R)
            - np.einsum("pmj,lipk->mlijk", G, R)
            - np.einsum("pmk,lijp->mlijk", G, R)
        )

    def curvature_endomorphism(self, i: int, j: int) -> np.ndarray:
        """Matrix of R(e_i, e_j) acting on vectors."""
        return self.riemann_up[:, i, j, :]

    def jacobi_matrix(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return np.einsum("lijk,j,k->li", self.riemann_up, xi, xi)

    def curvature_norm(self) -> float:
        return float(np.linalg.norm(self.riemann_down))

    def symmetry_residuals(self) -> dict[str, float]:
        Rd = self.riemann_down
        return {
            "antisym_12": float(np.max(np.abs(Rd + Rd.transpose(1, 0, 2, 3)))),
            "antisym_34": float(np.max(np.abs(Rd + Rd.transpose(0, 1, 3, 2)))),
            "pair_sym": float(np.max(np.abs(Rd - Rd.transpose(2, 3, 0, 1)))),
            "bianchi_1": float(
                np.max(
                    np.abs(Rd + Rd.transpose(1, 2, 0, 3) + Rd.transpose(2, 0, 1, 3))
                )
            ),
            "christoffel_sym": float(
                np.max(np.abs(self.christoffel - self.christoffel.transpose(0, 2, 1)))
            ),
        }


@dataclass(frozen=True)
class CurvatureAtPoint:
    point: np.ndarray
    christoffel: np.ndarray
    riemann_up: np.ndarray
    riemann_down: np.ndarray
    ricci: np.ndarray
    residuals: Mapping[str, float]


def christoffel(M: ChartManifold, p) -> np.ndarray:
    return PointGeometry(M, M.point(p), 1).christoffel


def riemann(M: ChartManifold, p) -> CurvatureAtPoint:
    geo = PointGeometry(M, M.point(p), 2)
    return CurvatureAtPoint(
        geo.x, geo.christoffel, geo.riemann_up, geo.riemann_down, geo.ricci,
        geo.symmetry_residuals(),
    )


def jacobi_operator(M: ChartManifold, p, xi) -> Endomorphism:
    """J_xi X = R(X, xi) xi as a matrix acting on coordinate components."""
    geo = PointGeometry(M, M.point(p), 2)
    return Endomorphism(geo.jacobi_matrix(xi), geo.metric)


def metricity_residual(M: ChartManifold, p) -> float:
    """max |nabla_a g_ij| computed from the exact Christoffels."""
    geo = PointGeometry(M, M.point(p), 1)
    G = geo.christoffel
    ng = geo.dg - np.einsum("pai,pj->aij", G, geo.g) - np.einsum("paj,ip->aij", G, geo.g)
    return float(np.max(np.abs(ng)))


def covariant_derivative(M: ChartManifold, p, components, kind: str = "(0,2)") -> np.ndarray:
    """nabla T for a tensor field given componentwise as expressions.

    ``kind`` is ``"(0,2)"`` (result ``[a, i, j] = nabla_a T_ij``) or ``"(1,1)"``
    (rows upper, ``[a, i, j] = nabla_a T^i_j``).
    """
    d = M.dim
    if len(components) != d or any(len(row) != d for row in components):
        raise ValueError(f"tensor field needs {d}x{d} components")
    comps = [[_as_expr(c, M) for c in row] for row in components]
    T, dT = matrix_jets(M, comps, p, 1)
    G = christoffel(M, p)
    if kind == "(0,2)":
        return dT - np.einsum("pai,pj->aij", G, T) - np.einsum("paj,ip->aij", G, T)
    if kind == "(1,1)":
        return dT + np.einsum("iap,pj->aij", G, T) - np.einsum("paj,ip->aij", G, T)
    raise ValueError(f"unsupported tensor kind {kind!r}")


def _as_expr(c, M: ChartManifold) -> ScalarExpression:
    if isinstance(c, ScalarExpression):
        return c
    if isinstance(c, (int, float)):
        return parse(repr(float(c)))
    return parse(str(c), M.coords)


def second_covariant_derivative(M: ChartManifold, p, field_components) -> np.ndarray:
    """Components ``[a, b, c] = (nabla_a nabla_b Z)^c`` for a vector field Z.

    ``nabla^2_{X,Y} Z = X^a Y^b [a, b, :]``.
    """
    comps = [_as_expr(c, M) for c in field_components]
    v, dv, d2v = vector_jets(M, comps, p, 2)
    geo = PointGeometry(M, M.point(p), 2)
    G, dG = geo.christoffel, geo.dchristoffel
    # first derivative: N[b, c] = d_b v^c + G^c_bd v^d
    N = dv + np.einsum("cbd,d->bc", G, v)
    # d_a N[b, c]
    dN = d2v + np.einsum("acbd,d->abc", dG, v) + np.einsum("cbd,ad->abc", G, dv)
    return dN + np.einsum("cad,bd->abc", G, N) - np.einsum("dab,dc->abc", G, N)


def ricci_identity_residual(M: ChartManifold, p, Y, xi) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of (nabla^2_{Y,xi} - nabla^2_{xi,Y}) xi = R(Y, xi) xi at ``p``."""
    Ycomps = [_as_expr(c, M) for c in Y]
    xcomps = [_as_expr(c, M) for c in xi]
    H = second_covariant_derivative(M, p, xcomps)
    y, _, _ = vector_jets(M, Ycomps, p, 0)
    x, _, _ = vector_jets(M, xcomps, p, 0)
    lhs = np.einsum("a,b,abc->c", y, x, H) - np.einsum("a,b,abc->c", x, y, H)
    geo = PointGeometry(M, M.point(p), 2)
    rhs = np.einsum("lijk,i,j,k->l", geo.riemann_up, y, x, x)
    return lhs, rhs


def sectional_curvature(geo: PointGeometry, X, Y) -> float:
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    num = np.einsum("ijkl,i,j,k,l->", geo.riemann_down, X, Y, Y, X)
    gXX, gYY, gXY = X @ geo.g @ X, Y @ geo.g @ Y, X @ geo.g @ Y
    return float(num / (gXX * gYY - gXY * gXY))


# --------------------------------------------------------------------------
# JSON specs


def _require(obj, key, path, types):
    if key not in obj:
        raise SpecError(f"missing required field {key!r}", path)
    val = obj[key]
    if not isinstance(val, types) or (isinstance(val, bool) and bool not in _tuple(types)):
        raise SpecError(f"expected {_typename(types)}, got {type(val).__name__}", _join(path, key))
    return val


def _tuple(t):
    return t if isinstance(t, tuple) else (t,)


def _typename(types):
    return " or ".join(t.__name__ for t in _tuple(types))


def _join(path, key):
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else key


def _expr(src, path, coords):
    if isinstance(src, (int, float)) and not isinstance(src, bool):
        src = repr(float(src))
    if not isinstance(src, str):
        raise SpecError(f"expected expression string, got {type(src).__name__}", path)
    try:
        return parse(src, coords)
    except ExprError as exc:
        raise SpecError(str(exc), path) from None


def _expr_vector(arr, path, coords, d):
    if not isinstance(arr, list) or len(arr) != d:
        raise SpecError(f"expected list of {d} expressions", path)
    return tuple(_expr(s, _join(path, i), coords) for i, s in enumerate(arr))


def _expr_matrix(rows, path, coords, d):
    if not isinstance(rows, list) or len(rows) != d:
        raise SpecError(f"expected {d} rows", path)
    return tuple(_expr_vector(r, _join(path, i), coords, d) for i, r in enumerate(rows))


_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*")
_ALLOWED_KEYS = {"name", "dim", "coords", "metric", "domain", "fields", "structure"}


def manifold_from_dict(data: Mapping[str, Any], name: str = "<spec>") -> ChartManifold:
    """Validate a manifold description and build the chart."""
    if not isinstance(data, Mapping):
        raise SpecError("manifold spec must be a JSON object")
    unknown = set(data) - _ALLOWED_KEYS
    if unknown:
        raise SpecError(f"unknown field(s) {sorted(unknown)}", sorted(unknown)[0])
    d = _require(data, "dim", "", int)
    if d < 1:
        raise SpecError("dimension must be positive", "dim")
    coords = _require(data, "coords", "", list)
    if len(coords) != d:
        raise SpecError(f"expected {d} coordinate names, got {len(coords)}", "coords")
    for i, c in enumerate(coords):
        if not isinstance(c, str) or not _IDENT.fullmatch(c):
            raise SpecError(f"invalid coordinate name {c!r}", _join("coords", i))
        if c == "pi" or c in FUNCTIONS:
            raise SpecError(f"coordinate name {c!r} is reserved", _join("coords", i))
    if len(set(coords)) != d:
        raise SpecError("coordinate names must be distinct", "coords")
    coords = tuple(coords)
    metric = _expr_matrix(_require(data, "metric", "", list), "metric", coords, d)
    dom = _require(data, "domain", "", dict)
    domain = {}
    for c in coords:
        if c not in dom:
            raise SpecError(f"missing bounds for coordinate {c!r}", "domain")
        b = dom[c]
        if (
            not isinstance(b, list)
            or len(b) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in b)
        ):
            raise SpecError("expected [lo, hi]", _join("domain", c))
        lo, hi = float(b[0]), float(b[1])
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise SpecError(f"empty or unbounded interval [{lo}, {hi}]", _join("domain", c))
        domain[c] = (lo, hi)
    extra = set(dom) - set(coords)
    if extra:
        raise SpecError(f"bounds given for unknown coordinate(s) {sorted(extra)}", "domain")
    fields = {}
    for fname, comps in (data.get("fields") or {}).items():
        fields[fname] = _expr_vector(comps, _join("fields", fname), coords, d)
    M = ChartManifold(str(data.get("name", name)), coords, metric, domain, fields)
    _check_metric_symmetry(M)
    try:
        sig = M.signature_on_grid()
    except (DegenerateMetric, np.linalg.LinAlgError) as exc:
        raise SpecError(str(exc), "metric") from None
    except ExprError as exc:
        raise SpecError(f"metric cannot be evaluated on the domain: {exc}", "metric") from None
    if "structure" in data and data["structure"] is not None:
        from .paracontact import structure_from_dict

        object.__setattr__(M, "structure", structure_from_dict(M, data["structure"], sig))
    return M


def _check_metric_symmetry(M: ChartManifold):
    pts = M.sample_grid(per_axis=3, cap=50)
    for p in pts:
        for i in range(M.dim):
            for j in range(i + 1, M.dim):
                a = M.metric[i][j].evaluate(dict(zip(M.coords, p)))
                b = M.metric[j][i].evaluate(dict(zip(M.coords, p)))
                if abs(a - b) > 1e-12 * max(1.0, abs(a)):
                    raise SpecError(
                        f"metric is not symmetric: g[{i}][{j}]={a} but g[{j}][{i}]={b}",
                        f"metric[{i}][{j}]",
                    )


def load_manifold(source: str | Path) -> ChartManifold:
    """Load ``builtin:<name>`` from the catalog or a JSON file."""
    s = str(source)
    if s.startswith("builtin:"):
        from .catalog import get_model

        return get_model(s[len("builtin:"):])
    path = Path(s)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"malformed JSON: {exc.msg} (column {exc.colno})", "", exc.lineno) from None
    return manifold_from_dict(data, path.stem)
