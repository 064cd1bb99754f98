"""Parallel symmetric 2-tensors at a point, and the irreducibility certificate.

Two independent routes bound the space of parallel symmetric forms at ``p``:

* ``invariance_solve``: a parallel ``alpha`` is annihilated by every curvature
  endomorphism ``R(e_i, e_j)`` (and, at order 2, by every ``(nabla_m R)(e_i, e_j)``),
  acting as a derivation.  The null space of that linear system on Sym^2 is an
  upper bound, exact on locally symmetric fixtures.
* ``transport_holonomy_oracle``: parallel transport around small coordinate
  rectangles; parallel forms are invariant under the resulting holonomy.

``certify`` decides maximal rank of J_xi from omega_{d-1} and checks that a
positive verdict is matched by a one-dimensional invariance space.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .linalg_point import (
    DEFAULT_ISO_TOL,
    DEFAULT_RANK_TOL,
    IsotropicFieldWarning,
    max_rank_certificate,
    orthonormal_frame,
)
from .manifold import ChartManifold, PointGeometry

NULL_RTOL = 1e-8


class ConsistencyError(RuntimeError):
    """A maximal-rank certificate disagreed with the computed parallel space."""


class IntegrationError(RuntimeError):
    pass


def sym_basis(d: int) -> np.ndarray:
    """Frobenius-orthonormal basis of symmetric d x d matrices, shape (N, d, d)."""
    out = []
    for i in range(d):
        for j in range(i, d):
            B = np.zeros((d, d))
            if i == j:
                B[i, i] = 1.0
            else:
                B[i, j] = B[j, i] = 2 ** -0.5
            out.append(B)
    return np.array(out)


@dataclass(frozen=True)
class ParallelTensorSpace:
    dimension: int
    basis: list[np.ndarray]
    method: str
    residuals: list[float]
    metric_distance: float  # ||g - proj(g)||_F / ||g||_F
    singular_values: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "method": self.method,
            "residuals": list(self.residuals),
            "metric_distance": self.metric_distance,
        }


def curvature_endomorphisms(geo: PointGeometry, order: int) -> np.ndarray:
    d = geo.g.shape[0]
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    mats = [geo.riemann_up[:, i, j, :] for i, j in pairs]
    if order >= 2:
        nR = geo.nabla_riemann
        mats += [nR[m][:, i, j, :] for m in range(d) for i, j in pairs]
    if not mats:
        return np.zeros((0, d, d))
    return np.array(mats)


def _null_space(L: np.ndarray, rtol: float):
    N = L.shape[1]
    if L.size == 0:
        return np.eye(N), np.zeros(0)
    _, s, Vt = np.linalg.svd(L, full_matrices=True)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return np.eye(N), s
    rank = int(np.sum(s > rtol * smax))
    return Vt[rank:].T, s


def _g_aligned(alphas: list[np.ndarray], g: np.ndarray):
    """Frobenius-orthonormal basis of span(alphas), first element toward proj(g)."""
    if not alphas:
        return [], 1.0
    A = np.array([a.reshape(-1) for a in alphas]).T
    Q, _ = np.linalg.qr(A)
    gv = g.reshape(-1)
    coef = Q.T @ gv
    proj = Q @ coef
    dist = float(np.linalg.norm(gv - proj) / np.linalg.norm(gv))
    if np.linalg.norm(proj) > 0:
        first = proj / np.linalg.norm(proj)
        Q2, _ = np.linalg.qr(np.column_stack([first, Q]))
        Q2 = Q2[:, : Q.shape[1]]
        if Q2[:, 0] @ first < 0:
            Q2[:, 0] *= -1
        Q = Q2
    d = g.shape[0]
    return [Q[:, k].reshape(d, d) for k in range(Q.shape[1])], dist


def invariance_solve(M: ChartManifold, p, order: int = 2, rtol: float = NULL_RTOL) -> ParallelTensorSpace:
    """Symmetric forms annihilated by the curvature (and its derivative at order 2)."""
    if order not in (1, 2):
        raise ValueError(f"invariance order must be 1 or 2, got {order}")
    geo = M.geometry(p, 3 if order >= 2 else 2)
    return invariance_solve_geometry(geo, order, rtol)


def invariance_solve_geometry(geo: PointGeometry, order: int = 2, rtol: float = NULL_RTOL):
    d = geo.g.shape[0]
    E, _ = orthonormal_frame(geo.metric)
    Einv = np.linalg.inv(E)
    A = curvature_endomorphisms(geo, order)
    A_frame = np.einsum("ij,mjk,kl->mil", Einv, A, E)
    basis = sym_basis(d)
    iu = np.triu_indices(d)
    # each column: the derivation action of all endomorphisms on one basis form
    cols = []
    for B in basis:
        act = np.einsum("mji,jk->mik", A_frame, B) + np.einsum("ij,mjk->mik", B, A_frame)
        cols.append(act[:, iu[0], iu[1]].reshape(-1))
    L = np.array(cols).T if A.shape[0] else np.zeros((0, len(basis)))
    null, s = _null_space(L, rtol)
    alphas = []
    for v in null.T:
        a_frame = np.einsum("n,nij->ij", v, basis)
        alphas.append(Einv.T @ a_frame @ Einv)
    aligned, dist = _g_aligned(alphas, geo.g)
    residuals = []
    for a in aligned:
        if A.shape[0]:
            r = np.einsum("mji,jk->mik", A, a) + np.einsum("ij,mjk->mik", a, A)
            residuals.append(float(np.max(np.abs(r))))
        else:
            residuals.append(0.0)
    return ParallelTensorSpace(
        len(aligned), aligned, f"curvature-invariance order {order}", residuals, dist, s
    )


# --------------------------------------------------------------------------
# loop transport


def _rk4_transport(M: ChartManifold, x0, x1, T, steps):
    dx = x1 - x0
    h = 1.0 / steps

    def rhs(s, T):
        G = PointGeometry(M, x0 + s * dx, 1).christoffel
        if not np.all(np.isfinite(G)):
            raise IntegrationError(f"non-finite Christoffel symbols at {x0 + s * dx}")
        A = np.einsum("kij,i->kj", G, dx)
        return -A @ T

    for n in range(steps):
        s = n * h
        k1 = rhs(s, T)
        k2 = rhs(s + h / 2, T + h / 2 * k1)
        k3 = rhs(s + h / 2, T + h / 2 * k2)
        k4 = rhs(s + h, T + h * k3)
        T = T + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return T


@dataclass(frozen=True)
class LoopTransport:
    plane: tuple[int, int]
    signs: tuple[int, int]
    radius: float
    matrix: np.ndarray
    isometry_defect: float  # max |H^T g H - g|


def transport_holonomy_oracle(
    M: ChartManifold, p, loops: int, radius: float, steps_per_side: int = 64
) -> list[LoopTransport]:
    """Transport around coordinate rectangles of side ``radius`` based at ``p``.

    Loops cycle through coordinate planes (a, b), a < b, and then through the
    four orientations, so ``loops`` may exceed the number of planes.
    """
    x = M.point(p)
    d = M.dim
    planes = [(a, b) for a in range(d) for b in range(a + 1, d)]
    if not planes:
        return []
    orientations = [(1, 1), (-1, 1), (1, -1), (-1, -1)]
    steps = max(64, int(steps_per_side))
    g = M.metric_jets(x, 0)[0]
    out = []
    for k in range(loops):
        a, b = planes[k % len(planes)]
        sa, sb = orientations[(k // len(planes)) % 4]
        ea = np.zeros(d)
        eb = np.zeros(d)
        ea[a] = sa * radius
        eb[b] = sb * radius
        corners = [x, x + ea, x + ea + eb, x + eb, x]
        if not all(M.contains(c) for c in corners):
            raise IntegrationError(f"loop at {x} in plane {(a, b)} leaves the domain")
        T = np.eye(d)
        for c0, c1 in zip(corners[:-1], corners[1:]):
            T = _rk4_transport(M, c0, c1, T, steps)
        defect = float(np.max(np.abs(T.T @ g @ T - g)))
        out.append(LoopTransport((a, b), (sa, sb), radius, T, defect))
    return out


def transport_invariant_space(transports, g: np.ndarray, rtol: float = 1e-6) -> list[np.ndarray]:
    """Symmetric forms with H^T alpha H = alpha for every transport H."""
    d = g.shape[0]
    basis = sym_basis(d)
    iu = np.triu_indices(d)
    cols = []
    for B in basis:
        col = [(t.matrix.T @ B @ t.matrix - B)[iu] for t in transports]
        cols.append(np.concatenate(col) if col else np.zeros(0))
    L = np.array(cols).T
    null, _ = _null_space(L, rtol)
    return [np.einsum("n,nij->ij", v, basis) for v in null.T]


def transport_defect(alpha: np.ndarray, transports) -> float:
    """max ||H^T alpha H - alpha||_F / ||alpha||_F over the loops."""
    nrm = np.linalg.norm(alpha)
    return max(
        (float(np.linalg.norm(t.matrix.T @ alpha @ t.matrix - alpha) / nrm) for t in transports),
        default=0.0,
    )


# --------------------------------------------------------------------------
# certificate


@dataclass(frozen=True)
class IrreducibilityCertificate:
    point: np.ndarray
    xi: np.ndarray
    omega_last: float
    xi_norm: float
    verdict: str  # "certified_irreducible" | "inconclusive"
    rank_verdict: str
    parallel_dimension: int | None = None
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "omega_last": self.omega_last,
            "xi_norm": self.xi_norm,
            "verdict": self.verdict,
        }


def _field_vector(M: ChartManifold, p, xi):
    if isinstance(xi, str):
        return M.field_at(xi, p)[0]
    return np.asarray(xi, dtype=float)


def certify(
    M: ChartManifold,
    p,
    xi,
    rank_tol: float = DEFAULT_RANK_TOL,
    iso_tol: float = DEFAULT_ISO_TOL,
    order: int = 2,
    space: ParallelTensorSpace | None = None,
) -> tuple[IrreducibilityCertificate, ParallelTensorSpace]:
    """Run the rank criterion for J_xi at ``p`` and cross-check with invariance_solve.

    Returns the certificate and the parallel space.  Raises ConsistencyError if a
    certified point has a parallel space of dimension other than 1.
    """
    x = M.point(p)
    v = _field_vector(M, x, xi)
    if not np.any(v):
        raise ValueError("xi must be non-zero")
    geo = M.geometry(x, 3 if order >= 2 else 2)
    J = geo.jacobi_matrix(v)
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IsotropicFieldWarning)
        cert = max_rank_certificate(J, v, geo.metric, rank_tol, iso_tol)
    if any(issubclass(w.category, IsotropicFieldWarning) for w in caught):
        notes.append("ISOTROPIC_FIELD")
    verdict = "certified_irreducible" if cert.maximal and not cert.isotropic else "inconclusive"
    if space is None:
        space = invariance_solve_geometry(geo, order)
    if verdict == "certified_irreducible" and space.dimension != 1:
        raise ConsistencyError(
            f"{M.name} at {x}: maximal-rank J_xi but parallel space has dimension {space.dimension}"
        )
    return (
        IrreducibilityCertificate(
            x, v, cert.omega_last, cert.xi_norm, verdict, cert.verdict, space.dimension,
            tuple(notes),
        ),
        space,
    )


def report(cert: IrreducibilityCertificate, space: ParallelTensorSpace) -> dict:
    return {
        "dimension": space.dimension,
        "residuals": list(space.residuals),
        "certificate": cert.to_dict(),
    }


@dataclass(frozen=True)
class CollinearityReport:
    annihilation: float   # max |alpha(xi, J Y)|
    collinearity: float   # max |alpha(xi, X) - eps alpha(xi,xi) g(xi, X)|
    jacobi_identity: float  # max |alpha(J Y, X) - eps alpha(xi,xi) g(J Y, X)|
    constant: float       # eps alpha(xi, xi) for unit xi
    maximal: bool


def collinearity_check(M: ChartManifold, p, xi, alpha, rank_tol: float = DEFAULT_RANK_TOL) -> CollinearityReport:
    """Evaluate the three identities relating alpha, g and J_xi, with xi rescaled to g(xi,xi) = +-1."""
    alpha = np.asarray(alpha, dtype=float)
    if np.max(np.abs(alpha - alpha.T)) > 1e-12 * max(1.0, np.max(np.abs(alpha))):
        raise ValueError("alpha must be symmetric")
    x = M.point(p)
    v = _field_vector(M, x, xi)
    geo = M.geometry(x, 2)
    g = geo.g
    n2 = v @ g @ v
    if n2 == 0:
        raise ValueError("xi is isotropic; the identities need g(xi, xi) != 0")
    eps = float(np.sign(n2))
    u = v / np.sqrt(abs(n2))
    J = geo.jacobi_matrix(u)
    c = eps * (u @ alpha @ u)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IsotropicFieldWarning)
        cert = max_rank_certificate(J, u, geo.metric, rank_tol)
    return CollinearityReport(
        annihilation=float(np.max(np.abs(u @ alpha @ J))),
        collinearity=float(np.max(np.abs(alpha @ u - c * (g @ u)))),
        jacobi_identity=float(np.max(np.abs(J.T @ alpha - c * (J.T @ g)))),
        constant=float(c),
        maximal=cert.maximal,
    )
