"""Pointwise multilinear algebra for (possibly indefinite) inner products.

Exterior powers are represented by compound matrices on the basis of
lexicographically ordered k-subsets of the coordinate basis.  The entry
``(I, K)`` of ``compound_matrix(J, k)`` is the minor of ``J`` with rows ``I``
and columns ``K``.

Characteristic polynomial coefficients follow one convention throughout::

    det(x Id - J) = sum_k (-1)^k omega_k x^(d-k),   omega_k = tr(Lambda^k J)

so ``omega_1`` is the trace and ``omega_d`` the determinant.  No path here
diagonalizes ``J``: self-adjoint operators of an indefinite form need not be
semisimple.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

DEFAULT_RANK_TOL = 1e-9
DEFAULT_ISO_TOL = 1e-9


class JacobiKernelViolation(ValueError):
    """The operator does not annihilate the field it is supposed to come from."""


class ZeroTopCompound(ValueError):
    """Lambda^(d-1) J vanishes, so there is no rank-one factorization."""


class NotRankOne(ValueError):
    pass


class IsotropicFieldWarning(UserWarning):
    """g(xi, xi) is zero to tolerance; the rank criterion is not asserted."""


@dataclass(frozen=True)
class MetricSignature:
    negatives: int
    positives: int

    @property
    def dimension(self) -> int:
        return self.negatives + self.positives

    def __str__(self):
        return f"({self.negatives},{self.positives})"


def signature_of(matrix: np.ndarray, rtol: float = 1e-12) -> MetricSignature:
    ev = np.linalg.eigvalsh(matrix)
    scale = max(np.max(np.abs(ev)), 1e-300)
    if np.any(np.abs(ev) <= rtol * scale):
        raise np.linalg.LinAlgError("bilinear form is degenerate")
    return MetricSignature(int(np.sum(ev < 0)), int(np.sum(ev > 0)))


@dataclass(frozen=True)
class PointBilinear:
    """Non-degenerate symmetric bilinear form at a point."""

    matrix: np.ndarray
    signature: MetricSignature = None  # filled in from the eigenvalues

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"bilinear form must be square, got shape {m.shape}")
        if not np.array_equal(m, m.T):
            asym = np.max(np.abs(m - m.T))
            if asym > 1e-12 * max(1.0, np.max(np.abs(m))):
                raise ValueError(f"bilinear form is not symmetric (max asymmetry {asym:.3g})")
            m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        sig = signature_of(m)
        if self.signature is not None and self.signature != sig:
            raise ValueError(f"declared signature {self.signature} but eigenvalues give {sig}")
        object.__setattr__(self, "signature", sig)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, x, y) -> float:
        return float(np.asarray(x) @ self.matrix @ np.asarray(y))

    @classmethod
    def euclidean(cls, d: int) -> "PointBilinear":
        return cls(np.eye(d))


@dataclass(frozen=True)
class Endomorphism:
    matrix: np.ndarray
    metric: PointBilinear | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"endomorphism must be square, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other):
        return self.matrix @ np.asarray(other)

    def adjoint_defect(self) -> float:
        """max |g(Je_i, e_j) - g(e_i, Je_j)| relative to ||J|| ||g||."""
        if self.metric is None:
            raise ValueError("self-adjointness needs a metric")
        G = self.metric.matrix
        A = self.matrix.T @ G - G @ self.matrix
        scale = max(np.linalg.norm(self.matrix, 2) * np.linalg.norm(G, 2), 1e-300)
        return float(np.max(np.abs(A)) / scale)

    def is_self_adjoint(self, tol: float = 1e-10) -> bool:
        return self.adjoint_defect() <= tol


def _as_matrix(J) -> np.ndarray:
    return J.matrix if isinstance(J, Endomorphism) else np.asarray(J, dtype=float)


@lru_cache(maxsize=None)
def subsets(d: int, k: int) -> np.ndarray:
    """Lexicographic k-subsets of range(d) as an (C(d,k), k) index array."""
    return np.array(list(combinations(range(d), k)), dtype=int).reshape(-1, k)


def compound_matrix(J, k: int) -> np.ndarray:
    """k-th compound (matrix of Lambda^k J on the k-subset basis)."""
    A = _as_matrix(J)
    d = A.shape[0]
    if not 1 <= k <= d:
        raise ValueError(f"compound order k={k} out of range 1..{d}")
    S = subsets(d, k)
    sub = A[S[:, None, :, None], S[None, :, None, :]]
    return np.linalg.det(sub)


def principal_minor_sums(J) -> np.ndarray:
    """omega_1..omega_d as sums of principal minors, i.e. traces of compounds."""
    A = _as_matrix(J)
    d = A.shape[0]
    out = np.empty(d)
    with np.errstate(divide="ignore", invalid="ignore"):  # singular minors are a valid 0
        for k in range(1, d + 1):
            S = subsets(d, k)
            out[k - 1] = np.linalg.det(A[S[:, :, None], S[:, None, :]]).sum()
    return out


def faddeev_leverrier(J) -> np.ndarray:
    """omega_1..omega_d from the Faddeev-LeVerrier recursion."""
    A = _as_matrix(J)
    d = A.shape[0]
    M = np.zeros_like(A)
    c = 1.0  # coefficient of x^(d-k+1) in det(x - A)
    out = np.empty(d)
    I = np.eye(d)
    for k in range(1, d + 1):
        M = A @ M + c * I
        c = -np.trace(A @ M) / k
        out[k - 1] = (-1) ** k * c
    return out


@dataclass(frozen=True)
class CharPoly:
    omegas: tuple[float, ...]

    @property
    def degree(self) -> int:
        return len(self.omegas)

    def coefficients(self) -> np.ndarray:
        """Monic coefficients of det(x - J), highest power first (numpy.polyval order)."""
        return np.array([1.0] + [(-1) ** k * w for k, w in enumerate(self.omegas, 1)])

    def __call__(self, x: float) -> float:
        return float(np.polyval(self.coefficients(), x))

    @property
    def trace(self) -> float:
        return self.omegas[0]

    @property
    def determinant(self) -> float:
        return self.omegas[-1]


def char_poly(J) -> CharPoly:
    return CharPoly(tuple(float(w) for w in principal_minor_sums(J)))


def numerical_rank(J, rtol: float = 1e-8) -> int:
    s = np.linalg.svd(_as_matrix(J), compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


@dataclass(frozen=True)
class RankCertificate:
    verdict: str  # "maximal" | "deficient"
    omega_last: float
    xi_norm: float
    isotropic: bool
    threshold: float

    @property
    def maximal(self) -> bool:
        return self.verdict == "maximal"


def max_rank_certificate(
    J,
    xi,
    g: PointBilinear,
    rank_tol: float = DEFAULT_RANK_TOL,
    iso_tol: float = DEFAULT_ISO_TOL,
) -> RankCertificate:
    """Decide maximal rank (d-1) of a Jacobi-type operator from omega_{d-1}.

    Raises JacobiKernelViolation when ``J xi != 0``.  An isotropic ``xi`` gives a
    warning and ``isotropic=True``; the verdict is still computed but the
    equivalence with the numerical rank is not guaranteed then.
    """
    A = _as_matrix(J)
    xi = np.asarray(xi, dtype=float)
    d = A.shape[0]
    norm_J = np.linalg.norm(A, 2)
    norm_xi = np.linalg.norm(xi)
    if np.linalg.norm(A @ xi) > 1e-9 * max(norm_J * norm_xi, 1e-300):
        raise JacobiKernelViolation(
            f"J xi = {A @ xi} does not vanish (||J||={norm_J:.3g}, ||xi||={norm_xi:.3g})"
        )
    xi_norm = g(xi, xi)
    isotropic = abs(xi_norm) <= iso_tol * np.linalg.norm(g.matrix, 2) * norm_xi**2
    if isotropic:
        warnings.warn(
            f"isotropic field: g(xi, xi) = {xi_norm:.3g}", IsotropicFieldWarning, stacklevel=2
        )
    omega_last = float(principal_minor_sums(A)[d - 2]) if d >= 2 else 1.0
    threshold = rank_tol * norm_J ** (d - 1)
    maximal = norm_J > 0 and abs(omega_last) > threshold
    return RankCertificate(
        "maximal" if maximal else "deficient", omega_last, float(xi_norm), bool(isotropic),
        float(threshold),
    )


def omega_last_batch(Js) -> np.ndarray:
    """omega_{d-1} for a stack (N, d, d): sum of the d principal (d-1)-minors."""
    Js = np.asarray(Js, dtype=float)
    d = Js.shape[-1]
    if d < 2:
        return np.ones(Js.shape[0])
    keep = subsets(d, d - 1)  # (d, d-1)
    minors = Js[:, keep[:, :, None], keep[:, None, :]]
    return np.linalg.det(minors).sum(axis=1)


def rank_verdicts(Js, rank_tol: float = DEFAULT_RANK_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Batched form of the max_rank_certificate decision rule (no kernel or isotropy checks)."""
    Js = np.asarray(Js, dtype=float)
    d = Js.shape[-1]
    om = omega_last_batch(Js)
    norms = np.linalg.norm(Js, 2, axis=(1, 2)) if len(Js) else np.zeros(0)
    maximal = (norms > 0) & (np.abs(om) > rank_tol * norms ** (d - 1))
    return om, maximal


@dataclass(frozen=True)
class RankOneDecomposition:
    tau: np.ndarray
    W: np.ndarray
    pairing: float
    reconstruction_error: float  # relative Frobenius error of tau (x) W

    def outer(self) -> np.ndarray:
        # Lambda^(d-1) J (w) = tau(w) W, so the matrix is W tau^T
        return np.outer(self.W, self.tau)


def rank_one_decompose(J, tol: float = 1e-8) -> RankOneDecomposition:
    """Factor Lambda^(d-1) J = tau (x) W, gauge fixed by ||W|| = 1, first nonzero W_i > 0."""
    A = _as_matrix(J)
    d = A.shape[0]
    C = compound_matrix(A, d - 1)
    normC = np.linalg.norm(C)
    if normC <= 1e-12 * max(np.linalg.norm(A, 2), 1e-300) ** (d - 1) or normC == 0.0:
        raise ZeroTopCompound(f"||Lambda^{d - 1} J||_F = {normC:.3g}")
    U, s, Vt = np.linalg.svd(C)
    W = U[:, 0]
    tau = s[0] * Vt[0]
    lead = np.flatnonzero(np.abs(W) > 1e-12)[0]
    if W[lead] < 0:
        W, tau = -W, -tau
    err = float(np.linalg.norm(C - np.outer(W, tau)) / normC)
    if err > tol:
        raise NotRankOne(f"Lambda^{d - 1} J is not rank one (relative residual {err:.3g})")
    return RankOneDecomposition(tau, W, float(tau @ W), err)


def wedge_gram(g: PointBilinear, vectors) -> float:
    """g^(k)(X_1 ^ ... ^ X_k) = det[g(X_i, X_j)]."""
    X = np.atleast_2d(np.asarray(vectors, dtype=float))
    if X.shape[0] > g.dim:
        raise ValueError("more vectors than the dimension")
    return float(np.linalg.det(X @ g.matrix @ X.T))


def induced_form(g: PointBilinear, k: int) -> np.ndarray:
    """Matrix of g^(k) on the k-subset basis of Lambda^k."""
    return compound_matrix(g.matrix, k)


def orthonormal_frame(g: PointBilinear) -> tuple[np.ndarray, np.ndarray]:
    """Columns E with E^T g E = diag(signs); returns (E, signs)."""
    w, V = np.linalg.eigh(g.matrix)
    E = V / np.sqrt(np.abs(w))
    return E, np.sign(w)


def numerical_rank_agrees(J, certificate: RankCertificate, rtol: float = 1e-8) -> bool:
    r = numerical_rank(J, rtol)
    return (r == _as_matrix(J).shape[0] - 1) == certificate.maximal


def binomial(n: int, k: int) -> int:
    return math.comb(n, k)
