"""Closed-form (kappa, mu, nu)-space analysis.

For a (kappa, mu, nu)-space the Jacobi operator of the characteristic field is::

    J X = -kappa eta(X) xi + (kappa Id + mu h + nu h') X

It has maximal rank exactly when ``kappa Id + mu h + nu h'`` is invertible on
ker eta.  The singular locus of ``kappa Id + mu h`` is the zero set of
``det(kappa Id + mu h) = sum_i c_i kappa^(n-i) mu^i`` with ``c_i = omega_i(h)``.

Two parameter families are shipped as fixtures, both in an adapted orthonormal
frame (xi = e_0, ker eta = span(e_1..e_2n)):

* ``"example2"``: contact metric (kappa, mu)-spaces, kappa <= 1, h with
  eigenvalues +-sqrt(1 - kappa) on ker eta;
* ``"example1"``: almost Kenmotsu (kappa, mu)'-spaces, kappa <= -1, h' with
  eigenvalues +-sqrt(-kappa - 1) on ker eta.  The grid ``mu`` multiplies h'.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
from scipy.spatial import cKDTree

from .linalg_point import (
    DEFAULT_RANK_TOL,
    Endomorphism,
    PointBilinear,
    char_poly,
    max_rank_certificate,
    rank_verdicts,
)
from .paracontact import NullityParams


class KernelViolation(ValueError):
    pass


def fmt(x: float) -> str:
    return format(float(x), ".12g")


def jacobi_closed_form(params: NullityParams, eta, xi, h, h_prime, metric: PointBilinear | None = None,
                       tol: float = 1e-9) -> Endomorphism:
    eta = np.asarray(eta, float)
    xi = np.asarray(xi, float)
    h = np.asarray(h, float)
    h_prime = np.asarray(h_prime, float)
    for name, T in (("h", h), ("h'", h_prime)):
        if np.linalg.norm(T @ xi) > tol * max(1.0, np.linalg.norm(T) * np.linalg.norm(xi)):
            raise KernelViolation(f"KERNEL_VIOLATION: {name} xi = {T @ xi} is not zero")
    k, m, n = params.kappa, params.mu, params.nu
    d = len(xi)
    J = -k * np.outer(xi, eta) + k * np.eye(d) + m * h + n * h_prime
    return Endomorphism(J, metric)


def params(kappa: float, mu: float = 0.0, nu: float = 0.0) -> NullityParams:
    return NullityParams(float(kappa), float(mu), float(nu), 0.0, {})


# --------------------------------------------------------------------------
# singular locus


@dataclass(frozen=True)
class SingularLocus:
    polynomial: tuple[float, ...]               # c_0 = 1, c_1, ..., c_n
    factored_lines: tuple[float, ...] | None    # spectrum of h when diagonalizable
    sample_points: tuple[tuple[float, float], ...]

    @property
    def degree(self) -> int:
        return len(self.polynomial) - 1

    def __call__(self, kappa: float, mu: float) -> float:
        n = self.degree
        return float(sum(c * kappa ** (n - i) * mu**i for i, c in enumerate(self.polynomial)))

    def to_text(self) -> str:
        n = self.degree
        terms = [f"{fmt(c)}*kappa^{n - i}*mu^{i}" for i, c in enumerate(self.polynomial)]
        return " + ".join(terms)

    def line_distance(self, kappa: float, mu: float) -> float:
        """min_i |kappa + lambda_i mu| (diagonalizable case only)."""
        if self.factored_lines is None:
            raise ValueError("h is not diagonalizable; use the polynomial")
        return min((abs(kappa + lam * mu) for lam in self.factored_lines), default=float("inf"))


def _real_spectrum_if_diagonalizable(h: np.ndarray, tol: float = 1e-9):
    w, V = np.linalg.eig(h)
    if np.max(np.abs(w.imag), initial=0.0) > tol * max(1.0, np.max(np.abs(w))):
        return None
    w = w.real
    if h.shape[0] and np.linalg.cond(V) > 1e8:
        return None
    # the diagonalization must actually reproduce h
    if h.shape[0] and np.max(np.abs((V * w) @ np.linalg.inv(V) - h)) > 1e-8 * max(1.0, np.max(np.abs(h))):
        return None
    return tuple(float(x) for x in np.sort(w))


def singular_locus(h) -> SingularLocus:
    h = np.asarray(h, float)
    cp = char_poly(h) if h.shape[0] else None
    poly = (1.0,) + (cp.omegas if cp else ())
    lines = _real_spectrum_if_diagonalizable(h)
    samples = []
    if lines is not None:
        for lam in sorted(set(np.round(lines, 12))):
            for mu in (-1.0, 1.0):
                samples.append((float(-lam * mu), mu))
    else:
        # roots in kappa at mu = 1
        roots = np.roots(np.array(poly))
        samples = [(float(r.real), 1.0) for r in roots if abs(r.imag) < 1e-9]
    return SingularLocus(tuple(float(c) for c in poly), lines, tuple(samples))


def restrict_to_kernel(T, xi, eta) -> np.ndarray:
    """Matrix of T on ker eta (T must preserve ker eta), in an orthonormal basis of ker eta."""
    T = np.asarray(T, float)
    B = scipy.linalg.null_space(np.atleast_2d(np.asarray(eta, float)))
    return B.T @ T @ B if B.size else np.zeros((0, 0))


# --------------------------------------------------------------------------
# fixtures


@dataclass(frozen=True)
class AdaptedFixture:
    xi: np.ndarray
    eta: np.ndarray
    phi: np.ndarray
    h: np.ndarray
    h_prime: np.ndarray

    @property
    def metric(self) -> PointBilinear:
        return PointBilinear.euclidean(len(self.xi))


def _adapted_phi(n: int) -> np.ndarray:
    d = 2 * n + 1
    phi = np.zeros((d, d))
    for i in range(1, n + 1):
        phi[n + i, i] = 1.0   # e_i -> e_{n+i}
        phi[i, n + i] = -1.0  # e_{n+i} -> -e_i
    return phi


def _split_diag(n: int, lam: float) -> np.ndarray:
    return np.diag([0.0] + [lam] * n + [-lam] * n)


def contact_fixture(kappa: float, n: int = 1) -> AdaptedFixture:
    """Contact metric (kappa, mu)-space data: h = diag(0, l, .., -l, ..), l = sqrt(1 - kappa)."""
    if kappa > 1:
        raise ValueError("contact metric (kappa, mu)-spaces need kappa <= 1")
    d = 2 * n + 1
    phi = _adapted_phi(n)
    h = _split_diag(n, math.sqrt(1.0 - kappa))
    e0 = np.eye(d)[0]
    return AdaptedFixture(e0, e0, phi, h, h @ phi)


def kenmotsu_prime_fixture(kappa: float, n: int = 1) -> AdaptedFixture:
    """Almost Kenmotsu (kappa, mu)'-space data: h' = diag(0, l, .., -l, ..), l = sqrt(-kappa - 1)."""
    if kappa > -1:
        raise ValueError("almost Kenmotsu (kappa, mu)'-spaces need kappa <= -1")
    d = 2 * n + 1
    phi = _adapted_phi(n)
    hp = _split_diag(n, math.sqrt(-kappa - 1.0))
    e0 = np.eye(d)[0]
    # h' = h phi and phi^2 = -Id on ker eta, so h = -h' phi
    return AdaptedFixture(e0, e0, phi, -hp @ phi, hp)


# --------------------------------------------------------------------------
# grid reports


@dataclass(frozen=True)
class LocusRow:
    kappa: float
    mu: float
    omega_last: float | None
    verdict: str  # maximal | deficient | skipped
    reason: str = ""


def _validity(which: str, kappa: float) -> str:
    if which == "example2" and kappa > 1:
        return "kappa > 1 is outside the contact metric (kappa, mu) range"
    if which == "example1" and kappa > -1:
        return "kappa > -1 is outside the almost Kenmotsu (kappa, mu)' range"
    return ""


def example_point(which: str, kappa: float, mu: float, n: int = 1,
                  rank_tol: float = DEFAULT_RANK_TOL) -> LocusRow:
    if which not in ("example1", "example2"):
        raise ValueError(f"unknown example {which!r}; expected example1 or example2")
    reason = _validity(which, kappa)
    if reason:
        return LocusRow(kappa, mu, None, "skipped", reason)
    if which == "example2":
        fx = contact_fixture(kappa, n)
        par = params(kappa, mu, 0.0)
    else:
        fx = kenmotsu_prime_fixture(kappa, n)
        par = params(kappa, 0.0, mu)
    J = jacobi_closed_form(par, fx.eta, fx.xi, fx.h, fx.h_prime, fx.metric)
    cert = max_rank_certificate(J, fx.xi, fx.metric, rank_tol)
    return LocusRow(kappa, mu, cert.omega_last, cert.verdict)


def grid_axis(lo: float, hi: float, spacing: float) -> np.ndarray:
    count = int(round((hi - lo) / spacing)) + 1
    return lo + spacing * np.arange(count)


def example_report(which: str, kappas: Sequence[float], mus: Sequence[float], n: int = 1,
                   rank_tol: float = DEFAULT_RANK_TOL) -> list[LocusRow]:
    """Rows in kappa-major order over the product grid.

    Each kappa row is evaluated as one batch; the decision rule is the same as
    :func:`example_point`.
    """
    if which not in ("example1", "example2"):
        raise ValueError(f"unknown example {which!r}; expected example1 or example2")
    mus = np.asarray(mus, dtype=float)
    rows: list[LocusRow] = []
    for k in map(float, kappas):
        reason = _validity(which, k)
        if reason:
            rows.extend(LocusRow(k, float(m), None, "skipped", reason) for m in mus)
            continue
        fx = contact_fixture(k, n) if which == "example2" else kenmotsu_prime_fixture(k, n)
        T = fx.h if which == "example2" else fx.h_prime
        base = jacobi_closed_form(params(k), fx.eta, fx.xi, fx.h, fx.h_prime).matrix
        Js = base[None] + mus[:, None, None] * T[None]
        om, maximal = rank_verdicts(Js, rank_tol)
        rows.extend(
            LocusRow(k, float(m), float(w), "maximal" if ok else "deficient")
            for m, w, ok in zip(mus, om, maximal)
        )
    return rows


def write_csv(rows: Iterable[LocusRow], out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kappa", "mu", "omega_last", "verdict"])
    for r in rows:
        w.writerow([fmt(r.kappa), fmt(r.mu), "" if r.omega_last is None else fmt(r.omega_last), r.verdict])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def boundary_points(kappas, mus, rows: Sequence[LocusRow]) -> np.ndarray:
    """Where omega_{d-1} changes sign between grid neighbours (segment midpoints) or vanishes."""
    K, Mu = len(kappas), len(mus)
    vals = np.full((K, Mu), np.nan)
    for idx, r in enumerate(rows):
        if r.omega_last is not None:
            vals[idx // Mu, idx % Mu] = r.omega_last
    pts = []
    zero = np.argwhere(np.array([[r.verdict == "deficient" for r in rows[i * Mu:(i + 1) * Mu]] for i in range(K)]))
    pts += [(kappas[i], mus[j]) for i, j in zero]
    s = np.sign(vals)
    flips_k = np.argwhere(s[:-1, :] * s[1:, :] < 0)
    pts += [((kappas[i] + kappas[i + 1]) / 2, mus[j]) for i, j in flips_k]
    flips_m = np.argwhere(s[:, :-1] * s[:, 1:] < 0)
    pts += [(kappas[i], (mus[j] + mus[j + 1]) / 2) for i, j in flips_m]
    return np.array(pts, dtype=float).reshape(-1, 2)


def example2_curve(kappa_lo: float = -1.5, kappa_hi: float = 1.0, samples: int = 200001) -> np.ndarray:
    """Dense samples of kappa^2 - (1 - kappa) mu^2 = 0, i.e. mu = +-kappa / sqrt(1 - kappa)."""
    k = np.linspace(kappa_lo, kappa_hi, samples, endpoint=False)
    m = k / np.sqrt(1.0 - k)
    return np.concatenate([np.column_stack([k, m]), np.column_stack([k, -m])])


def distance_to_curve(points: np.ndarray, curve: np.ndarray) -> np.ndarray:
    if len(points) == 0:
        return np.zeros(0)
    return cKDTree(curve).query(points)[0]
