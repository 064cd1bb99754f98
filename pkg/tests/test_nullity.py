import io
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from maxrank.catalog import get_model
from maxrank.linalg_point import max_rank_certificate
from maxrank.nullity import (
    KernelViolation,
    boundary_points,
    contact_fixture,
    distance_to_curve,
    example2_curve,
    example_point,
    example_report,
    fmt,
    grid_axis,
    jacobi_closed_form,
    kenmotsu_prime_fixture,
    params,
    restrict_to_kernel,
    singular_locus,
    write_csv,
)
from maxrank.paracontact import derived_tensors

kappas = st.floats(-3, 0.999, allow_nan=False)
reals = st.floats(-3, 3, allow_nan=False)


def restricted(fx, T):
    return restrict_to_kernel(T, fx.xi, fx.eta)


# ---------------------------------------------------------------- closed form

def test_kappa_one_projection():
    fx = contact_fixture(1.0)
    assert np.all(fx.h == 0)
    rng = np.random.default_rng(0)
    h = np.zeros((3, 3))
    h[1:, 1:] = rng.normal(size=(2, 2))  # arbitrary with h xi = 0
    J = jacobi_closed_form(params(1.0), fx.eta, fx.xi, h, h @ fx.phi).matrix
    assert np.allclose(J, np.eye(3) - np.outer(fx.xi, fx.eta))


def test_example2_point_values():
    fx = contact_fixture(0.5)
    J = jacobi_closed_form(params(0.5, 1.0), fx.eta, fx.xi, fx.h, fx.h_prime)
    JK = restricted(fx, J.matrix)
    assert np.allclose(np.sort(np.linalg.eigvalsh(JK)), [0.5 - math.sqrt(0.5), 0.5 + math.sqrt(0.5)])
    assert np.allclose(np.abs(np.diag(fx.h)), [0, math.sqrt(0.5), math.sqrt(0.5)])


def test_example1_kappa_minus_one():
    fx = kenmotsu_prime_fixture(-1.0)
    assert np.all(fx.h_prime == 0) and np.all(fx.h == 0)
    J = jacobi_closed_form(params(-1.0), fx.eta, fx.xi, fx.h, fx.h_prime)
    assert np.allclose(restricted(fx, J.matrix), -np.eye(2))
    assert max_rank_certificate(J, fx.xi, fx.metric).verdict == "maximal"


@settings(max_examples=50, deadline=None)
@given(kappas, reals, reals, st.integers(1, 3))
def test_closed_form_structure(k, mu, nu, n):
    fx = contact_fixture(k, n)
    J = jacobi_closed_form(params(k, mu, nu), fx.eta, fx.xi, fx.h, fx.h_prime).matrix
    assert np.all(J @ fx.xi == 0)
    want = k * np.eye(2 * n) + mu * restricted(fx, fx.h) + nu * restricted(fx, fx.h_prime)
    assert np.allclose(restricted(fx, J), want, atol=1e-12)


def test_kernel_violation():
    fx = contact_fixture(0.0)
    bad = fx.h.copy()
    bad[1, 0] = 0.3
    with pytest.raises(KernelViolation):
        jacobi_closed_form(params(0.0, 1.0), fx.eta, fx.xi, bad, fx.h_prime)
    with pytest.raises(KernelViolation):
        jacobi_closed_form(params(0.0, 1.0), fx.eta, fx.xi, fx.h, bad)


def test_fixture_validity_ranges():
    with pytest.raises(ValueError):
        contact_fixture(1.5)
    with pytest.raises(ValueError):
        kenmotsu_prime_fixture(-0.5)


@settings(max_examples=30, deadline=None)
@given(kappas, st.integers(1, 3))
def test_contact_fixture_minimal_polynomial(k, n):
    h = contact_fixture(k, n).h
    d = 2 * n + 1
    I = np.eye(d)
    assert np.allclose(h @ (h @ h - (1 - k) * I), 0, atol=1e-12)
    if k < 1 - 1e-6:
        # no proper divisor of x(x^2 - (1 - k)) annihilates h
        assert not np.allclose(h @ h - (1 - k) * I, 0)
        assert not np.allclose(h @ h, math.sqrt(1 - k) * h)
        assert not np.allclose(h @ h, -math.sqrt(1 - k) * h)


@pytest.mark.parametrize("fixture, k", [(contact_fixture, 0.3), (kenmotsu_prime_fixture, -2.5)])
def test_fixture_phi_relations(fixture, k):
    fx = fixture(k, 2)
    P = np.eye(5) - np.outer(fx.xi, fx.eta)
    assert np.allclose(fx.phi @ fx.phi, -P)
    assert np.allclose(fx.h_prime, fx.h @ fx.phi)
    assert np.allclose(fx.h @ fx.phi, -fx.phi @ fx.h)


def test_closed_form_matches_engine_on_kenmotsu():
    M = get_model("kenmotsu_h3")
    S = M.structure
    for p in M.random_points(20, np.random.default_rng(11)):
        sp = S.at(p)
        D = derived_tensors(S, p)
        J = jacobi_closed_form(params(-1.0), sp.eta, sp.xi, D.h, D.h_prime).matrix
        assert np.max(np.abs(J - M.geometry(p).jacobi_matrix(sp.xi))) <= 1e-7


# ---------------------------------------------------------------- singular locus

def test_zero_h_locus():
    for n in (1, 2, 3):
        loc = singular_locus(np.zeros((2 * n, 2 * n)))
        assert loc.polynomial == (1.0,) + (0.0,) * (2 * n)
        assert loc.degree == 2 * n
        assert loc(1.7, 3.0) == pytest.approx(1.7 ** (2 * n))
        assert loc.factored_lines == (0.0,) * (2 * n)


def test_example2_lines_at_three_quarters():
    fx = contact_fixture(0.75)
    loc = singular_locus(restricted(fx, fx.h))
    assert loc.polynomial[0] == 1.0
    assert np.allclose(loc.polynomial, [1.0, 0.0, -0.25])
    assert np.allclose(loc.factored_lines, [-0.5, 0.5])
    for kk, mm in loc.sample_points:
        assert loc(kk, mm) == pytest.approx(0, abs=1e-14)
    # kappa^2 - (1 - kappa) mu^2 at kappa = 0.75 on the lines kappa = +-mu/2
    for mu in (-2.0, 0.4, 1.0):
        for kk in (mu / 2, -mu / 2):
            assert loc(kk, mu) == pytest.approx(0.0, abs=1e-14)
            assert loc.line_distance(kk, mu) == pytest.approx(0.0, abs=1e-15)
    assert "kappa^2*mu^0" in loc.to_text()


def test_example1_singleton():
    fx = kenmotsu_prime_fixture(-2.0)
    hp = restricted(fx, fx.h_prime)
    assert np.allclose(np.sort(np.linalg.eigvalsh(hp)), [-1, 1])
    assert np.linalg.det(-2.0 * np.eye(2) - 2.0 * hp) == pytest.approx(0, abs=1e-15)
    row = example_point("example1", -2.0, -2.0)
    assert row.verdict == "deficient"
    for dk in (-0.01, 0, 0.01):
        for dm in (-0.01, 0, 0.01):
            if dk == dm == 0 or -2.0 + dk > -1:
                continue
            assert example_point("example1", -2.0 + dk, -2.0 + dm).verdict == "maximal"


def test_non_diagonalizable_h():
    h = np.array([[0.0, 1.0], [0.0, 0.0]])
    loc = singular_locus(h)
    assert loc.factored_lines is None
    assert np.allclose(loc.polynomial, [1, 0, 0])
    with pytest.raises(ValueError):
        loc.line_distance(1.0, 1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6), st.booleans())
def test_polynomial_matches_direct_determinant(seed, m, symmetric):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(m, m))
    if symmetric:
        h = h + h.T
    loc = singular_locus(h)
    for k, mu in rng.uniform(-3, 3, size=(100, 2)):
        direct = np.linalg.det(k * np.eye(m) + mu * h)
        scale = (abs(k) + abs(mu) * np.linalg.norm(h, 2)) ** m
        assert abs(loc(k, mu) - direct) <= 1e-9 * max(abs(direct), scale)


@settings(max_examples=60, deadline=None)
@given(kappas, reals)
def test_deficient_iff_near_line(k, mu):
    fx = contact_fixture(k)
    loc = singular_locus(restricted(fx, fx.h))
    # the rank rule is scale free, so compare against the largest |kappa + lambda_i mu|
    scale = max(abs(k + lam * mu) for lam in loc.factored_lines)
    assume(scale > 1e-100)  # omega_2 ~ scale^2 underflows below this
    rel = loc.line_distance(k, mu) / scale
    row = example_point("example2", k, mu)
    if rel > 1e-6:
        assert row.verdict == "maximal"
    if rel <= 1e-13:
        assert row.verdict == "deficient"


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 0.999), st.sampled_from([-1, 1]))
def test_on_line_points_are_deficient(k, sign):
    lam = math.sqrt(1 - k)
    assume(abs(k) > 1e-3)
    # mu chosen so that kappa + lam * mu = 0 exactly up to rounding
    mu = -k / (sign * lam)
    row = example_point("example2", k, mu)
    assert row.verdict == "deficient"


# ---------------------------------------------------------------- reports

def test_example2_report_examples():
    assert example_point("example2", 0.5, 0.1).verdict == "maximal"
    assert example_point("example2", 0.5, 0.5 / math.sqrt(0.5)).verdict == "deficient"
    r = example_point("example1", -1.0, 0.7)
    assert r.verdict == "maximal" and r.omega_last == pytest.approx(1.0)


def test_skipped_rows():
    r = example_point("example2", 1.2, 0.0)
    assert r.verdict == "skipped" and r.omega_last is None and "kappa > 1" in r.reason
    rows = example_report("example1", [-0.5, -2.0], [0.0, 1.0])
    assert [x.verdict for x in rows[:2]] == ["skipped", "skipped"]
    with pytest.raises(ValueError):
        example_point("example3", 0, 0)


def test_batched_report_matches_pointwise():
    rng = np.random.default_rng(3)
    ks = np.round(rng.uniform(-1, 0.99, 7), 2)
    ms = np.round(rng.uniform(-2, 2, 9), 2)
    for which, kk in (("example2", ks), ("example1", ks - 2.0)):
        rows = example_report(which, kk, ms)
        assert [(r.kappa, r.mu) for r in rows] == [(k, m) for k in kk for m in ms]
        for r in rows:
            single = example_point(which, r.kappa, r.mu)
            assert single.verdict == r.verdict
            if r.omega_last is not None:
                assert r.omega_last == pytest.approx(single.omega_last, rel=1e-9, abs=1e-12)


def test_grid_axis():
    ax = grid_axis(-1, 0.99, 0.01)
    assert len(ax) == 200 and ax[0] == -1 and ax[-1] == pytest.approx(0.99)
    assert len(grid_axis(-2, 2, 0.01)) == 401


def test_csv_format():
    rows = example_report("example2", [0.5, 1.5], [0.0, 1.0])
    text = write_csv(rows)
    lines = text.splitlines()
    assert lines[0] == "kappa,mu,omega_last,verdict"
    assert lines[1] == "0.5,0,0.25,maximal"
    assert lines[-1] == "1.5,1,,skipped"
    buf = io.StringIO()
    write_csv(rows, buf)
    assert buf.getvalue() == text
    assert fmt(1 / 3) == "0.333333333333"


def test_boundary_near_curve_small_grid():
    ks = grid_axis(-0.5, 0.5, 0.05)
    ms = grid_axis(-1, 1, 0.05)
    rows = example_report("example2", ks, ms)
    pts = boundary_points(ks, ms, rows)
    assert len(pts) > 0
    assert distance_to_curve(pts, example2_curve()).max() <= 0.05


def test_curve_samples_satisfy_equation():
    c = example2_curve(samples=1001)
    k, m = c[:, 0], c[:, 1]
    assert np.max(np.abs(k**2 - (1 - k) * m**2)) < 1e-12
