import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxrank.catalog import get_model, model_catalog, model_names
from maxrank.linalg_point import max_rank_certificate
from maxrank.manifold import (
    DegenerateMetric,
    SpecError,
    christoffel,
    covariant_derivative,
    jacobi_operator,
    load_manifold,
    manifold_from_dict,
    metricity_residual,
    ricci_identity_residual,
    riemann,
    sectional_curvature,
)

ALL = model_names()
CURVED_CONSTANT = {"s2": 1, "s3": 1, "s4": 1, "hyperbolic4": -1, "kenmotsu_h3": -1, "de_sitter4": 1,
                   "sasaki_s3": 1}


def metric_fd(M, x, h=1e-5):
    """Central differences of the metric: dg[a, i, j]."""
    d = M.dim
    out = np.empty((d, d, d))
    for a in range(d):
        e = np.zeros(d)
        e[a] = h
        out[a] = (M.metric_jets(x + e, 0)[0] - M.metric_jets(x - e, 0)[0]) / (2 * h)
    return out


def christoffel_from(g, dg):
    ginv = np.linalg.inv(g)
    low = 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)
    return np.einsum("kl,lij->kij", ginv, low)


# ---------------------------------------------------------------- examples

def test_flat_christoffel_zero():
    assert np.all(christoffel(get_model("flat4"), [0.1, 0.2, 0.3, 0.4]) == 0)


def test_sphere_christoffel():
    G = christoffel(get_model("s2"), [math.pi / 4, 0.0])
    assert G[0, 1, 1] == pytest.approx(-0.5, abs=1e-15)
    assert G[1, 0, 1] == G[1, 1, 0] == pytest.approx(1.0)


def test_hyperbolic_christoffel():
    t = 0.3
    G = christoffel(get_model("kenmotsu_h3"), [t, 0.1, -0.2])
    assert G[0, 1, 1] == pytest.approx(-math.exp(2 * t), rel=1e-14)
    assert G[0, 2, 2] == pytest.approx(-math.exp(2 * t), rel=1e-14)


def test_flat_riemann_zero():
    assert np.all(riemann(get_model("minkowski4"), np.zeros(4)).riemann_down == 0)


def test_sphere_riemann_component():
    th = 0.9
    R = riemann(get_model("s2"), [th, 0.3]).riemann_down
    # R_ijkl = g(R(e_i, e_j) e_k, e_l): the sectional-curvature slot is R_{th ph ph th}
    assert R[0, 1, 1, 0] == pytest.approx(math.sin(th) ** 2, rel=1e-14)
    assert R[0, 1, 0, 1] == pytest.approx(-math.sin(th) ** 2, rel=1e-14)


def test_sign_convention_sphere_sectional_plus_one():
    geo = get_model("s2").geometry([1.1, 0.0])
    assert sectional_curvature(geo, [1, 0], [0, 1]) == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_hyperbolic_sectional_minus_one(seed):
    rng = np.random.default_rng(seed)
    M = get_model("hyperbolic4")
    x = M.random_points(1, rng)[0]
    geo = M.geometry(x)
    X, Y = rng.normal(size=(2, 4))
    assert sectional_curvature(geo, X, Y) == pytest.approx(-1.0, rel=1e-9)


@pytest.mark.parametrize("name", sorted(CURVED_CONSTANT))
def test_constant_curvature_form(name):
    k = CURVED_CONSTANT[name]
    M = get_model(name)
    for x in M.sample_grid(3, cap=30):
        geo = M.geometry(x)
        g = geo.g
        d = M.dim
        I = np.eye(d)
        want = k * (np.einsum("jk,li->lijk", g, I) - np.einsum("ik,lj->lijk", g, I))
        assert np.max(np.abs(geo.riemann_up - want)) <= 1e-8 * max(1, np.abs(want).max())


@pytest.mark.parametrize("name", ["s2", "s3", "s4"])
def test_sphere_jacobi_is_projection(name):
    M = get_model(name)
    rng = np.random.default_rng(2)
    for x in M.random_points(5, rng):
        geo = M.geometry(x)
        xi = rng.normal(size=M.dim)
        xi /= math.sqrt(xi @ geo.g @ xi)
        J = geo.jacobi_matrix(xi)
        ev = np.sort(np.linalg.eigvals(J).real)
        assert np.allclose(ev, [0.0] + [1.0] * (M.dim - 1), atol=1e-10)
        assert np.allclose(J, np.eye(M.dim) - np.outer(xi, geo.g @ xi), atol=1e-10)


def test_kenmotsu_jacobi_minus_identity():
    M = get_model("kenmotsu_h3")
    for x in M.sample_grid(3):
        J = jacobi_operator(M, x, [1.0, 0, 0]).matrix
        assert np.allclose(J, np.diag([0.0, -1.0, -1.0]), atol=1e-12)


def test_metricity_on_catalog():
    for name in ALL:
        M = get_model(name)
        for x in M.sample_grid(2):
            assert metricity_residual(M, x) <= 1e-9 * max(1.0, np.abs(M.metric_jets(x, 0)[0]).max())


def test_product_rule_nabla_fg():
    M = get_model("s2")
    f = "cos(a1) + phi^2"
    comps = [[f"({f})*1", "0"], ["0", f"({f})*sin(a1)^2"]]
    x = np.array([0.7, 0.4])
    nT = covariant_derivative(M, x, comps)
    df = np.array([-math.sin(0.7), 2 * 0.4])
    g = M.metric_jets(x, 0)[0]
    assert np.allclose(nT, np.einsum("a,ij->aij", df, g), atol=1e-13)


def test_covariant_derivative_of_metric_vanishes():
    for name in ("s3", "kenmotsu_h3", "bianchi1", "paracontact_flat5"):
        M = get_model(name)
        comps = [[M.metric[i][j] for j in range(M.dim)] for i in range(M.dim)]
        for x in M.sample_grid(2, cap=8):
            assert np.max(np.abs(covariant_derivative(M, x, comps))) <= 1e-12


def test_covariant_derivative_identity_11():
    M = get_model("s2xr")
    ident = [["1" if i == j else "0" for j in range(3)] for i in range(3)]
    assert np.max(np.abs(covariant_derivative(M, [1.0, 0.2, 0.1], ident, "(1,1)"))) == 0
    with pytest.raises(ValueError):
        covariant_derivative(M, [1.0, 0.2, 0.1], ident, "(2,0)")


@pytest.mark.parametrize(
    "name, Y, xi",
    [
        ("s2", ["0", "1"], ["1", "0"]),
        ("s2", ["a1", "cos(phi)"], ["sin(phi)", "1 + a1^2"]),
        ("kenmotsu_h3", ["0", "1", "0"], ["1", "0", "0"]),
        ("kenmotsu_h3", ["x", "t*y", "1"], ["1", "0.5*y", "exp(-t)"]),
    ],
)
def test_ricci_identity(name, Y, xi):
    M = get_model(name)
    for x in M.sample_grid(3, cap=20):
        lhs, rhs = ricci_identity_residual(M, x, Y, xi)
        assert np.max(np.abs(lhs - rhs)) <= 1e-7


def test_catalog_contents():
    cat = model_catalog()
    assert len(cat) >= 7
    for required in ("flat3", "minkowski4", "s2", "hyperbolic4", "s2xs2", "s2xr", "ppwave", "de_sitter4"):
        assert required in cat
    assert str(cat["minkowski4"].signature_on_grid()) == "(1,3)"
    assert str(cat["flat5_split"].signature_on_grid()) == "(2,3)"


@pytest.mark.parametrize("name", ALL)
def test_catalog_nondegenerate_on_grid(name):
    M = get_model(name)
    per_axis = 5 if M.dim <= 4 else 3
    for x in M.sample_grid(per_axis):
        g = M.metric_at(x)
        assert abs(np.linalg.det(g.matrix)) > 1e-12


def test_s2xs2_block_diagonal():
    geo = get_model("s2xs2").geometry([1.0, 0.2, 2.0, -0.3])
    R = geo.riemann_down
    mask = np.zeros_like(R, dtype=bool)
    for blk in ((0, 1), (2, 3)):
        idx = np.ix_(blk, blk, blk, blk)
        mask[idx] = True
    assert np.all(R[~mask] == 0)
    assert np.abs(R[mask]).max() > 0.1


# ---------------------------------------------------------------- invariants

@pytest.mark.parametrize("name", ALL)
def test_symmetries_and_bianchi(name):
    M = get_model(name)
    for x in M.sample_grid(3, cap=81):
        geo = M.geometry(x)
        scale = max(1.0, np.abs(geo.riemann_down).max())
        for v in geo.symmetry_residuals().values():
            assert v <= 1e-8 * scale


@pytest.mark.parametrize("name", ALL)
def test_ad_christoffel_matches_finite_difference(name):
    M = get_model(name)
    for x in M.sample_grid(2, cap=16):
        geo = M.geometry(x, 1)
        fd = christoffel_from(geo.g, metric_fd(M, x))
        assert np.max(np.abs(geo.christoffel - fd)) <= 1e-6


@pytest.mark.parametrize("name", ["warped4", "bianchi1", "s3", "sasaki_s3", "ppwave"])
def test_curvature_derivative_matches_finite_difference(name):
    M = get_model(name)
    h = 1e-5
    for x in M.sample_grid(2, cap=4):
        geo = M.geometry(x, 3)
        for a in range(M.dim):
            e = np.zeros(M.dim)
            e[a] = h
            fd = (M.geometry(x + e).riemann_up - M.geometry(x - e).riemann_up) / (2 * h)
            assert np.max(np.abs(geo.d_riemann[a] - fd)) <= 1e-6 * max(1, np.abs(fd).max())


@pytest.mark.parametrize("name", ["warped4", "bianchi1", "sasaki_s3", "s2xs2", "ppwave"])
def test_second_bianchi(name):
    M = get_model(name)
    for x in M.sample_grid(2, cap=8):
        nR = M.geometry(x, 3).nabla_riemann  # [m, l, i, j, k]
        cyc = nR + nR.transpose(2, 1, 3, 0, 4) + nR.transpose(3, 1, 0, 2, 4)
        assert np.max(np.abs(cyc)) <= 1e-9 * max(1.0, np.abs(nR).max())


@pytest.mark.parametrize("name", ["s3", "hyperbolic4", "s2xs2", "s2xr", "de_sitter4"])
def test_symmetric_spaces_have_parallel_curvature(name):
    M = get_model(name)
    for x in M.sample_grid(2, cap=8):
        assert np.max(np.abs(M.geometry(x, 3).nabla_riemann)) <= 1e-10


def test_warped_model_is_not_locally_symmetric():
    geo = get_model("warped4").geometry([0.2, 0, 0, 0], 3)
    assert np.max(np.abs(geo.nabla_riemann)) > 1e-2


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(ALL), st.integers(0, 2**31 - 1))
def test_jacobi_annihilates_and_self_adjoint(name, seed):
    rng = np.random.default_rng(seed)
    M = get_model(name)
    x = M.random_points(1, rng)[0]
    xi = rng.normal(size=M.dim)
    J = jacobi_operator(M, x, xi)
    scale = max(np.linalg.norm(J.matrix, 2), 1e-300) * np.linalg.norm(xi)
    assert np.linalg.norm(J.matrix @ xi) <= 1e-12 * max(scale, 1.0)
    assert J.adjoint_defect() <= 1e-10


@pytest.mark.parametrize("name", ["s2xs2", "s2xr"])
def test_products_always_deficient(name):
    M = get_model(name)
    rng = np.random.default_rng(17)
    for x in M.random_points(100, rng):
        geo = M.geometry(x)
        xi = rng.normal(size=M.dim)
        c = max_rank_certificate(geo.jacobi_matrix(xi), xi, geo.metric)
        assert c.verdict == "deficient"


def test_gray_nullity_form_on_constant_curvature():
    # R(X, Y) xi = k (g(Y, xi) X - g(X, xi) Y) with xi any vector: N_k is everything
    M = get_model("de_sitter4")
    rng = np.random.default_rng(8)
    for x in M.random_points(5, rng):
        geo = M.geometry(x)
        xi, X, Y = rng.normal(size=(3, 4))
        lhs = np.einsum("lijk,i,j,k->l", geo.riemann_up, X, Y, xi)
        rhs = (Y @ geo.g @ xi) * X - (X @ geo.g @ xi) * Y
        assert np.allclose(lhs, rhs, atol=1e-9)


# ---------------------------------------------------------------- specs

GOOD = {
    "name": "cone",
    "dim": 2,
    "coords": ["r", "th"],
    "metric": [["1", "0"], ["0", "r^2"]],
    "domain": {"r": [0.5, 2.0], "th": [-3, 3]},
    "fields": {"xi": ["1", "0"]},
}


def bad(**patch):
    spec = json.loads(json.dumps(GOOD))
    for k, v in patch.items():
        if v is None:
            spec.pop(k)
        else:
            spec[k] = v
    return spec


def test_load_good_spec(tmp_path):
    p = tmp_path / "cone.json"
    p.write_text(json.dumps(GOOD))
    M = load_manifold(p)
    assert M.name == "cone" and M.dim == 2
    assert np.all(riemann(M, [1.0, 0.0]).riemann_down == 0)  # polar coordinates on the plane


@pytest.mark.parametrize(
    "spec, path",
    [
        (bad(dim=None), "<root>"),
        (bad(dim="2"), "dim"),
        (bad(coords=["r"]), "coords"),
        (bad(coords=["r", "2x"]), "coords[1]"),
        (bad(coords=["r", "pi"]), "coords[1]"),
        (bad(coords=["r", "r"]), "coords"),
        (bad(metric=[["1", "0"], ["0"]]), "metric[1]"),
        (bad(metric=[["1", "0"], ["0", "q^2"]]), "metric[1][1]"),
        (bad(metric=[["1", "0"], ["0", "r^"]]), "metric[1][1]"),
        (bad(metric=[["1", "r"], ["0", "1"]]), "metric[0][1]"),
        (bad(metric=[["1", "0"], ["0", "0"]]), "metric"),
        (bad(metric=[["1", "0"], ["0", "r - 1"]]), "metric"),
        (bad(domain={"r": [0.5, 2.0]}), "domain"),
        (bad(domain={"r": [2.0, 0.5], "th": [-3, 3]}), "domain.r"),
        (bad(domain={"r": "x", "th": [-3, 3]}), "domain.r"),
        (bad(fields={"xi": ["1"]}), "fields.xi"),
        (bad(extra=1), "extra"),
    ],
)
def test_spec_errors_carry_field_path(spec, path):
    with pytest.raises(SpecError) as exc:
        manifold_from_dict(spec)
    assert (exc.value.path or "<root>") == path


def test_malformed_json_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "dim": 2,\n  "coords": [\n}\n')
    with pytest.raises(SpecError) as exc:
        load_manifold(p)
    assert exc.value.line == 4


def test_unknown_builtin():
    with pytest.raises(KeyError):
        load_manifold("builtin:nope")


def test_degenerate_point_raises():
    M = manifold_from_dict(dict(GOOD, domain={"r": [0.5, 2.0], "th": [-3, 3]}))
    with pytest.raises(DegenerateMetric):
        M.geometry([0.0, 0.0])


def test_point_validation():
    M = get_model("s2")
    assert np.allclose(M.point({"a1": 1.0, "phi": 2.0}), [1.0, 2.0])
    with pytest.raises(ValueError):
        M.point([1.0])
    with pytest.raises(ValueError):
        M.point({"a1": 1.0})
    assert M.contains([1.0, 0.0]) and not M.contains([4.0, 0.0])


def test_sample_grid_deterministic_and_capped():
    M = get_model("flat6")
    a = M.sample_grid()
    b = M.sample_grid()
    assert len(a) == 2000 and np.array_equal(a, b)
    lo, hi = M.domain["x1"]
    assert a[:, 0].min() >= lo + 0.1 * (hi - lo) - 1e-12
