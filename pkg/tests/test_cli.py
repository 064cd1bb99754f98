import json
import subprocess
import sys

import pytest

from maxrank import catalog
from maxrank.cli import InputError, RunConfig, main, num


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_curvature_sphere(capsys):
    code, out, _ = run(capsys, "curvature", "--input", "builtin:s2", "--point", "a1=pi/4,phi=0")
    assert code == 0
    rep = json.loads(out)
    (row,) = rep["points"]
    R = row["riemann"]
    assert R["R_a1,phi,phi,a1"] == 0.5
    assert R["R_a1,phi,a1,phi"] == -0.5
    assert row["christoffel"]["Gamma^a1_phi,phi"] == -0.5
    assert all(v == 0 for v in row["residuals"].values())


def test_curvature_flat_zero(capsys):
    code, out, _ = run(capsys, "curvature", "--input", "builtin:flat3", "--point", "0,0,0")
    assert code == 0
    row = json.loads(out)["points"][0]
    assert row["riemann"] == {} and row["christoffel"] == {}


def test_positional_and_random_points(capsys):
    code, out, _ = run(capsys, "curvature", "--input", "builtin:s2", "--point", "1,0", "--random-points", "2")
    assert code == 0
    assert len(json.loads(out)["points"]) == 3


def test_certify_kenmotsu(capsys):
    code, out, _ = run(capsys, "certify", "--input", "builtin:kenmotsu_h3", "--point", "0.1,0.2,0.3")
    assert code == 0
    row = json.loads(out)["points"][0]
    assert row["verdict"] == "certified_irreducible"
    assert row["parallel_dimension"] == 1
    assert row["g_xi_xi"] == 1 and row["omega_last"] == 1


def test_certify_products_and_flat(capsys):
    code, out, _ = run(capsys, "certify", "--input", "builtin:s2xs2", "--random-points", "3")
    rows = json.loads(out)["points"]
    assert code == 0 and all(r["verdict"] == "inconclusive" and r["parallel_dimension"] == 2 for r in rows)
    code, out, _ = run(capsys, "certify", "--input", "builtin:flat4", "--point", "0,0,0,0")
    row = json.loads(out)["points"][0]
    assert row["verdict"] == "inconclusive" and row["parallel_dimension"] == 10


def test_certify_isotropic_note(capsys):
    code, out, _ = run(capsys, "certify", "--input", "builtin:ppwave", "--field", "d_v", "--point", "0,0,0.1,0.2")
    row = json.loads(out)["points"][0]
    assert code == 0 and "ISOTROPIC_FIELD" in row["notes"] and row["verdict"] == "inconclusive"


def test_certify_unknown_field(capsys):
    code, _, err = run(capsys, "certify", "--input", "builtin:s3", "--field", "nope")
    assert code == 2 and "unknown field 'nope'" in err


def test_paracontact_kenmotsu(capsys):
    code, out, _ = run(capsys, "paracontact", "--input", "builtin:kenmotsu_h3")
    assert code == 0
    rep = json.loads(out)
    assert rep["classes"] == ["para-Kenmotsu"]
    assert rep["nullity"]["kappa"] == -1
    assert rep["nullity"]["flags"]["mu"] == "unidentifiable"


def test_paracontact_cosymplectic(capsys):
    code, out, _ = run(capsys, "paracontact", "--input", "builtin:cosymplectic_flat3")
    n = json.loads(out)["nullity"]
    assert code == 0 and (n["kappa"], n["mu"], n["nu"]) == (0, 0, 0)


def test_paracontact_violation_fixture(capsys, tmp_path):
    spec = catalog.kenmotsu_h3()
    spec["structure"]["eta"] = ["2", "0", "0"]
    p = tmp_path / "broken.json"
    p.write_text(json.dumps(spec))
    code, out, err = run(capsys, "paracontact", "--input", str(p))
    assert code == 1
    assert "AXIOM_VIOLATION eta_xi" in err
    assert any("eta_xi" in v for v in json.loads(out)["violations"])


def test_paracontact_without_structure(capsys):
    code, _, err = run(capsys, "paracontact", "--input", "builtin:s2")
    assert code == 2 and "structure" in err


def test_locus_csv(capsys):
    code, out, err = run(capsys, "locus", "example2", "--kappa", "0.5:0.5:0.1", "--mu", "0:1:0.5")
    assert code == 0
    assert out.splitlines() == [
        "kappa,mu,omega_last,verdict",
        "0.5,0,0.25,maximal",
        "0.5,0.5,0.125,maximal",
        "0.5,1,-0.25,maximal",
    ]
    assert "3 grid points" in err


def test_locus_out_of_region(capsys):
    code, _, err = run(capsys, "locus", "example1", "--kappa", "0:0.5:0.1", "--mu", "0:1:0.5")
    assert code == 2 and "outside the valid region" in err


def test_locus_bad_range(capsys):
    code, _, _ = run(capsys, "locus", "--kappa", "1:0:0.1")
    assert code == 2


def test_catalog_command(capsys):
    code, out, _ = run(capsys, "catalog")
    names = [m["name"] for m in json.loads(out)["models"]]
    assert code == 0 and "builtin:s2" in names and len(names) >= 7


@pytest.mark.parametrize(
    "argv",
    [
        ["curvature"],
        ["curvature", "--input", "builtin:nope"],
        ["curvature", "--input", "/no/such/file.json"],
        ["curvature", "--input", "builtin:s2", "--point", "q=1,phi=0"],
        ["curvature", "--input", "builtin:s2", "--point", "a1=1"],
        ["curvature", "--input", "builtin:s2", "--point", "1,2,3"],
        ["curvature", "--input", "builtin:s2", "--point", "a1=1,2"],
        ["curvature", "--input", "builtin:s2", "--point", "1,foo"],
        ["certify", "--input", "builtin:s2", "--rank-tol", "-1"],
        ["certify", "--input", "builtin:s2", "--order", "5"],
        ["frobnicate"],
        [],
    ],
)
def test_input_errors_exit_2(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_malformed_json_exit_2(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"dim": 2,\n "coords": ["x", "y"],\n "metric": [["1", "0"], ["0", "1"]]\n "domain": {}}')
    code, _, err = run(capsys, "curvature", "--input", str(p))
    assert code == 2 and "line 4" in err


def test_schema_error_reports_path(capsys, tmp_path):
    spec = catalog.flat(2)
    spec["domain"]["x2"] = "wide"
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(spec))
    code, _, err = run(capsys, "curvature", "--input", str(p))
    assert code == 2 and "domain.x2" in err


def test_out_file_and_determinism(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        code, out, _ = run(capsys, "certify", "--input", "builtin:bianchi1", "--random-points", "4",
                           "--seed", "7", "--out", str(path))
        assert code == 0 and out == ""
    assert a.read_bytes() == b.read_bytes()
    code, _, _ = run(capsys, "certify", "--input", "builtin:bianchi1", "--random-points", "4",
                     "--seed", "8", "--out", str(b))
    assert a.read_bytes() != b.read_bytes()


def test_threads_env_does_not_change_output(tmp_path):
    outs = []
    for threads in ("1", "4"):
        res = subprocess.run(
            [sys.executable, "-m", "maxrank", "paracontact", "--input", "builtin:sasaki_s3", "--random-points", "6"],
            capture_output=True, text=True, env={"MAXRANK_THREADS": threads, "PATH": "/usr/bin:/bin"},
        )
        assert res.returncode == 0, res.stderr
        outs.append(res.stdout)
    assert outs[0] == outs[1]


def test_num_formatting():
    assert num(1 / 3) == 0.333333333333
    assert str(num(-0.0)) == "0.0"
    assert num(float("inf")) is None
    assert num([1.0, 2.5]) == [1.0, 2.5]


def test_run_config_validation():
    with pytest.raises(InputError):
        RunConfig("certify", iso_tol=0)
    with pytest.raises(InputError):
        RunConfig("certify", random_points=-1)
    assert RunConfig("certify").seed == 42
