"""Command line front door: ``python3 -m maxrank <command> ...``.

Exit codes: 0 success, 1 the analysis found a defect, 2 bad input.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import nullity
from .catalog import get_model, model_names
from .expr import ExprError, parse
from .linalg_point import DEFAULT_ISO_TOL, DEFAULT_RANK_TOL, IsotropicFieldWarning
from .manifold import ChartManifold, DegenerateMetric, SpecError, load_manifold
from .paracontact import AxiomViolation, classify, nullity_fit, validate_structure
from .parallel import ConsistencyError, certify

EXIT_OK, EXIT_DEFECT, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: str | None = None
    points: tuple[str, ...] = ()
    field: str = "xi"
    rank_tol: float = DEFAULT_RANK_TOL
    iso_tol: float = DEFAULT_ISO_TOL
    order: int = 2
    out: str | None = None
    seed: int = 42
    random_points: int = 0
    example: str = "example2"
    kappa: tuple[float, float, float] | None = None
    mu: tuple[float, float, float] | None = None

    def __post_init__(self):
        if not (self.rank_tol > 0 and self.iso_tol > 0):
            raise InputError("tolerances must be positive")
        if self.order not in (1, 2):
            raise InputError("--order must be 1 or 2")
        if self.random_points < 0:
            raise InputError("--random-points must be non-negative")


def num(x):
    """Round to 12 significant digits; JSON then prints the shortest repr."""
    if isinstance(x, (list, tuple, np.ndarray)):
        return [num(v) for v in x]
    x = float(x)
    if not np.isfinite(x):
        return None
    return float(format(x, ".12g")) + 0.0  # +0.0 folds -0.0


def dump(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


# --------------------------------------------------------------------------
# inputs


def _manifold(cfg: RunConfig) -> ChartManifold:
    if not cfg.input:
        raise InputError("--input is required (a JSON file or builtin:<name>)")
    try:
        return load_manifold(cfg.input)
    except KeyError as exc:
        raise InputError(exc.args[0]) from None


def parse_point(M: ChartManifold, text: str) -> np.ndarray:
    """``th=pi/4,phi=0`` or positional ``0.785,0``; values may be constant expressions."""
    parts = [s.strip() for s in text.split(",") if s.strip()]

    def value(src):
        try:
            e = parse(src, ())
        except ExprError as exc:
            raise InputError(f"--point {text!r}: {exc}") from None
        return e.evaluate({})

    if parts and all("=" in s for s in parts):
        mapping = {}
        for s in parts:
            k, v = (t.strip() for t in s.split("=", 1))
            if k not in M.coords:
                raise InputError(f"--point {text!r}: unknown coordinate {k!r}; valid: {', '.join(M.coords)}")
            mapping[k] = value(v)
        missing = [c for c in M.coords if c not in mapping]
        if missing:
            raise InputError(f"--point {text!r}: missing coordinates {', '.join(missing)}")
        x = np.array([mapping[c] for c in M.coords])
    elif any("=" in s for s in parts):
        raise InputError(f"--point {text!r}: mix of named and positional values")
    else:
        if len(parts) != M.dim:
            raise InputError(f"--point {text!r}: expected {M.dim} values for {', '.join(M.coords)}")
        x = np.array([value(s) for s in parts])
    return x


def select_points(M: ChartManifold, cfg: RunConfig, default_per_axis: int = 3) -> np.ndarray:
    pts = [parse_point(M, t) for t in cfg.points]
    if cfg.random_points:
        rng = np.random.default_rng(cfg.seed)
        pts.extend(M.random_points(cfg.random_points, rng))
    if not pts:
        return M.sample_grid(per_axis=default_per_axis, cap=64, seed=cfg.seed)
    return np.array(pts)


def _coords(M, x):
    return {c: num(v) for c, v in zip(M.coords, x)}


# --------------------------------------------------------------------------
# commands


def _components(M, arr, kind, tol=1e-13):
    out = {}
    names = M.coords
    for idx in np.ndindex(arr.shape):
        v = arr[idx]
        if abs(v) > tol:
            if kind == "gamma":
                k, i, j = idx
                if i > j:
                    continue
                key = f"Gamma^{names[k]}_{names[i]},{names[j]}"
            elif kind == "riemann":
                key = "R_" + ",".join(names[a] for a in idx)
            else:
                key = "Ric_" + ",".join(names[a] for a in idx)
            out[key] = num(v)
    return out


def cmd_curvature(cfg: RunConfig) -> tuple[dict, int]:
    M = _manifold(cfg)
    rows = []
    for x in select_points(M, cfg):
        geo = M.geometry(x, 2)
        rows.append({
            "point": _coords(M, x),
            "christoffel": _components(M, geo.christoffel, "gamma"),
            "riemann": _components(M, geo.riemann_down, "riemann"),
            "ricci": _components(M, geo.ricci, "ricci"),
            "residuals": {k: num(v) for k, v in geo.symmetry_residuals().items()},
        })
    return {"manifold": M.name, "convention": "R_ijkl = g(R(e_i,e_j)e_k, e_l)", "points": rows}, EXIT_OK


def cmd_certify(cfg: RunConfig) -> tuple[dict, int]:
    M = _manifold(cfg)
    if cfg.field not in M.fields:
        raise InputError(f"unknown field {cfg.field!r}; {M.name} defines {', '.join(sorted(M.fields)) or 'none'}")
    rows, code = [], EXIT_OK
    for x in select_points(M, cfg):
        entry = {"point": _coords(M, x)}
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", IsotropicFieldWarning)
                cert, space = certify(M, x, cfg.field, cfg.rank_tol, cfg.iso_tol, cfg.order)
        except ConsistencyError as exc:
            entry["error"] = f"CONSISTENCY: {exc}"
            code = EXIT_DEFECT
            rows.append(entry)
            continue
        entry.update({
            "omega_last": num(cert.omega_last),
            "g_xi_xi": num(cert.xi_norm),
            "rank_verdict": cert.rank_verdict,
            "verdict": cert.verdict,
            "parallel_dimension": space.dimension,
            "notes": list(cert.notes),
        })
        rows.append(entry)
    return {"manifold": M.name, "field": cfg.field, "order": cfg.order, "points": rows}, code


def _median(vals):
    return num(float(np.median(vals))) if len(vals) else None


def cmd_paracontact(cfg: RunConfig) -> tuple[dict, int]:
    M = _manifold(cfg)
    S = M.structure
    if S is None:
        raise InputError(f"{M.name} has no 'structure' block")
    pts = select_points(M, cfg) if (cfg.points or cfg.random_points) else None
    rep = validate_structure(S, pts)
    out = {
        "manifold": M.name,
        "epsilon": S.epsilon,
        "axioms": {k: num(v) for k, v in rep.max_violation.items()},
    }
    if not rep.ok:
        out["violations"] = [str(v) for v in rep.violations()]
        return out, EXIT_DEFECT
    cls = classify(S, pts)
    fit = nullity_fit(S, pts)
    out["labels"] = sorted(cls.labels)
    out["classes"] = cls.names
    out["defects"] = {k: num(v) for k, v in cls.defects.items()}
    flags = fit.per_point[0].flags if fit.per_point else {}
    out["nullity"] = {
        "is_nullity_space": fit.is_nullity_space,
        "max_residual": num(fit.max_residual),
        # unidentifiable coefficients carry the minimum-norm least-squares value
        **{k: _median([getattr(f, k) for f in fit.per_point]) for k in ("kappa", "mu", "nu")},
        "flags": dict(flags),
    }
    return out, EXIT_OK


_LOCUS_DEFAULTS = {
    "example2": ((-1.0, 0.99, 0.01), (-2.0, 2.0, 0.01)),
    "example1": ((-3.0, -1.0, 0.01), (-3.0, 3.0, 0.01)),
}


def cmd_locus(cfg: RunConfig) -> tuple[str, int, str]:
    if cfg.example not in _LOCUS_DEFAULTS:
        raise InputError(f"unknown example {cfg.example!r}; expected example1 or example2")
    kdef, mdef = _LOCUS_DEFAULTS[cfg.example]
    kappas = nullity.grid_axis(*(cfg.kappa or kdef))
    mus = nullity.grid_axis(*(cfg.mu or mdef))
    rows = nullity.example_report(cfg.example, kappas, mus, rank_tol=cfg.rank_tol)
    if all(r.verdict == "skipped" for r in rows):
        raise InputError(f"grid lies entirely outside the valid region: {rows[0].reason}")
    text = nullity.write_csv(rows)
    skipped = sum(r.verdict == "skipped" for r in rows)
    deficient = sum(r.verdict == "deficient" for r in rows)
    summary = f"{len(rows)} grid points, {deficient} deficient, {skipped} skipped\n"
    return text, EXIT_OK, summary


def cmd_catalog(cfg: RunConfig) -> tuple[dict, int]:
    out = []
    for name in model_names():
        M = get_model(name)
        out.append({
            "name": f"builtin:{name}",
            "dim": M.dim,
            "coords": list(M.coords),
            "signature": str(M.metric_at(M.sample_grid(1)[0]).signature),
            "fields": sorted(M.fields),
            "structure": None if M.structure is None else M.structure.epsilon,
        })
    return {"models": out}, EXIT_OK


COMMANDS = {
    "curvature": cmd_curvature,
    "certify": cmd_certify,
    "paracontact": cmd_paracontact,
    "locus": cmd_locus,
    "catalog": cmd_catalog,
}


# --------------------------------------------------------------------------
# argument handling


def _range(text: str) -> tuple[float, float, float]:
    try:
        lo, hi, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"need lo <= hi and step > 0, got {text!r}")
    return lo, hi, step


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxrank", description="Jacobi-operator rank and holonomy diagnostics.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="manifold JSON file or builtin:<name>")
    common.add_argument("--point", action="append", default=[], help="th=pi/4,phi=0 or 0.785,0 (repeatable)")
    common.add_argument("--random-points", type=int, default=0, help="extra random points drawn with --seed")
    common.add_argument("--field", default="xi")
    common.add_argument("--rank-tol", type=float, default=DEFAULT_RANK_TOL)
    common.add_argument("--iso-tol", type=float, default=DEFAULT_ISO_TOL)
    common.add_argument("--order", type=int, default=2)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--seed", type=int, default=42)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("curvature", "certify", "paracontact", "catalog"):
        sub.add_parser(name, parents=[common])
    loc = sub.add_parser("locus", parents=[common])
    loc.add_argument("example", nargs="?", default="example2", choices=["example1", "example2"])
    loc.add_argument("--kappa", type=_range, help="lo:hi:step")
    loc.add_argument("--mu", type=_range, help="lo:hi:step")
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=ns.command,
        input=ns.input,
        points=tuple(ns.point),
        field=ns.field,
        rank_tol=ns.rank_tol,
        iso_tol=ns.iso_tol,
        order=ns.order,
        out=ns.out,
        seed=ns.seed,
        random_points=ns.random_points,
        example=getattr(ns, "example", "example2"),
        kappa=getattr(ns, "kappa", None),
        mu=getattr(ns, "mu", None),
    )


def run(cfg: RunConfig) -> tuple[str, int, str]:
    """Returns (stdout payload, exit code, stderr text)."""
    result = COMMANDS[cfg.command](cfg)
    if cfg.command == "locus":
        return result
    payload, code = result
    err = "".join(f"{v}\n" for v in payload.get("violations", []))
    return dump(payload), code, err


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = config_from_args(ns)
        text, code, err = run(cfg)
    except (InputError, SpecError, ExprError, DegenerateMetric) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AxiomViolation as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DEFECT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if err:
        sys.stderr.write(err)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
