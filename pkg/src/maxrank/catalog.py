"""Built-in model manifolds used as fixtures and by ``builtin:<name>``."""
from __future__ import annotations

import math

from .manifold import ChartManifold, manifold_from_dict


def _diag(entries):
    d = len(entries)
    return [[entries[i] if i == j else "0" for j in range(d)] for i in range(d)]


def _unit(d, i):
    return ["1" if k == i else "0" for k in range(d)]


def flat(d: int, negatives: int = 0, name: str | None = None) -> dict:
    coords = [f"x{i}" for i in range(1, d + 1)]
    entries = ["-1"] * negatives + ["1"] * (d - negatives)
    return {
        "name": name or f"flat{d}" + (f"_{negatives}" if negatives else ""),
        "dim": d,
        "coords": coords,
        "metric": _diag(entries),
        "domain": {c: [-2.0, 2.0] for c in coords},
        "fields": {"xi": _unit(d, 0), **{f"d_{c}": _unit(d, i) for i, c in enumerate(coords)}},
    }


def sphere(d: int) -> dict:
    """Round unit S^d in hyperspherical angles a1..a_{d-1}, last angle ``phi``."""
    coords = [f"a{i}" for i in range(1, d)] + ["phi"]
    entries = []
    for k in range(d):
        entries.append("*".join(f"sin({c})^2" for c in coords[:k]) or "1")
    domain = {c: [0.0, math.pi] for c in coords[:-1]}
    domain["phi"] = [-math.pi, math.pi]
    fields = {f"d_{c}": _unit(d, i) for i, c in enumerate(coords)}
    fields["xi"] = _unit(d, 0)
    return {
        "name": f"s{d}",
        "dim": d,
        "coords": coords,
        "metric": _diag(entries),
        "domain": domain,
        "fields": fields,
    }


def hyperbolic(d: int) -> dict:
    """H^d as dt^2 + e^(2t) sum dx_i^2; curvature -1, xi = d_t."""
    coords = ["t"] + [f"x{i}" for i in range(1, d)]
    entries = ["1"] + ["exp(2*t)"] * (d - 1)
    return {
        "name": f"hyperbolic{d}",
        "dim": d,
        "coords": coords,
        "metric": _diag(entries),
        "domain": {c: [-1.0, 1.0] for c in coords},
        "fields": {"xi": _unit(d, 0), **{f"d_{c}": _unit(d, i) for i, c in enumerate(coords)}},
    }


def kenmotsu_h3() -> dict:
    spec = hyperbolic(3)
    spec["name"] = "kenmotsu_h3"
    spec["coords"] = ["t", "x", "y"]
    spec["domain"] = {"t": [-1.0, 1.0], "x": [-1.0, 1.0], "y": [-1.0, 1.0]}
    spec["fields"] = {"xi": ["1", "0", "0"], "d_x": ["0", "1", "0"], "d_y": ["0", "0", "1"]}
    spec["structure"] = {
        "epsilon": -1,
        "phi": [["0", "0", "0"], ["0", "0", "-1"], ["0", "1", "0"]],
        "xi": ["1", "0", "0"],
        "eta": ["1", "0", "0"],
    }
    return spec


def sasaki_s3() -> dict:
    """Unit S^3 in Hopf angles with xi = d_p1 + d_p2 and its Sasakian structure."""
    s, c = "sin(th)", "cos(th)"
    return {
        "name": "sasaki_s3",
        "dim": 3,
        "coords": ["th", "p1", "p2"],
        "metric": _diag(["1", f"{s}^2", f"{c}^2"]),
        "domain": {"th": [0.0, math.pi / 2], "p1": [-math.pi, math.pi], "p2": [-math.pi, math.pi]},
        "fields": {"xi": ["0", "1", "1"], "d_th": ["1", "0", "0"]},
        "structure": {
            "epsilon": -1,
            # phi(d_th) = -(c/s) d_p1 + (s/c) d_p2, phi(d_p1) = s c d_th, phi(d_p2) = -s c d_th
            "phi": [
                ["0", f"{s}*{c}", f"-{s}*{c}"],
                [f"-{c}/{s}", "0", "0"],
                [f"{s}/{c}", "0", "0"],
            ],
            "xi": ["0", "1", "1"],
            "eta": ["0", f"{s}^2", f"{c}^2"],
        },
    }


def paracontact_flat5() -> dict:
    """R^5 with dz^2 + 2(dx1 dy1 + dx2 dy2); phi = +1 on d_x, -1 on d_y."""
    coords = ["z", "x1", "x2", "y1", "y2"]
    g = [["0"] * 5 for _ in range(5)]
    g[0][0] = "1"
    for a, b in ((1, 3), (2, 4)):
        g[a][b] = g[b][a] = "1"
    phi = [["0"] * 5 for _ in range(5)]
    phi[1][1] = phi[2][2] = "1"
    phi[3][3] = phi[4][4] = "-1"
    return {
        "name": "paracontact_flat5",
        "dim": 5,
        "coords": coords,
        "metric": g,
        "domain": {c: [-1.0, 1.0] for c in coords},
        "fields": {"xi": _unit(5, 0)},
        "structure": {"epsilon": 1, "phi": phi, "xi": _unit(5, 0), "eta": _unit(5, 0)},
    }


def cosymplectic_flat3() -> dict:
    """Euclidean R x R^2 with constant rotation phi on the R^2 factor."""
    return {
        "name": "cosymplectic_flat3",
        "dim": 3,
        "coords": ["z", "x", "y"],
        "metric": _diag(["1", "1", "1"]),
        "domain": {c: [-1.0, 1.0] for c in ("z", "x", "y")},
        "fields": {"xi": ["1", "0", "0"]},
        "structure": {
            "epsilon": -1,
            "phi": [["0", "0", "0"], ["0", "0", "-1"], ["0", "1", "0"]],
            "xi": ["1", "0", "0"],
            "eta": ["1", "0", "0"],
        },
    }


def s2xs2() -> dict:
    coords = ["a1", "b1", "a2", "b2"]
    return {
        "name": "s2xs2",
        "dim": 4,
        "coords": coords,
        "metric": _diag(["1", "sin(a1)^2", "1", "sin(a2)^2"]),
        "domain": {
            "a1": [0.0, math.pi], "b1": [-math.pi, math.pi],
            "a2": [0.0, math.pi], "b2": [-math.pi, math.pi],
        },
        "fields": {"xi": ["1", "0", "1", "0"], "d_a1": _unit(4, 0)},
    }


def s2xr() -> dict:
    return {
        "name": "s2xr",
        "dim": 3,
        "coords": ["a", "b", "z"],
        "metric": _diag(["1", "sin(a)^2", "1"]),
        "domain": {"a": [0.0, math.pi], "b": [-math.pi, math.pi], "z": [-1.0, 1.0]},
        "fields": {"xi": ["1", "0", "1"], "d_a": _unit(3, 0)},
    }


def pp_wave(H: str = "x^2 + 0.5*y^2", name: str = "ppwave") -> dict:
    """2 du dv + H(u,x,y) du^2 + dx^2 + dy^2; ``d_v`` is null."""
    coords = ["u", "v", "x", "y"]
    g = [["0"] * 4 for _ in range(4)]
    g[0][0] = H
    g[0][1] = g[1][0] = "1"
    g[2][2] = g[3][3] = "1"
    return {
        "name": name,
        "dim": 4,
        "coords": coords,
        "metric": g,
        "domain": {c: [-1.0, 1.0] for c in coords},
        "fields": {"xi": _unit(4, 1), "d_v": _unit(4, 1), "d_u": _unit(4, 0)},
    }


def de_sitter4() -> dict:
    """Flat slicing -dt^2 + e^(2t)(dx^2+dy^2+dz^2); curvature +1, Lorentz signature."""
    coords = ["t", "x", "y", "z"]
    return {
        "name": "de_sitter4",
        "dim": 4,
        "coords": coords,
        "metric": _diag(["-1", "exp(2*t)", "exp(2*t)", "exp(2*t)"]),
        "domain": {c: [-1.0, 1.0] for c in coords},
        "fields": {"xi": _unit(4, 0), "d_x": _unit(4, 1)},
    }


def bianchi1() -> dict:
    """Kasner-like -dt^2 + a^2 dx^2 + b^2 dy^2 + c^2 dz^2 with unequal scale factors.

    ``null`` is the isotropic field d_t + e^(-t) d_x; its Jacobi operator has
    rank 3, which exercises the isotropy lemma with a nonzero top compound.
    """
    coords = ["t", "x", "y", "z"]
    return {
        "name": "bianchi1",
        "dim": 4,
        "coords": coords,
        "metric": _diag(["-1", "exp(2*t)", "exp(t)*(2+sin(t))", "cosh(t)^2"]),
        "domain": {"t": [-1.0, 1.0], "x": [-1.0, 1.0], "y": [-1.0, 1.0], "z": [-1.0, 1.0]},
        "fields": {"null": ["1", "exp(-t)", "0", "0"], "xi": _unit(4, 0)},
    }


def warped4() -> dict:
    """Riemannian dt^2 + e^(2t) dx^2 + e^t (2 + sin t) dy^2 + cosh(t)^2 dz^2 (no symmetry beyond translations)."""
    spec = bianchi1()
    spec["name"] = "warped4"
    spec["metric"][0][0] = "1"
    spec["fields"] = {"xi": _unit(4, 0), "d_x": _unit(4, 1)}
    return spec


_BUILDERS = {
    "flat3": lambda: flat(3),
    "flat4": lambda: flat(4),
    "flat6": lambda: flat(6),
    "minkowski4": lambda: flat(4, 1, "minkowski4"),
    "flat5_split": lambda: flat(5, 2, "flat5_split"),
    "s2": lambda: sphere(2),
    "s3": lambda: sphere(3),
    "s4": lambda: sphere(4),
    "hyperbolic4": lambda: hyperbolic(4),
    "kenmotsu_h3": kenmotsu_h3,
    "sasaki_s3": sasaki_s3,
    "paracontact_flat5": paracontact_flat5,
    "cosymplectic_flat3": cosymplectic_flat3,
    "s2xs2": s2xs2,
    "s2xr": s2xr,
    "ppwave": pp_wave,
    "de_sitter4": de_sitter4,
    "bianchi1": bianchi1,
    "warped4": warped4,
}

_CACHE: dict[str, ChartManifold] = {}


def model_names() -> list[str]:
    return list(_BUILDERS)


def get_model(name: str) -> ChartManifold:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise KeyError(f"unknown builtin model {name!r}; available: {', '.join(_BUILDERS)}") from None
    if name not in _CACHE:
        _CACHE[name] = manifold_from_dict(builder(), name)
    return _CACHE[name]


def model_catalog() -> dict[str, ChartManifold]:
    return {name: get_model(name) for name in _BUILDERS}
