"""Random Jacobi operators drawn from the catalog, for rank-criterion sweeps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import get_model, model_names
from .linalg_point import PointBilinear, orthonormal_frame


@dataclass(frozen=True)
class JacobiSample:
    model: str
    point: np.ndarray
    xi: np.ndarray
    J: np.ndarray
    g: PointBilinear
    source: str  # "random" or a field name


def non_isotropic(g: PointBilinear, xi, ratio: float = 0.1) -> bool:
    """|g(xi, xi)| >= ratio ||g|| ||xi||^2: safely away from the null cone."""
    return abs(g(xi, xi)) >= ratio * np.linalg.norm(g.matrix, 2) * float(xi @ xi)


def sample_jacobi_operators(count: int, seed: int = 0, models=None, ratio: float = 0.1) -> list[JacobiSample]:
    """``count`` operators J_xi at random points with non-isotropic xi.

    Models are visited round robin.  Every third draw uses a named field of the
    model (when it is non-isotropic there), the rest random frame combinations,
    so rank-deficient products and flat spaces appear alongside maximal cases.
    """
    rng = np.random.default_rng(seed)
    names = list(models or model_names())
    out: list[JacobiSample] = []
    k = 0
    while len(out) < count:
        name = names[k % len(names)]
        k += 1
        M = get_model(name)
        x = M.random_points(1, rng)[0]
        geo = M.geometry(x, 2)
        g = geo.metric
        source = "random"
        xi = None
        if k % 3 == 0 and M.fields:
            fname = sorted(M.fields)[rng.integers(len(M.fields))]
            cand = M.field_at(fname, x)[0]
            if np.any(cand) and non_isotropic(g, cand, ratio):
                xi, source = cand, fname
        if xi is None:
            E, _ = orthonormal_frame(g)
            for _ in range(50):
                cand = E @ rng.normal(size=M.dim)
                if non_isotropic(g, cand, ratio):
                    xi = cand
                    break
        if xi is None:
            continue
        out.append(JacobiSample(name, x, xi, geo.jacobi_matrix(xi), g, source))
    return out
