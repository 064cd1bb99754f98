"""Jacobi-operator rank criteria, parallel symmetric 2-tensors and para-contact diagnostics."""
from .expr import ScalarExpression, eval_jet, parse
from .linalg_point import (
    CharPoly,
    Endomorphism,
    PointBilinear,
    char_poly,
    compound_matrix,
    max_rank_certificate,
    rank_one_decompose,
)
from .manifold import ChartManifold, PointGeometry, load_manifold
from .catalog import get_model, model_names
from .parallel import certify, invariance_solve, transport_holonomy_oracle
from .paracontact import classify, nullity_fit, validate_structure
from .nullity import jacobi_closed_form, singular_locus, example_report

__all__ = [
    "ScalarExpression", "eval_jet", "parse",
    "CharPoly", "Endomorphism", "PointBilinear", "char_poly", "compound_matrix",
    "max_rank_certificate", "rank_one_decompose",
    "ChartManifold", "PointGeometry", "load_manifold", "get_model", "model_names",
    "certify", "invariance_solve", "transport_holonomy_oracle",
    "classify", "nullity_fit", "validate_structure",
    "jacobi_closed_form", "singular_locus", "example_report",
]
