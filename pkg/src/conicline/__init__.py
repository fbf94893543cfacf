"""Analysis of pencils of plane projective curves over C.

Given two coprime degree-d forms f, g this package finds the base locus of
the pencil lambda*f + mu*g, enumerates its singular members, decomposes
conic-line members into lines and irreducible conics, computes local
singularity invariants and fiber Euler characteristics, and checks the
resulting counts against the structural bounds they must satisfy
(m <= 6 - p for the number m of conic-line members with p concurrent-line
members, per-fiber Euler bounds, node counts, and the global Euler ledger).
"""

from .forms import (
    BinaryForm,
    DEFAULT_TOL,
    HomTernaryForm,
    ProjPoint,
    ProjTransform,
    QC,
    Tolerances,
    parse_form,
)
from .pencil import Pencil, make_pencil
from .verify import AnalysisReport, analyze_pencil

__all__ = [
    "AnalysisReport",
    "BinaryForm",
    "DEFAULT_TOL",
    "HomTernaryForm",
    "Pencil",
    "ProjPoint",
    "ProjTransform",
    "QC",
    "Tolerances",
    "analyze_pencil",
    "make_pencil",
    "parse_form",
]
