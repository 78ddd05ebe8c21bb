"""Gauduchon connections on left-invariant Hermitian structures.

Library + CLI for building left-invariant Hermitian models from structure
constants, computing the one-parameter family of Gauduchon connections
with their torsion and curvature, verifying the torsion-derivative
substitution calculus exactly on the LCK torsion family, and reproducing
the exact determinant/rank analysis of the associated 4x4 linear system.
"""

from .scalars import QI
from .polynomials import (
    RationalPoly,
    PolyMatrix,
    abc,
    coefficient_identities,
    system_matrix,
    determinant,
    determinant_factored,
    singular_set,
    reduced_rank,
    conclude_C_zero,
)

__all__ = [
    "QI",
    "RationalPoly",
    "PolyMatrix",
    "abc",
    "coefficient_identities",
    "system_matrix",
    "determinant",
    "determinant_factored",
    "singular_set",
    "reduced_rank",
    "conclude_C_zero",
]

__version__ = "0.1.0"
