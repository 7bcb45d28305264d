"""Mapped quadrilateral finite element spaces and their approximation order."""

from quadfem.mesh import BilinearMap, QuadMesh, generate
from quadfem.polyspace import PolySpan, RationalPoly, contains, make_space, pullback
from quadfem.quadrature import gauss_rule
from quadfem.refelem import ReferenceElement

__version__ = "0.1.0"

__all__ = [
    "BilinearMap",
    "PolySpan",
    "QuadMesh",
    "RationalPoly",
    "ReferenceElement",
    "contains",
    "gauss_rule",
    "generate",
    "make_space",
    "pullback",
]
