"""Shape function bases on the reference square.

Nodal Q2 and S2 bases use this node order: corners counterclockwise from the
origin, then edge midpoints counterclockwise from the bottom edge, then (Q2
only) the center. Nodal coefficients come from an exact rational solve.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from quadfem.linalg import rational_inverse
from quadfem.polyspace import PolySpan, make_space

CORNERS = ((0, 0), (1, 0), (1, 1), (0, 1))
MIDPOINTS = ((Fraction(1, 2), 0), (1, Fraction(1, 2)), (Fraction(1, 2), 1), (0, Fraction(1, 2)))
CENTER = ((Fraction(1, 2), Fraction(1, 2)),)

# local nodes (by index) on each reference edge, in traversal order
EDGE_NODES = ((0, 4, 1), (1, 5, 2), (2, 6, 3), (3, 7, 0))


@dataclass(frozen=True, eq=False)
class ReferenceElement:
    """A basis on [0,1]^2 stored as a monomial coefficient table.

    ``exponents`` has shape (M, 2) and ``coeffs`` shape (M, dim): basis
    function k is sum_m coeffs[m, k] x^i_m y^j_m.
    """

    kind: str
    nodes: np.ndarray
    exponents: np.ndarray
    coeffs: np.ndarray
    space: PolySpan

    @property
    def dim(self):
        return self.coeffs.shape[1]

    @classmethod
    def nodal(cls, kind):
        kind = kind.upper()
        if kind == "Q2":
            space, nodes = make_space("Q", 2), CORNERS + MIDPOINTS + CENTER
        elif kind == "S2":
            space, nodes = make_space("S", 2), CORNERS + MIDPOINTS
        else:
            raise ValueError(f"unknown nodal element {kind!r}")
        monos = space.monomials()
        vander = [[Fraction(x) ** i * Fraction(y) ** j for i, j in monos] for x, y in nodes]
        # columns of the inverse Vandermonde are the nodal basis coefficients
        inv = rational_inverse(vander)
        return cls(
            kind,
            np.array(nodes, dtype=float),
            np.array(monos, dtype=np.int64),
            np.array(inv, dtype=float),
            space,
        )

    @classmethod
    def from_span(cls, space):
        monos = space.monomials()
        table = [[float(p.terms.get(m, 0)) for p in space.basis] for m in monos]
        return cls(
            f"span({space.name or space.dim})",
            np.empty((0, 2)),
            np.array(monos, dtype=np.int64).reshape(-1, 2),
            np.array(table, dtype=float).reshape(len(monos), space.dim),
            space,
        )


def _monomial_values(exps, pts):
    x, y = pts[:, 0:1], pts[:, 1:2]
    return x ** exps[:, 0] * y ** exps[:, 1]


def _monomial_gradients(exps, pts):
    x, y = pts[:, 0:1], pts[:, 1:2]
    i, j = exps[:, 0], exps[:, 1]
    dx = np.where(i > 0, i * x ** np.maximum(i - 1, 0), 0.0) * y**j
    dy = x**i * np.where(j > 0, j * y ** np.maximum(j - 1, 0), 0.0)
    return dx, dy


def shape_values(elem, p):
    """Basis values at reference point(s); shape (dim,) or (npts, dim)."""
    pts = np.atleast_2d(np.asarray(p, dtype=float))
    vals = _monomial_values(elem.exponents, pts) @ elem.coeffs
    return vals[0] if np.ndim(p) == 1 else vals


def shape_gradients(elem, p):
    """Reference gradients; shape (dim, 2) or (npts, dim, 2)."""
    pts = np.atleast_2d(np.asarray(p, dtype=float))
    dx, dy = _monomial_gradients(elem.exponents, pts)
    grads = np.stack([dx @ elem.coeffs, dy @ elem.coeffs], axis=-1)
    return grads[0] if np.ndim(p) == 1 else grads
