"""Exact spans of bivariate polynomials on the reference square [0,1]^2.

Polynomials carry Fraction coefficients, so membership and inclusion are
decided by exact rank computations with no tolerances.
"""

from dataclasses import dataclass
from fractions import Fraction
from math import comb

from quadfem.linalg import rational_rank
from quadfem.mesh import BilinearMap


def monomial_key(m):
    """Graded lexicographic order: total degree, then descending power of x."""
    i, j = m
    return (i + j, -i)


class RationalPoly:
    """Polynomial in (x, y) with exact rational coefficients.

    Stored as a dict {(i, j): Fraction} without zero entries; instances are
    treated as immutable.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        clean = {}
        for (i, j), c in (terms or {}).items():
            if i < 0 or j < 0:
                raise ValueError(f"negative exponent in monomial {(i, j)}")
            c = Fraction(c)
            if c != 0:
                clean[(int(i), int(j))] = c
        self.terms = clean

    @classmethod
    def monomial(cls, i, j, coeff=1):
        return cls({(i, j): coeff})

    @classmethod
    def constant(cls, c):
        return cls({(0, 0): c})

    def __add__(self, other):
        other = _as_poly(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return RationalPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return RationalPoly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        other = _as_poly(other)
        out = {}
        for (i1, j1), c1 in self.terms.items():
            for (i2, j2), c2 in other.terms.items():
                m = (i1 + i2, j1 + j2)
                out[m] = out.get(m, 0) + c1 * c2
        return RationalPoly(out)

    __rmul__ = __mul__

    def __pow__(self, k):
        result = RationalPoly.constant(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        try:
            return self.terms == _as_poly(other).terms
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    @property
    def total_degree(self):
        return max((i + j for i, j in self.terms), default=-1)

    @property
    def separate_degree(self):
        return max((max(i, j) for i, j in self.terms), default=-1)

    def monomials(self):
        return sorted(self.terms, key=monomial_key)

    def __call__(self, x, y):
        return sum(c * x**i * y**j for (i, j), c in self.terms.items())

    def swap(self):
        """The polynomial with x and y exchanged."""
        return RationalPoly({(j, i): c for (i, j), c in self.terms.items()})

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for i, j in self.monomials():
            c = self.terms[(i, j)]
            mono = "*".join(s for s in (_power("x", i), _power("y", j)) if s)
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")


def _power(v, k):
    return "" if k == 0 else v if k == 1 else f"{v}^{k}"


def _as_poly(p):
    if isinstance(p, RationalPoly):
        return p
    if isinstance(p, (int, Fraction)):
        return RationalPoly.constant(p)
    raise TypeError(f"cannot use {type(p).__name__} as a polynomial")


X = RationalPoly.monomial(1, 0)
Y = RationalPoly.monomial(0, 1)


@dataclass(frozen=True)
class PolySpan:
    """Linearly independent list of polynomials spanning a space."""

    basis: tuple
    name: str = ""

    def __post_init__(self):
        basis = tuple(self.basis)
        object.__setattr__(self, "basis", basis)
        if basis and rational_rank(coefficient_matrix(basis)) != len(basis):
            raise ValueError("basis polynomials are linearly dependent")

    @property
    def dim(self):
        return len(self.basis)

    @property
    def maxdeg(self):
        return max((p.separate_degree for p in self.basis), default=0)

    def monomials(self):
        """Every monomial appearing in some basis element, graded-lex sorted."""
        return sorted({m for p in self.basis for m in p.terms}, key=monomial_key)

    def __contains__(self, p):
        return member(self, p)

    def swap(self):
        return PolySpan(tuple(p.swap() for p in self.basis), self.name and f"swap({self.name})")

    def __repr__(self):
        label = f"{self.name} = " if self.name else ""
        return f"{label}span{{{', '.join(map(repr, self.basis))}}}"


def coefficient_matrix(polys, monomials=None):
    if monomials is None:
        monomials = sorted({m for p in polys for m in p.terms}, key=monomial_key)
    return [[p.terms.get(m, Fraction(0)) for m in monomials] for p in polys]


def _monomial_span(exponents, name):
    exps = sorted(set(exponents), key=monomial_key)
    return PolySpan(tuple(RationalPoly.monomial(i, j) for i, j in exps), name)


def make_space(kind, r):
    """Monomial basis of P_r (total degree), Q_r (separate degree) or S_r (serendipity)."""
    kind = kind.upper()
    if r < 0:
        raise ValueError(f"degree must be nonnegative, got {r}")
    if kind == "P":
        return _monomial_span([(i, j) for i in range(r + 1) for j in range(r + 1 - i)], f"P{r}")
    if kind == "Q":
        return _monomial_span([(i, j) for i in range(r + 1) for j in range(r + 1)], f"Q{r}")
    if kind == "S":
        if r < 1:
            raise ValueError("serendipity spaces start at r = 1")
        if r == 1:
            return PolySpan(make_space("Q", 1).basis, "S1")
        exps = [(i, j) for i in range(r + 1) for j in range(r + 1 - i)] + [(r, 1), (1, r)]
        return _monomial_span(exps, f"S{r}")
    raise ValueError(f"unknown space kind {kind!r}")


def rotated_space(r=1):
    """P_r plus x^(r+1) - y^(r+1); r = 1 gives the rotated bilinear span {1, x, y, x^2 - y^2}."""
    extra = RationalPoly.monomial(r + 1, 0) - RationalPoly.monomial(0, r + 1)
    return PolySpan(make_space("P", r).basis + (extra,), f"rotated{r}")


def parse_space(text):
    """Parse ``kind:R`` with kind one of p, q, s, rotated."""
    kind, _, degree = text.partition(":")
    if not degree.isdigit():
        raise ValueError(f"space must look like KIND:R, got {text!r}")
    r = int(degree)
    if kind.lower() == "rotated":
        return rotated_space(r)
    if kind.lower() not in ("p", "q", "s"):
        raise ValueError(f"unknown space kind {kind!r}")
    return make_space(kind, r)


def member(space, p):
    basis = list(space.basis)
    if not p:
        return True
    return rational_rank(coefficient_matrix(basis + [p])) == len(basis)


def missing(outer, inner):
    """First basis element of ``inner`` outside span(outer), or None."""
    rank = rational_rank(coefficient_matrix(outer.basis)) if outer.basis else 0
    for p in inner.basis:
        if rational_rank(coefficient_matrix(list(outer.basis) + [p])) > rank:
            return p
    return None


def contains(outer, inner):
    """True iff span(inner) is a subspace of span(outer)."""
    polys = list(outer.basis) + list(inner.basis)
    if not polys:
        return True
    return rational_rank(coefficient_matrix(polys)) == rational_rank(coefficient_matrix(outer.basis) or [[]])


def map_components(F):
    """The two components of a bilinear map as exact polynomials in the reference variables."""
    comps = []
    for a, b, c, d in F.coefficients:
        comps.append(
            RationalPoly({(0, 0): Fraction(a), (1, 0): Fraction(b), (0, 1): Fraction(c), (1, 1): Fraction(d)})
        )
    return tuple(comps)


def pullback(p, F):
    """Exact expansion of p composed with the bilinear map F."""
    F1, F2 = map_components(F)
    xpow = [RationalPoly.constant(1)]
    ypow = [RationalPoly.constant(1)]
    result = RationalPoly()
    for (i, j), c in p.terms.items():
        while len(xpow) <= i:
            xpow.append(xpow[-1] * F1)
        while len(ypow) <= j:
            ypow.append(ypow[-1] * F2)
        result = result + c * xpow[i] * ypow[j]
    return result


# The two maps of the reference square onto K' = quad (0,0),(1,0),(1,2),(0,1):
# F_tilde(x, y) = (x, y (x + 1)) and F_bar(x, y) = (y, x (y + 1)).
F_TILDE = BilinearMap.from_corners([(0, 0), (1, 0), (1, 2), (0, 1)])
F_BAR = BilinearMap.from_corners([(0, 0), (0, 1), (1, 2), (1, 0)])


def pullback_space(space, F):
    return [pullback(p, F) for p in space.basis]


def mapped_space_contains_Pr(space, F, r):
    """Does the space mapped by F contain every polynomial of total degree <= r?"""
    if not F.is_invertible():
        raise ValueError(f"bilinear map with corners {F.corners} is not invertible on the reference square")
    return all(member(space, pullback(p, F)) for p in make_space("P", r).basis)


def mapped_space_witness(space, F, r):
    """First monomial p of P_r whose pullback leaves the space, or None."""
    for p in make_space("P", r).basis:
        if not member(space, pullback(p, F)):
            return p
    return None


def qr_equivalence(space, r):
    """Both sides of the Q_r criterion: (Q_r inside space, P_r inside both mapped spaces)."""
    q_side = contains(space, make_space("Q", r))
    p_side = mapped_space_contains_Pr(space, F_TILDE, r) and mapped_space_contains_Pr(space, F_BAR, r)
    return {"q_side": q_side, "p_side": p_side}


def verify_identity(r, s):
    """Check x^r y^s = x^(r-s) [y (x+1)]^s - sum_{t=1}^s C(s,t) x^(r-t) y^s exactly."""
    if not 0 <= s <= r:
        raise ValueError(f"need 0 <= s <= r, got r={r}, s={s}")
    F1, F2 = map_components(F_TILDE)
    rhs = F1 ** (r - s) * F2**s
    for t in range(1, s + 1):
        rhs = rhs - comb(s, t) * RationalPoly.monomial(r - t, s)
    return rhs == RationalPoly.monomial(r, s)
