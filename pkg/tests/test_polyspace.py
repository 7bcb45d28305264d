import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings, strategies as st

from quadfem.linalg import rational_rank
from quadfem.mesh import BilinearMap
from quadfem.polyspace import (
    F_BAR,
    F_TILDE,
    PolySpan,
    RationalPoly,
    X,
    Y,
    coefficient_matrix,
    contains,
    make_space,
    mapped_space_contains_Pr,
    member,
    missing,
    parse_space,
    pullback,
    qr_equivalence,
    rotated_space,
    verify_identity,
)

ROTATED = PolySpan((RationalPoly.constant(1), X, Y, X * X - Y * Y), "rotated")


def mono(i, j):
    return RationalPoly.monomial(i, j)


@pytest.mark.parametrize("r", range(7))
def test_dimensions(r):
    assert make_space("P", r).dim == (r + 1) * (r + 2) // 2
    assert make_space("Q", r).dim == (r + 1) ** 2
    if r >= 2:
        assert make_space("S", r).dim == make_space("P", r).dim + 2


def test_p1_basis():
    assert set(make_space("P", 1).basis) == {mono(0, 0), mono(1, 0), mono(0, 1)}


def test_s2_basis():
    expected = {mono(0, 0), mono(1, 0), mono(0, 1), mono(2, 0), mono(1, 1), mono(0, 2), mono(2, 1), mono(1, 2)}
    S2 = make_space("S", 2)
    assert S2.dim == 8 and set(S2.basis) == expected


def test_q2_contains_top_monomial():
    assert make_space("Q", 2).dim == 9
    assert member(make_space("Q", 2), mono(2, 2))


def test_s1_is_q1():
    assert set(make_space("S", 1).basis) == set(make_space("Q", 1).basis)


def test_graded_lex_order():
    assert [p.monomials()[0] for p in make_space("Q", 1).basis] == [(0, 0), (1, 0), (0, 1), (1, 1)]


def test_dependent_basis_rejected():
    with pytest.raises(ValueError):
        PolySpan((X, Y, X + Y))


def test_contains_examples():
    S2, P2, Q2 = make_space("S", 2), make_space("P", 2), make_space("Q", 2)
    assert contains(S2, P2)
    assert not contains(S2, Q2)
    assert missing(S2, Q2) == mono(2, 2)
    for r in (2, 3, 4):
        assert contains(make_space("P", r), make_space("Q", r // 2))


def test_pullback_examples():
    assert pullback(Y, F_TILDE) == Y + X * Y
    assert pullback(X * Y, F_TILDE) == X * Y + mono(2, 1)
    p = mono(3, 1) - Fraction(2, 3) * mono(0, 2) + 5
    assert pullback(p, BilinearMap.identity()) == p


def test_pullback_exact_with_rational_corners():
    F = BilinearMap.from_corners([(0, 0), (Fraction(1, 2), 0), (Fraction(1, 2), Fraction(2, 3)), (0, Fraction(1, 3))])
    assert pullback(Y, F) == Fraction(1, 3) * Y + Fraction(1, 3) * X * Y


def test_mapped_space_examples():
    Q2 = make_space("Q", 2)
    F = BilinearMap.from_corners([(0, 0), (Fraction(3, 2), Fraction(1, 5)), (2, 2), (Fraction(-1, 4), 1)])
    assert F.is_invertible()
    assert mapped_space_contains_Pr(Q2, F, 2)
    assert not mapped_space_contains_Pr(make_space("S", 2), F_TILDE, 2)
    assert not mapped_space_contains_Pr(ROTATED, F_TILDE, 1)
    assert not member(ROTATED, pullback(Y, F_TILDE))


def test_mapped_space_rejects_degenerate_map():
    bowtie = BilinearMap.from_corners([(0, 0), (1, 0), (0, 1), (1, 1)])
    with pytest.raises(ValueError):
        mapped_space_contains_Pr(make_space("Q", 1), bowtie, 1)


def test_qr_equivalence_examples():
    assert qr_equivalence(make_space("Q", 2), 2) == {"q_side": True, "p_side": True}
    assert qr_equivalence(make_space("S", 2), 2) == {"q_side": False, "p_side": False}
    assert qr_equivalence(make_space("P", 3), 1) == {"q_side": True, "p_side": True}


def test_identity_examples():
    assert verify_identity(2, 1)
    assert verify_identity(1, 0)
    with pytest.raises(ValueError):
        verify_identity(1, 2)


@pytest.mark.parametrize("r", range(7))
def test_identity_all(r):
    assert all(verify_identity(r, s) for s in range(r + 1))


SPACES = [make_space(k, r) for k in "PQ" for r in range(5)] + [make_space("S", r) for r in range(1, 5)] + [ROTATED]


@pytest.mark.parametrize("space", SPACES, ids=lambda s: s.name)
@pytest.mark.parametrize("r", range(5))
def test_equivalence_battery(space, r):
    res = qr_equivalence(space, r)
    assert res["q_side"] == res["p_side"]


@pytest.mark.parametrize("space", SPACES, ids=lambda s: s.name)
def test_symmetric_spaces_give_same_answer_for_both_maps(space):
    assume_symmetric = contains(space, space.swap()) and contains(space.swap(), space)
    if not assume_symmetric:
        pytest.skip("space not invariant under x <-> y")
    for r in range(4):
        assert mapped_space_contains_Pr(space, F_TILDE, r) == mapped_space_contains_Pr(space, F_BAR, r)


def test_parse_space():
    assert parse_space("s:2").name == "S2"
    assert set(parse_space("rotated:1").basis) == set(ROTATED.basis)
    assert rotated_space(2).dim == 7
    with pytest.raises(ValueError):
        parse_space("z:2")


rationals = st.fractions(min_value=-3, max_value=3, max_denominator=6)


def _recombine(space, rng):
    # random unit lower/upper triangular recombination is always invertible
    n = space.dim
    L = [[Fraction(rng.randint(-3, 3), rng.randint(1, 4)) if j < i else Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    U = [[Fraction(rng.randint(-3, 3), rng.randint(1, 4)) if j > i else Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    M = [[sum(L[i][k] * U[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
    basis = []
    for row in M:
        p = RationalPoly()
        for c, b in zip(row, space.basis):
            p = p + c * b
        basis.append(p)
    return PolySpan(tuple(basis), space.name)


@pytest.mark.parametrize("seed", range(5))
def test_contains_invariant_under_change_of_basis(seed):
    rng = random.Random(seed)
    for outer, inner in itertools.product(SPACES[:8] + [make_space("S", 2)], repeat=2):
        expected = contains(outer, inner)
        assert contains(_recombine(outer, rng), _recombine(inner, rng)) == expected


@settings(max_examples=40, deadline=None)
@given(
    corners=st.lists(st.tuples(rationals, rationals), min_size=4, max_size=4),
    terms=st.dictionaries(st.tuples(st.integers(0, 4), st.integers(0, 4)), rationals, min_size=1, max_size=6),
)
def test_pullback_separate_degree_bound(corners, terms):
    p = RationalPoly({m: c for m, c in terms.items() if sum(m) <= 4})
    assume(p)
    F = BilinearMap.from_corners(corners)
    assert pullback(p, F).separate_degree <= p.total_degree


def test_serendipity_node_matrix_unisolvent():
    nodes = [(0, 0), (1, 0), (1, 1), (0, 1), (Fraction(1, 2), 0), (1, Fraction(1, 2)), (Fraction(1, 2), 1), (0, Fraction(1, 2))]
    monos = make_space("S", 2).monomials()
    V = [[Fraction(x) ** i * Fraction(y) ** j for i, j in monos] for x, y in nodes]
    assert rational_rank(V) == 8


def test_coefficient_matrix_layout():
    assert coefficient_matrix([X + 2 * Y]) == [[1, 2]]
