import numpy as np
import pytest
import scipy.sparse as sp

from quadfem.fields import QUARTIC, polynomial
from quadfem.linalg import pcg
from quadfem.mesh import QuadMesh, generate
from quadfem.poisson import (
    PoissonError,
    assemble,
    build_dofmap,
    error_norms,
    evaluate,
    interpolate,
    solve,
    solve_problem,
    table_run,
)

AFFINE = polynomial({(1, 0): 1.0, (0, 1): 2.0}, "x+2y")
QUADRATIC = polynomial({(2, 0): 1.0, (1, 1): 1.0}, "x^2+xy")
ELEMENTS = ["Q2", "S2"]


def zero(x, y):
    return np.zeros_like(x)


@pytest.mark.parametrize("kind", ELEMENTS)
@pytest.mark.parametrize("family", ["square", "trapezoid", "asympar"])
def test_dofmap_counts(kind, family):
    n = 4
    m = generate(family, n)
    d = build_dofmap(m, kind)
    n_edges = 2 * n * (n + 1)
    expected = (n + 1) ** 2 + n_edges + (n * n if kind == "Q2" else 0)
    assert d.n_dofs == expected
    assert len(d.boundary) == 8 * n
    # shared nodes get one index: every vertex/edge dof appears in the expected number of elements
    counts = np.bincount(d.element_dofs.ravel(), minlength=d.n_dofs)
    assert counts[d.n_vertex : d.n_vertex + d.n_edge].max() == 2
    if kind == "Q2":
        assert (counts[d.n_vertex + d.n_edge :] == 1).all()
    assert np.allclose(d.coords[d.boundary].min(axis=1) * (1 - d.coords[d.boundary].max(axis=1)), 0)


@pytest.mark.parametrize("kind", ELEMENTS)
@pytest.mark.parametrize("family", ["square", "trapezoid"])
def test_constant_solution(kind, family):
    system = assemble(generate(family, 4), kind, zero, lambda x, y: np.ones_like(x))
    u = solve(system)
    assert np.abs(u - 1.0).max() <= 1e-10


@pytest.mark.parametrize("kind", ELEMENTS)
def test_patch_test_trapezoid(kind):
    m = generate("trapezoid", 4)
    u = solve(assemble(m, kind, AFFINE.rhs, AFFINE.value))
    assert np.abs(u - interpolate(m, kind, AFFINE)).max() <= 1e-10


@pytest.mark.parametrize("kind", ELEMENTS)
def test_quadratic_exact_on_squares(kind):
    m = generate("square", 4)
    coeffs, err = solve_problem(QUADRATIC, kind, m)
    assert np.abs(coeffs - interpolate(m, kind, QUADRATIC)).max() <= 1e-10
    assert err["l2"] <= 1e-10 and err["h1_semi"] <= 1e-10


def test_q2_quadratic_exact_on_trapezoids():
    m = generate("trapezoid", 4)
    coeffs, err = solve_problem(QUADRATIC, "Q2", m)
    assert err["l2"] <= 1e-10


def test_interpolant_error_zero():
    m = generate("trapezoid", 4)
    err = error_norms(m, "Q2", interpolate(m, "Q2", AFFINE), AFFINE)
    assert err["l2"] <= 1e-10 and err["h1_semi"] <= 1e-10


def test_solver_matches_dense():
    system = assemble(generate("square", 2), "Q2", QUARTIC.rhs, QUARTIC.value)
    dense = np.linalg.solve(system.matrix.toarray(), system.rhs)
    u = solve(system)
    assert np.allclose(u[system.dofmap.interior], dense, atol=1e-10)


def test_scalar_system():
    x, hist = pcg(sp.csr_matrix([[3.0]]), np.array([6.0]))
    assert x[0] == pytest.approx(2.0, abs=1e-15) and hist[-1] <= 1e-12


@pytest.mark.parametrize("kind", ELEMENTS)
@pytest.mark.parametrize("family", ["square", "trapezoid", "asympar"])
def test_symmetry_and_galerkin_orthogonality(kind, family):
    system = assemble(generate(family, 8), kind, QUARTIC.rhs, QUARTIC.value)
    K = system.stiffness
    asym = abs(K - K.T).max()
    assert asym <= 1e-12 * abs(K).max()
    u = solve(system)
    x = u[system.dofmap.interior]
    assert np.abs(system.matrix @ x - system.rhs).max() <= 1e-10
    assert np.linalg.norm(system.matrix @ x - system.rhs) <= 1e-12 * np.linalg.norm(system.rhs)


EDGE_PARAMS = [
    lambda t: np.column_stack([t, 0 * t]),
    lambda t: np.column_stack([1 + 0 * t, t]),
    lambda t: np.column_stack([1 - t, 1 + 0 * t]),
    lambda t: np.column_stack([0 * t, 1 - t]),
]


@pytest.mark.parametrize("kind", ELEMENTS)
@pytest.mark.parametrize("family", ["trapezoid", "asympar"])
def test_interelement_continuity(kind, family):
    m = generate(family, 8)
    coeffs, _ = solve_problem("peak", kind, m)
    rng = np.random.default_rng(2)
    interior = [v for v in m.edges().values() if len(v) == 2]
    t = np.linspace(0.1, 0.9, 5)
    for k in rng.choice(len(interior), 10, replace=False):
        (e1, k1), (e2, k2) = interior[k]
        a = evaluate(m, kind, coeffs, e1, EDGE_PARAMS[k1](t))
        b = evaluate(m, kind, coeffs, e2, EDGE_PARAMS[k2](1 - t))  # neighbours traverse the edge backwards
        assert np.abs(a - b).max() <= 1e-10


@pytest.mark.parametrize("kind", ELEMENTS)
def test_quadrature_order_regression(kind):
    m = generate("trapezoid", 16)
    u5 = solve(assemble(m, kind, QUARTIC.rhs, QUARTIC.value, quad_order=5))
    u7 = solve(assemble(m, kind, QUARTIC.rhs, QUARTIC.value, quad_order=7))
    assert np.abs(u5 - u7).max() <= 1e-8


def test_nonpositive_jacobian_aborts():
    bad = QuadMesh(np.array([[0, 0], [0, 1], [1, 1], [1, 0]], float), np.array([[0, 1, 2, 3]]))
    with pytest.raises(PoissonError) as info:
        assemble(bad, "Q2", zero, zero)
    assert info.value.element == 0


def test_unknown_element():
    with pytest.raises(ValueError):
        assemble(generate("square", 2), "P3", zero, zero)


def test_table_run_layout():
    table = table_run("quartic", "Q2", "square", [2, 4, 8])
    assert table.columns() == ["n", "l2_err", "l2_pct", "l2_rate", "h1_err", "h1_pct", "h1_rate"]
    rates = table.rates("l2")
    errs = table.errors["l2"]
    assert rates[0] is None
    assert rates[2] == pytest.approx(np.log2(errs[1] / errs[2]))
    for norm in ("l2", "h1"):
        for e, p in zip(table.errors[norm], table.percents[norm]):
            assert p > 0 and e > 0


def test_percent_definition():
    m = generate("square", 4)
    _, err = solve_problem("quartic", "S2", m)
    zero_coeffs = np.zeros(build_dofmap(m, "S2").n_dofs)
    ref = error_norms(m, "S2", zero_coeffs, QUARTIC)
    assert err["l2_pct"] == pytest.approx(100 * err["l2"] / ref["l2"], rel=1e-12)
    assert err["h1_pct"] == pytest.approx(100 * err["h1_semi"] / ref["h1_semi"], rel=1e-12)
