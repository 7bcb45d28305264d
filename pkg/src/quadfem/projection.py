"""Broken (element-by-element) best approximation onto mapped spaces.

Each element is handled independently: the reference space is pulled to
the element through its bilinear map and the local L2 or H1-seminorm best
approximation is computed from a Gram system. No continuity is imposed.
"""

import math
from fractions import Fraction

import numpy as np

from quadfem.harness import ConvergenceTable
from quadfem.linalg import NotPositiveDefinite, cholesky_solve, rational_rank
from quadfem.mesh import element_geometry, generate, inverse_2x2
from quadfem.parallel import reduce_sum
from quadfem.polyspace import PolySpan, coefficient_matrix, contains, make_space
from quadfem.quadrature import gauss_rule
from quadfem.refelem import ReferenceElement, shape_gradients, shape_values


class ProjectionError(ArithmeticError):
    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


def default_order(space):
    return max(5, space.maxdeg + 1)


def _geometry(mesh, rule, idx):
    phys, J, det = element_geometry(mesh, rule.points, idx)
    bad = np.nonzero(~(det > 0).all(axis=1))[0]
    if bad.size:
        raise ProjectionError(f"nonpositive Jacobian on element {int(idx[bad[0]])}", int(idx[bad[0]]))
    return phys, J, det


def _solve(G, b, idx, what):
    try:
        return cholesky_solve(G, b)
    except NotPositiveDefinite as exc:
        e = int(idx[exc.batch_index])
        raise ProjectionError(f"singular {what} Gram matrix on element {e} (pivot {exc.pivot})", e) from exc


def l2_local(space, mesh, u, elements=None, quad_order=None):
    """Per-element L2 best-approximation coefficients and squared errors."""
    rule = gauss_rule(quad_order or default_order(space))
    phi = shape_values(ReferenceElement.from_span(space), rule.points)
    idx = np.arange(mesh.n_elements) if elements is None else np.asarray(elements)
    phys, _, det = _geometry(mesh, rule, idx)
    wd = rule.weights * det
    G = np.einsum("ep,pi,pj->eij", wd, phi, phi)
    uval = u.value(phys[..., 0], phys[..., 1])
    b = np.einsum("ep,pi->ei", wd * uval, phi)
    c = _solve(G, b, idx, "mass")
    res = uval - c @ phi.T
    return c, np.sum(wd * res**2, axis=1)


def l2_element_error(space, mesh, u, e, coeffs, quad_order=None):
    """L2 error on element ``e`` for an arbitrary coefficient vector."""
    rule = gauss_rule(quad_order or default_order(space))
    phi = shape_values(ReferenceElement.from_span(space), rule.points)
    phys, _, det = _geometry(mesh, rule, np.array([e]))
    res = u.value(phys[0, :, 0], phys[0, :, 1]) - phi @ coeffs
    return math.sqrt(np.sum(rule.weights * det[0] * res**2))


def project_l2(space, mesh, u, quad_order=None, threads=None):
    """sqrt(sum_K ||u - v_K||^2) with v_K the L2 projection onto the mapped space."""
    if space.dim == 0:
        raise ProjectionError("empty reference space")
    total = reduce_sum(lambda idx: l2_local(space, mesh, u, idx, quad_order)[1].sum(), mesh.n_elements, threads)
    return math.sqrt(total)


def gradient_space(space):
    """Representatives of space modulo constants: basis with constant terms dropped.

    Requires the constants to be in the space; the result has dimension
    dim - 1 and no polynomial in it has zero gradient.
    """
    if not contains(space, make_space("P", 0)):
        raise ProjectionError(f"basis defect: {space.name or 'space'} does not contain the constants")
    chosen = []
    for p in space.basis:
        q = p - p.terms.get((0, 0), Fraction(0))
        if q and rational_rank(coefficient_matrix(chosen + [q])) == len(chosen) + 1:
            chosen.append(q)
    if len(chosen) != space.dim - 1:
        raise ProjectionError(
            f"basis defect: gradient nullspace of dimension {space.dim - len(chosen)}, expected 1"
        )
    return PolySpan(tuple(chosen), f"{space.name}/P0")


def h1_local(space, mesh, u, elements=None, quad_order=None):
    """Per-element H1-seminorm best approximation (coefficients in the deflated basis)."""
    reduced = gradient_space(space)
    rule = gauss_rule(quad_order or default_order(space))
    dphi = shape_gradients(ReferenceElement.from_span(reduced), rule.points)  # (P, m, 2)
    idx = np.arange(mesh.n_elements) if elements is None else np.asarray(elements)
    phys, J, det = _geometry(mesh, rule, idx)
    Jinv = inverse_2x2(J, det)
    grad = np.einsum("pmk,epki->epmi", dphi, Jinv)
    wd = rule.weights * det
    G = np.einsum("ep,epmi,epni->emn", wd, grad, grad)
    gx, gy = u.gradient(phys[..., 0], phys[..., 1])
    gu = np.stack(np.broadcast_arrays(gx, gy), axis=-1)
    b = np.einsum("ep,epi,epmi->em", wd, gu, grad)
    c = _solve(G, b, idx, "gradient")
    res = gu - np.einsum("em,epmi->epi", c, grad)
    return c, np.sum(wd * np.sum(res**2, axis=-1), axis=1)


def project_h1(space, mesh, u, quad_order=None, threads=None):
    """Broken H1-seminorm best-approximation error."""
    total = reduce_sum(lambda idx: h1_local(space, mesh, u, idx, quad_order)[1].sum(), mesh.n_elements, threads)
    return math.sqrt(total)


def full_degree(space, norm="l2"):
    """Largest r with P_r inside the space (inside P0 + space for h1); -1 if none."""
    r = -1
    base = space
    one = make_space("P", 0)
    if norm == "h1" and not contains(space, one):
        base = PolySpan(space.basis + one.basis)
    while r < space.maxdeg + 1 and contains(base, make_space("P", r + 1)):
        r += 1
    return r


def classify_rate(rate, space, norm):
    """'full', 'degraded' or 'inconclusive' for an observed asymptotic rate."""
    r = full_degree(space, norm)
    full = r + 1 if norm == "l2" else r
    if rate is None or not math.isfinite(rate):
        return "inconclusive"
    if abs(rate - full) <= 0.25:
        return "full"
    if abs(rate - (full - 1)) <= 0.25:
        return "degraded"
    return "inconclusive"


def convergence_study(space, family, n_list, u, norm="l2", quad_order=None, threads=None):
    ns = list(n_list)
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError(f"mesh sizes must be strictly increasing, got {ns}")
    if any(n & (n - 1) for n in ns):
        raise ValueError(f"mesh sizes must be powers of 2, got {ns}")
    project = {"l2": project_l2, "h1": project_h1}[norm]
    errors = [project(space, generate(family, n), u, quad_order, threads) for n in ns]
    table = ConvergenceTable(
        ns,
        {norm: errors},
        metadata={
            "space": space.name,
            "family": family,
            "field": u.name,
            "norm": norm,
            "quad_order": quad_order or default_order(space),
        },
    )
    rates = table.rates(norm)
    table.metadata["verdict"] = classify_rate(rates[-1] if rates else None, space, norm)
    return table


def monomial_sweep(space, family, n_list, r, norm="l2", quad_order=None, exact_tol=1e-10):
    """Run the convergence study for every monomial of P_r.

    Returns (worst, results) where results maps exponents (i, j) to their
    table and worst is the exponent pair with the lowest final rate among
    monomials not reproduced exactly (None if all are reproduced).
    """
    from quadfem.fields import monomial

    results = {}
    worst, worst_rate = None, math.inf
    for p in make_space("P", r).basis:
        (i, j), = p.terms
        table = convergence_study(space, family, n_list, monomial(i, j), norm, quad_order)
        results[(i, j)] = table
        errs = table.errors[norm]
        if max(errs) <= exact_tol:
            continue
        rate = table.rates(norm)[-1]
        if rate is not None and rate < worst_rate:
            worst, worst_rate = (i, j), rate
    return worst, results
