"""Continuous mapped Q2 / S2 Galerkin solver for -Laplacian(u) = f, u = g on the boundary."""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from quadfem.fields import PROBLEMS
from quadfem.harness import ConvergenceTable
from quadfem.linalg import pcg
from quadfem.mesh import element_geometry, generate, inverse_2x2
from quadfem.parallel import reduce_sum
from quadfem.quadrature import ASSEMBLY_ORDER, ERROR_ORDER, gauss_rule
from quadfem.refelem import ReferenceElement, shape_gradients, shape_values

ELEMENTS = ("Q2", "S2")


class PoissonError(ArithmeticError):
    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


@dataclass(frozen=True, eq=False)
class DofMap:
    """Global numbering: vertices first, then edge midpoints, then Q2 centers."""

    element_dofs: np.ndarray  # (E, nb)
    coords: np.ndarray  # (N, 2)
    boundary: np.ndarray  # sorted global indices on the boundary
    n_vertex: int
    n_edge: int

    @property
    def n_dofs(self):
        return len(self.coords)

    @property
    def interior(self):
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.boundary] = False
        return np.nonzero(mask)[0]


def build_dofmap(mesh, kind):
    kind = kind.upper()
    V = len(mesh.vertices)
    edge_index = {}
    edge_count = {}
    for q in mesh.quads:
        for k in range(4):
            a, b = int(q[k]), int(q[(k + 1) % 4])
            key = (min(a, b), max(a, b))
            if key not in edge_index:
                edge_index[key] = V + len(edge_index)
            edge_count[key] = edge_count.get(key, 0) + 1
    n_edge = len(edge_index)
    E = mesh.n_elements
    nb = 9 if kind == "Q2" else 8
    dofs = np.empty((E, nb), dtype=np.int64)
    dofs[:, :4] = mesh.quads
    for e, q in enumerate(mesh.quads):
        for k in range(4):
            a, b = int(q[k]), int(q[(k + 1) % 4])
            dofs[e, 4 + k] = edge_index[(min(a, b), max(a, b))]
    coords = [mesh.vertices]
    edge_coords = np.empty((n_edge, 2))
    for (a, b), i in edge_index.items():
        edge_coords[i - V] = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
    coords.append(edge_coords)
    if kind == "Q2":
        dofs[:, 8] = V + n_edge + np.arange(E)
        coords.append(mesh.corners().mean(axis=1))
    boundary = set()
    for (a, b), count in edge_count.items():
        if count == 1:
            boundary.update((a, b, edge_index[(a, b)]))
    return DofMap(dofs, np.vstack(coords), np.array(sorted(boundary), dtype=np.int64), V, n_edge)


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """Assembled stiffness/load plus the system left after Dirichlet elimination."""

    stiffness: sp.csr_matrix
    load: np.ndarray
    matrix: sp.csr_matrix  # interior block
    rhs: np.ndarray
    dofmap: DofMap
    boundary_values: np.ndarray
    kind: str


def _element_arrays(mesh, elem, rule, idx):
    phys, J, det = element_geometry(mesh, rule.points, idx)
    bad = np.nonzero(~(det > 0).all(axis=1))[0]
    if bad.size:
        e = int(idx[bad[0]])
        raise PoissonError(f"nonpositive Jacobian determinant on element {e}", e)
    Jinv = inverse_2x2(J, det)
    dphi = shape_gradients(elem, rule.points)
    grad = np.einsum("pak,epki->epai", dphi, Jinv)
    return phys, rule.weights * det, grad


def assemble(mesh, kind, f, g, quad_order=ASSEMBLY_ORDER):
    """Stiffness and load by quadrature; Dirichlet data by nodal interpolation of g.

    ``f`` and ``g`` are callables of (x, y) arrays.
    """
    kind = kind.upper()
    if kind not in ELEMENTS:
        raise ValueError(f"unknown element {kind!r}")
    elem = ReferenceElement.nodal(kind)
    dofmap = build_dofmap(mesh, kind)
    rule = gauss_rule(quad_order)
    phi = shape_values(elem, rule.points)
    E, nb = dofmap.element_dofs.shape
    idx = np.arange(E)
    phys, wd, grad = _element_arrays(mesh, elem, rule, idx)
    Ke = np.einsum("ep,epai,epbi->eab", wd, grad, grad)
    Fe = np.einsum("ep,pa->ea", wd * f(phys[..., 0], phys[..., 1]), phi)

    d = dofmap.element_dofs
    rows = np.repeat(d, nb, axis=1).ravel()
    cols = np.tile(d, (1, nb)).ravel()
    N = dofmap.n_dofs
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(N, N)).tocsr()
    K.sum_duplicates()
    F = np.bincount(d.ravel(), weights=Fe.ravel(), minlength=N)

    B, I = dofmap.boundary, dofmap.interior
    gB = np.asarray(g(dofmap.coords[B, 0], dofmap.coords[B, 1]), dtype=float) * np.ones(len(B))
    A_II = K[I][:, I].tocsr()
    rhs = F[I] - K[I][:, B] @ gB
    return SparseSystem(K, F, A_II, rhs, dofmap, gB, kind)


def solve(system, tol=1e-12):
    """Full coefficient vector: CG on the interior block, g on the boundary."""
    u = np.empty(system.dofmap.n_dofs)
    u[system.dofmap.boundary] = system.boundary_values
    if len(system.rhs):
        x, _ = pcg(system.matrix, system.rhs, tol=tol)
        u[system.dofmap.interior] = x
    return u


def evaluate(mesh, kind, coeffs, e, ref_points):
    """Discrete solution on element ``e`` at reference points."""
    elem = ReferenceElement.nodal(kind)
    dofmap = build_dofmap(mesh, kind)
    return shape_values(elem, np.atleast_2d(ref_points)) @ coeffs[dofmap.element_dofs[e]]


def interpolate(mesh, kind, u):
    """Nodal interpolant coefficients of a ScalarField."""
    dofmap = build_dofmap(mesh, kind)
    return np.asarray(u.value(dofmap.coords[:, 0], dofmap.coords[:, 1]), dtype=float)


def error_norms(mesh, kind, coeffs, u_exact, quad_order=ERROR_ORDER, threads=None, dofmap=None):
    """L2 and H1-seminorm errors plus percentages of ||u|| and ||grad u|| on the same mesh."""
    kind = kind.upper()
    elem = ReferenceElement.nodal(kind)
    dofmap = dofmap or build_dofmap(mesh, kind)
    rule = gauss_rule(quad_order)
    phi = shape_values(elem, rule.points)

    def chunk(idx):
        phys, wd, grad = _element_arrays(mesh, elem, rule, idx)
        c = coeffs[dofmap.element_dofs[idx]]
        x, y = phys[..., 0], phys[..., 1]
        uval = u_exact.value(x, y)
        gx, gy = u_exact.gradient(x, y)
        gu = np.stack(np.broadcast_arrays(gx, gy), axis=-1)
        uh = c @ phi.T
        guh = np.einsum("ea,epai->epi", c, grad)
        return np.array(
            [
                np.sum(wd * (uval - uh) ** 2),
                np.sum(wd * np.sum((gu - guh) ** 2, axis=-1)),
                np.sum(wd * uval**2),
                np.sum(wd * np.sum(gu**2, axis=-1)),
            ]
        )

    l2, h1, unorm, gnorm = np.sqrt(reduce_sum(chunk, mesh.n_elements, threads))
    return {
        "l2": float(l2),
        "h1_semi": float(h1),
        "l2_pct": float(100 * l2 / unorm) if unorm > 0 else math.nan,
        "h1_pct": float(100 * h1 / gnorm) if gnorm > 0 else math.nan,
    }


def solve_problem(problem, kind, mesh, quad_order=ASSEMBLY_ORDER, error_order=ERROR_ORDER, threads=None):
    u = PROBLEMS[problem] if isinstance(problem, str) else problem
    system = assemble(mesh, kind, u.rhs, u.value, quad_order)
    coeffs = solve(system)
    return coeffs, error_norms(mesh, kind, coeffs, u, error_order, threads, system.dofmap)


def table_run(problem, kind, family, n_list, quad_order=ASSEMBLY_ORDER, error_order=ERROR_ORDER, threads=None):
    """Errors, percentages and rates over a mesh sequence."""
    ns = list(n_list)
    l2, h1, l2p, h1p = [], [], [], []
    for n in ns:
        _, err = solve_problem(problem, kind, generate(family, n), quad_order, error_order, threads)
        l2.append(err["l2"])
        h1.append(err["h1_semi"])
        l2p.append(err["l2_pct"])
        h1p.append(err["h1_pct"])
    return ConvergenceTable(
        ns,
        {"l2": l2, "h1": h1},
        {"l2": l2p, "h1": h1p},
        {
            "kind": "solve",
            "problem": problem if isinstance(problem, str) else problem.name,
            "element": kind.lower(),
            "family": family,
            "quad_order": quad_order,
            "error_order": error_order,
            "solver_tol": 1e-12,
        },
    )
