"""Quadrilateral meshes of the unit square, bilinear element maps and distortion."""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

FAMILIES = ("square", "trapezoid", "asympar")

# Macro pattern on [0,1]^2: four congruent trapezoids, each similar to
# (0,0),(1/2,0),(1/2,2/3),(0,1/3). Entries are (x, y) in thirds/halves.
_MACRO_QUADS = (
    ((0, 0), (Fraction(1, 2), 0), (Fraction(1, 2), Fraction(2, 3)), (0, Fraction(1, 3))),
    ((Fraction(1, 2), 0), (1, 0), (1, Fraction(1, 3)), (Fraction(1, 2), Fraction(2, 3))),
    ((0, Fraction(1, 3)), (Fraction(1, 2), Fraction(2, 3)), (Fraction(1, 2), 1), (0, 1)),
    ((Fraction(1, 2), Fraction(2, 3)), (1, Fraction(1, 3)), (1, 1), (Fraction(1, 2), 1)),
)


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class BilinearMap:
    """Bilinear map of the reference square onto a quadrilateral.

    ``corners`` are the images of (0,0), (1,0), (1,1), (0,1). Entries may be
    floats or Fractions; arithmetic keeps whatever type it is given, so exact
    corners give exact coefficients.
    """

    corners: tuple

    @classmethod
    def from_corners(cls, corners):
        return cls(tuple(tuple(c) for c in corners))

    @classmethod
    def identity(cls):
        return cls.from_corners([(0, 0), (1, 0), (1, 1), (0, 1)])

    @property
    def coefficients(self):
        """Per component (a, b, c, d) with F = a + b x + c y + d x y."""
        p00, p10, p11, p01 = self.corners
        out = []
        for k in range(2):
            a = p00[k]
            b = p10[k] - p00[k]
            c = p01[k] - p00[k]
            d = p11[k] - p10[k] - p01[k] + p00[k]
            out.append((a, b, c, d))
        return tuple(out)

    def __call__(self, xh, yh):
        (a1, b1, c1, d1), (a2, b2, c2, d2) = self.coefficients
        return (a1 + b1 * xh + c1 * yh + d1 * xh * yh, a2 + b2 * xh + c2 * yh + d2 * xh * yh)

    def jacobian(self, xh, yh):
        """Jacobian matrix [[dx/dxh, dx/dyh], [dy/dxh, dy/dyh]] and its determinant."""
        (_, b1, c1, d1), (_, b2, c2, d2) = self.coefficients
        J = ((b1 + d1 * yh, c1 + d1 * xh), (b2 + d2 * yh, c2 + d2 * xh))
        det = J[0][0] * J[1][1] - J[0][1] * J[1][0]
        return J, det

    def corner_determinants(self):
        # det J is affine on the reference square, so its corner values bound it
        return [self.jacobian(x, y)[1] for x, y in ((0, 0), (1, 0), (1, 1), (0, 1))]

    def is_invertible(self):
        dets = self.corner_determinants()
        return all(d > 0 for d in dets) or all(d < 0 for d in dets)


def jacobian(F, p):
    """Jacobian of ``F`` at reference point ``p`` as a numpy matrix plus determinant.

    Raises MeshError if the determinant is not positive.
    """
    J, det = F.jacobian(*p)
    if not det > 0:
        raise MeshError(f"nonpositive Jacobian determinant {float(det):.3e} at {tuple(p)}")
    return np.array(J, dtype=float), float(det)


@dataclass(frozen=True, eq=False)
class QuadMesh:
    vertices: np.ndarray
    quads: np.ndarray
    boundary_vertices: frozenset = field(default_factory=frozenset)
    level: int = 0

    @property
    def n_elements(self):
        return len(self.quads)

    def corners(self, e=None):
        """Corner coordinates, shape (4, 2) for one element or (E, 4, 2) for all."""
        if e is None:
            return self.vertices[self.quads]
        return self.vertices[self.quads[e]]

    def edges(self):
        """Map from sorted vertex pair to the list of (element, local edge) using it."""
        use = {}
        for e, q in enumerate(self.quads):
            for k in range(4):
                a, b = int(q[k]), int(q[(k + 1) % 4])
                use.setdefault((min(a, b), max(a, b)), []).append((e, k))
        return use

    def areas(self):
        x = self.corners()
        xs, ys = x[..., 0], x[..., 1]
        return 0.5 * np.sum(xs * np.roll(ys, -1, axis=1) - np.roll(xs, -1, axis=1) * ys, axis=1)


def element_map(mesh, e):
    return BilinearMap.from_corners(tuple(map(float, v)) for v in mesh.corners(e))


def _from_quad_list(quads_xy, level):
    """Build a mesh from explicit corner lists, merging coincident vertices."""
    index = {}
    vertices = []
    quads = []
    for quad in quads_xy:
        ids = []
        for x, y in quad:
            key = (round(float(x), 12), round(float(y), 12))
            if key not in index:
                index[key] = len(vertices)
                vertices.append((float(x), float(y)))
            ids.append(index[key])
        quads.append(ids)
    vertices = np.array(vertices, dtype=float)
    on_boundary = np.isclose(vertices, 0.0, atol=1e-12) | np.isclose(vertices, 1.0, atol=1e-12)
    boundary = frozenset(int(i) for i in np.nonzero(on_boundary.any(axis=1))[0])
    return QuadMesh(vertices, np.array(quads, dtype=np.int64), boundary, level)


def _macro_quads(n_macro):
    H = Fraction(1, n_macro)
    out = []
    for j in range(n_macro):
        for i in range(n_macro):
            for quad in _MACRO_QUADS:
                out.append([((i + x) * H, (j + y) * H) for x, y in quad])
    return out


def refine(mesh):
    """Split every quadrilateral in four by joining midpoints of opposite edges.

    Children keep the parent's orientation: child k is the image of the k-th
    quarter of the reference square under the parent map.
    """
    quads_xy = []
    for v in mesh.corners():
        m = [(v[k] + v[(k + 1) % 4]) / 2 for k in range(4)]
        c = v.mean(axis=0)
        quads_xy += [
            (v[0], m[0], c, m[3]),
            (m[0], v[1], m[1], c),
            (c, m[1], v[2], m[2]),
            (m[3], c, m[2], v[3]),
        ]
    return _from_quad_list(quads_xy, mesh.level * 2)


def generate(family, n):
    """Mesh of the unit square with n x n quadrilaterals.

    ``square`` is the uniform grid; ``trapezoid`` tiles an (n/2) x (n/2) grid
    with the four-trapezoid macro pattern; ``asympar`` starts from the n = 2
    macro pattern and refines by midpoint subdivision.
    """
    if family not in FAMILIES:
        raise MeshError(f"unknown mesh family {family!r}; expected one of {FAMILIES}")
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise MeshError(f"n must be a positive integer, got {n!r}")
    if family == "square":
        h = Fraction(1, n)
        quads = [
            [(i * h, j * h), ((i + 1) * h, j * h), ((i + 1) * h, (j + 1) * h), (i * h, (j + 1) * h)]
            for j in range(n)
            for i in range(n)
        ]
        return _from_quad_list(quads, n)
    if n % 2:
        raise MeshError(f"{family} meshes need even n, got {n}")
    if family == "trapezoid":
        return _from_quad_list(_macro_quads(n // 2), n)
    if n & (n - 1):
        raise MeshError(f"asympar meshes need n a power of 2, got {n}")
    mesh = _from_quad_list(_macro_quads(1), 2)
    while mesh.level < n:
        mesh = refine(mesh)
    return mesh


def _outward_normal(a, b):
    d = b - a
    return np.array([d[1], -d[0]])


def _angle(u, v):
    # atan2 form stays accurate near pi, where acos loses half the digits
    return math.atan2(abs(u[0] * v[1] - u[1] * v[0]), u @ v)


def sigma_of(corners):
    """Deviation from a parallelogram: max |pi - angle between opposite outward normals|."""
    v = np.asarray(corners, dtype=float)
    normals = [_outward_normal(v[k], v[(k + 1) % 4]) for k in range(4)]
    t1 = _angle(normals[0], normals[2])
    t2 = _angle(normals[1], normals[3])
    return max(abs(math.pi - t1), abs(math.pi - t2))


def sigma(mesh, e):
    return sigma_of(mesh.corners(e))


def diameter(mesh, e):
    v = mesh.corners(e)
    return max(np.linalg.norm(v[i] - v[j]) for i in range(4) for j in range(i + 1, 4))


def is_convex(corners):
    v = np.asarray(corners, dtype=float)
    for k in range(4):
        d1 = v[(k + 1) % 4] - v[k]
        d2 = v[(k + 2) % 4] - v[(k + 1) % 4]
        if d1[0] * d2[1] - d1[1] * d2[0] <= 0.0:
            return False
    return True


def write_mesh(mesh, path):
    lines = ["quadmesh 1", f"vertices {len(mesh.vertices)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines.append(f"quads {len(mesh.quads)}")
    lines += [" ".join(str(int(i)) for i in q) for q in mesh.quads]
    boundary = sorted(mesh.boundary_vertices)
    lines.append(f"boundary {len(boundary)}")
    lines += [str(i) for i in boundary]
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def read_mesh(path):
    with open(path) as fh:
        tokens = [line.split() for line in fh if line.strip()]
    if tokens[0] != ["quadmesh", "1"]:
        raise MeshError(f"{path}: not a quadmesh 1 file")
    pos = 1

    def section(name):
        nonlocal pos
        if tokens[pos][0] != name:
            raise MeshError(f"{path}: expected section {name!r}, got {tokens[pos][0]!r}")
        count = int(tokens[pos][1])
        rows = tokens[pos + 1 : pos + 1 + count]
        pos += 1 + count
        return rows

    vertices = np.array([[float(x) for x in r] for r in section("vertices")], dtype=float)
    quads = np.array([[int(i) for i in r] for r in section("quads")], dtype=np.int64)
    boundary = frozenset(int(r[0]) for r in section("boundary"))
    return QuadMesh(vertices, quads.reshape(-1, 4), boundary, 0)


def element_geometry(mesh, pts, elements=None):
    """Bilinear maps of all (or selected) elements evaluated at reference points.

    Returns physical points (E, P, 2), Jacobians (E, P, 2, 2) with
    J[..., i, k] = d x_i / d xhat_k, and determinants (E, P).
    """
    pts = np.asarray(pts, dtype=float)
    X = mesh.corners() if elements is None else mesh.vertices[mesh.quads[elements]]
    xh, yh = pts[:, 0], pts[:, 1]
    N = np.stack([(1 - xh) * (1 - yh), xh * (1 - yh), xh * yh, (1 - xh) * yh], axis=1)
    dN = np.stack(
        [
            np.stack([-(1 - yh), -(1 - xh)], axis=1),
            np.stack([1 - yh, -xh], axis=1),
            np.stack([yh, xh], axis=1),
            np.stack([-yh, 1 - xh], axis=1),
        ],
        axis=1,
    )  # (P, 4, 2)
    phys = np.einsum("pa,eai->epi", N, X)
    J = np.einsum("pak,eai->epik", dN, X)
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    return phys, J, det


def inverse_2x2(J, det):
    inv = np.empty_like(J)
    inv[..., 0, 0] = J[..., 1, 1] / det
    inv[..., 0, 1] = -J[..., 0, 1] / det
    inv[..., 1, 0] = -J[..., 1, 0] / det
    inv[..., 1, 1] = J[..., 0, 0] / det
    return inv
