import numpy as np
import pytest

from quadfem.linalg import rational_rank
from quadfem.polyspace import make_space
from quadfem.refelem import EDGE_NODES, ReferenceElement, shape_gradients, shape_values

Q2 = ReferenceElement.nodal("Q2")
S2 = ReferenceElement.nodal("S2")
rng = np.random.default_rng(11)
RANDOM_POINTS = rng.random((20, 2))


def test_node_layout():
    assert Q2.dim == 9 and S2.dim == 8
    assert Q2.nodes.tolist() == [
        [0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0], [1, 0.5], [0.5, 1], [0, 0.5], [0.5, 0.5]
    ]
    assert S2.nodes.tolist() == Q2.nodes[:8].tolist()


@pytest.mark.parametrize("elem", [Q2, S2], ids=["Q2", "S2"])
def test_kronecker(elem):
    vals = shape_values(elem, elem.nodes)
    assert np.abs(vals - np.eye(elem.dim)).max() <= 1e-12
    assert np.allclose(shape_values(elem, (0.0, 0.0)), np.eye(elem.dim)[0], atol=1e-12)


@pytest.mark.parametrize("elem", [Q2, S2], ids=["Q2", "S2"])
def test_partition_of_unity(elem):
    assert np.allclose(shape_values(elem, RANDOM_POINTS).sum(axis=1), 1.0, atol=1e-13)
    assert np.allclose(shape_gradients(elem, RANDOM_POINTS).sum(axis=1), 0.0, atol=1e-12)


def test_serendipity_centroid():
    vals = shape_values(S2, (0.5, 0.5))
    assert np.allclose(vals[:4], -0.25, atol=1e-14)
    assert np.allclose(vals[4:], 0.5, atol=1e-14)


@pytest.mark.parametrize("elem", [Q2, S2], ids=["Q2", "S2"])
def test_gradients_match_finite_differences(elem):
    h = 1e-6
    pts = np.vstack([RANDOM_POINTS * (1 - 2 * h) + h, elem.nodes.clip(h, 1 - h)])
    grads = shape_gradients(elem, pts)
    for k, shift in enumerate(np.eye(2) * h):
        fd = (shape_values(elem, pts + shift) - shape_values(elem, pts - shift)) / (2 * h)
        assert np.abs(fd - grads[..., k]).max() <= 1e-6


def test_serendipity_edge_derivatives_at_nodes():
    # along the bottom edge the nodal basis restricts to the 1D quadratic
    # Lagrange basis on {0, 1/2, 1}; its derivative at t=0 is (-3, 4, -1)
    g = shape_gradients(S2, (0.0, 0.0))[:, 0]
    a, m, b = EDGE_NODES[0]
    assert g[[a, m, b]] == pytest.approx([-3.0, 4.0, -1.0], abs=1e-12)
    others = [k for k in range(8) if k not in (a, m, b)]
    assert np.abs(g[others]).max() <= 1e-12


@pytest.mark.parametrize("elem", [Q2, S2], ids=["Q2", "S2"])
@pytest.mark.parametrize("edge", range(4))
def test_trace_is_quadratic(elem, edge):
    t = np.linspace(0, 1, 7)
    params = [np.column_stack([t, 0 * t]), np.column_stack([1 + 0 * t, t]),
              np.column_stack([1 - t, 1 + 0 * t]), np.column_stack([0 * t, 1 - t])][edge]
    vals = shape_values(elem, params)  # (7, dim)
    assert np.linalg.matrix_rank(vals, tol=1e-10) == 3
    # only the three edge nodes are active on the edge
    active = np.nonzero(np.abs(vals).max(axis=0) > 1e-12)[0]
    assert sorted(active) == sorted(EDGE_NODES[edge])
    # every trace is a quadratic in t
    V = np.vander(t, 3)
    resid = vals - V @ np.linalg.lstsq(V, vals, rcond=None)[0]
    assert np.abs(resid).max() <= 1e-12


def test_unisolvence_conditioning():
    monos = S2.exponents
    V = S2.nodes[:, None, 0] ** monos[:, 0] * S2.nodes[:, None, 1] ** monos[:, 1]
    assert np.isfinite(np.linalg.cond(V))
    assert rational_rank([[int(v * 8) for v in row] for row in V]) == 8


def test_generic_span():
    elem = ReferenceElement.from_span(make_space("P", 2))
    pts = RANDOM_POINTS
    vals = shape_values(elem, pts)
    x, y = pts[:, 0], pts[:, 1]
    expected = np.column_stack([np.ones_like(x), x, y, x * x, x * y, y * y])
    assert np.allclose(vals, expected, atol=1e-15)
    assert elem.nodes.shape == (0, 2)
