"""Tensor-product Gauss-Legendre rules on the reference square [0,1]^2."""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_ORDER = 12
ASSEMBLY_ORDER = 5
ERROR_ORDER = 6


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray  # (q*q, 2)
    weights: np.ndarray  # (q*q,)
    order: int


def _legendre(n, x):
    """P_n(x) and P_n'(x) by the three-term recurrence."""
    p0, p1 = 1.0, x
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


@lru_cache(maxsize=None)
def gauss_legendre_1d(q):
    """Nodes and weights of the q-point rule on [0, 1]."""
    nodes = np.empty(q)
    weights = np.empty(q)
    for i in range(q):
        x = math.cos(math.pi * (i + 0.75) / (q + 0.5))
        for _ in range(100):
            p, dp = _legendre(q, x)
            dx = p / dp
            x -= dx
            if abs(dx) <= 1e-16:
                break
        _, dp = _legendre(q, x)
        nodes[i] = x
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(nodes)
    nodes, weights = nodes[order], weights[order]
    # symmetrize so the rule is exactly invariant under reflection about 1/2
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    return 0.5 * (nodes + 1.0), 0.5 * weights


@lru_cache(maxsize=None)
def gauss_rule(q):
    """q x q Gauss-Legendre rule, exact for separate degree <= 2q - 1."""
    if not isinstance(q, (int, np.integer)) or not 1 <= q <= MAX_ORDER:
        raise ValueError(f"quadrature order must be an integer in [1, {MAX_ORDER}], got {q!r}")
    x, w = gauss_legendre_1d(int(q))
    X, Y = np.meshgrid(x, x, indexing="ij")
    points = np.column_stack([X.ravel(), Y.ravel()])
    weights = np.outer(w, w).ravel()
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points, weights, int(q))
