"""Exact test functions on the unit square: value, gradient and Laplacian."""

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class ScalarField:
    name: str
    value: Callable
    gradient: Callable  # returns (du/dx, du/dy)
    laplacian: Callable

    def rhs(self, x, y):
        """Source term f = -Laplacian(u)."""
        return -self.laplacian(x, y)


def _quartic():
    return ScalarField(
        "quartic",
        lambda x, y: x**3 + 5 * y**2 - 10 * y**3 + y**4,
        lambda x, y: (3 * x**2 + 0 * y, 10 * y - 30 * y**2 + 4 * y**3 + 0 * x),
        lambda x, y: 6 * x + 10 - 60 * y + 12 * y**2,
    )


def peak(x0=0.25, y0=1 / 3, k=100.0):
    def value(x, y):
        return np.exp(-k * ((x - x0) ** 2 + (y - y0) ** 2))

    def gradient(x, y):
        u = value(x, y)
        return -2 * k * (x - x0) * u, -2 * k * (y - y0) * u

    def laplacian(x, y):
        r2 = (x - x0) ** 2 + (y - y0) ** 2
        return (4 * k * k * r2 - 4 * k) * value(x, y)

    return ScalarField("peak", value, gradient, laplacian)


def monomial(i, j):
    """u = x^i y^j."""

    def power(t, k):
        return t**k if k > 0 else np.ones_like(t)

    def d_power(t, k):
        return k * t ** (k - 1) if k > 0 else np.zeros_like(t)

    def dd_power(t, k):
        return k * (k - 1) * t ** (k - 2) if k > 1 else np.zeros_like(t)

    def value(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return power(x, i) * power(y, j)

    def gradient(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return d_power(x, i) * power(y, j), power(x, i) * d_power(y, j)

    def laplacian(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return dd_power(x, i) * power(y, j) + power(x, i) * dd_power(y, j)

    return ScalarField(f"monomial:{i},{j}", value, gradient, laplacian)


def polynomial(terms, name="poly"):
    """Sum of c * x^i y^j for {(i, j): c} in ``terms``."""
    parts = [(float(c), monomial(i, j)) for (i, j), c in terms.items()]

    def combine(attr):
        def f(x, y):
            out = 0.0
            for c, m in parts:
                out = out + c * getattr(m, attr)(x, y)
            return out

        return f

    def gradient(x, y):
        gx, gy = 0.0, 0.0
        for c, m in parts:
            dx, dy = m.gradient(x, y)
            gx, gy = gx + c * dx, gy + c * dy
        return gx, gy

    return ScalarField(name, combine("value"), gradient, combine("laplacian"))


QUARTIC = _quartic()
PEAK = peak()

PROBLEMS = {"quartic": QUARTIC, "peak": PEAK}


def parse_field(text):
    """``quartic``, ``peak`` or ``monomial:i,j``."""
    if text in PROBLEMS:
        return PROBLEMS[text]
    kind, _, args = text.partition(":")
    if kind == "monomial":
        try:
            i, j = (int(a) for a in args.split(","))
        except ValueError:
            raise ValueError(f"monomial field must look like monomial:i,j, got {text!r}") from None
        if i < 0 or j < 0:
            raise ValueError(f"negative exponent in {text!r}")
        return monomial(i, j)
    raise ValueError(f"unknown field {text!r}")
