"""Shared fixtures and independent dense-matrix oracles.

The dense assemblies below are deliberately written as scalar loops straight
from the stencil definitions, independent of the matrix-free code they check.
Dense construction is only ever used on grids up to 16x16 cells.
"""
from __future__ import annotations

import numpy as np
import pytest

from atmkit import Coefficient, Grid, GridFunction


@pytest.fixture
def unit4() -> Grid:
    return Grid(1.0, 1.0, 4, 4)


@pytest.fixture
def unit8() -> Grid:
    return Grid(1.0, 1.0, 8, 8)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


def variable_k(g: Grid, lo: float = 1.0, hi: float = 2.0) -> Coefficient:
    """Smooth coefficient with values in [lo, hi]."""
    mid, amp = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return Coefficient.from_function(
        g, lambda x1, x2: mid + amp * np.sin(3.0 * x1) * np.cos(2.0 * x2)
    )


def random_field(g: Grid, rng: np.random.Generator) -> GridFunction:
    return GridFunction(g, rng.standard_normal(g.num_interior))


def _index(g: Grid, i: int, j: int) -> int:
    """Flat index of interior node (i1, i2) = (i+1, j+1); x1 fastest."""
    return j * (g.n1 - 1) + i


def _half_diag(k: Coefficient, i: int, j: int) -> float:
    g = k.grid
    return 0.5 * (
        (k.k_face1[j, i + 1] + k.k_face1[j, i]) / g.h1**2
        + (k.k_face2[j + 1, i] + k.k_face2[j, i]) / g.h2**2
    )


def dense_A1(k: Coefficient) -> np.ndarray:
    """Upper triangular part: half of A's diagonal plus east/north fluxes."""
    g = k.grid
    m1, m2 = g.n1 - 1, g.n2 - 1
    n = m1 * m2
    M = np.zeros((n, n))
    for j in range(m2):
        for i in range(m1):
            row = _index(g, i, j)
            M[row, row] = _half_diag(k, i, j)
            if i + 1 < m1:
                M[row, _index(g, i + 1, j)] = -k.k_face1[j, i + 1] / g.h1**2
            if j + 1 < m2:
                M[row, _index(g, i, j + 1)] = -k.k_face2[j + 1, i] / g.h2**2
    return M


def dense_A2(k: Coefficient) -> np.ndarray:
    """Lower triangular part: half of A's diagonal plus west/south fluxes."""
    g = k.grid
    m1, m2 = g.n1 - 1, g.n2 - 1
    n = m1 * m2
    M = np.zeros((n, n))
    for j in range(m2):
        for i in range(m1):
            row = _index(g, i, j)
            M[row, row] = _half_diag(k, i, j)
            if i > 0:
                M[row, _index(g, i - 1, j)] = -k.k_face1[j, i] / g.h1**2
            if j > 0:
                M[row, _index(g, i, j - 1)] = -k.k_face2[j, i] / g.h2**2
    return M


def dense_A(k: Coefficient) -> np.ndarray:
    """Full five-point operator assembled flux by flux."""
    g = k.grid
    m1, m2 = g.n1 - 1, g.n2 - 1
    n = m1 * m2
    M = np.zeros((n, n))
    for j in range(m2):
        for i in range(m1):
            row = _index(g, i, j)
            ke = k.k_face1[j, i + 1] / g.h1**2
            kw = k.k_face1[j, i] / g.h1**2
            kn = k.k_face2[j + 1, i] / g.h2**2
            ks = k.k_face2[j, i] / g.h2**2
            M[row, row] += ke + kw + kn + ks
            if i + 1 < m1:
                M[row, _index(g, i + 1, j)] -= ke
            if i > 0:
                M[row, _index(g, i - 1, j)] -= kw
            if j + 1 < m2:
                M[row, _index(g, i, j + 1)] -= kn
            if j > 0:
                M[row, _index(g, i, j - 1)] -= ks
    return M


def dense_B(k: Coefficient, sigma: float, tau: float) -> np.ndarray:
    n = k.grid.num_interior
    E = np.eye(n)
    return (E + sigma * tau * dense_A1(k)) @ (E + sigma * tau * dense_A2(k))


def dense_G(k: Coefficient, sigma: float, tau: float) -> np.ndarray:
    n = k.grid.num_interior
    E = np.eye(n)
    c = sigma * tau * tau
    return (E + c * dense_A1(k)) @ (E + c * dense_A2(k))
