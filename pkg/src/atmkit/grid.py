"""Uniform rectangular grid, interior-node grid functions, and discrete inner products.

Only interior nodes are stored; homogeneous Dirichlet values on the boundary
are implied and never representable, so they cannot be violated.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class GridMismatchError(ValueError):
    """Two grid functions that must live on the same grid do not."""


class OperatorNotPositiveError(ValueError):
    """A quadratic form that must be nonnegative came out significantly negative."""


@dataclass(frozen=True)
class Grid:
    """Uniform mesh on (0, l1) x (0, l2) with n_alpha cells per direction.

    Interior nodes are x = (i1*h1, i2*h2) with i_alpha = 1..n_alpha-1.
    Steps are computed once at construction so downstream sums are
    bit-reproducible.
    """

    l1: float
    l2: float
    n1: int
    n2: int
    h1: float = field(init=False)
    h2: float = field(init=False)

    def __post_init__(self):
        if self.l1 <= 0.0 or self.l2 <= 0.0:
            raise ValueError("domain side lengths must be positive")
        if self.n1 < 2 or self.n2 < 2:
            raise ValueError("need at least 2 cells (one interior node) per direction")
        object.__setattr__(self, "h1", self.l1 / self.n1)
        object.__setattr__(self, "h2", self.l2 / self.n2)

    @property
    def shape(self) -> tuple[int, int]:
        """(rows, cols) = (n2-1, n1-1): x1-index varies fastest."""
        return (self.n2 - 1, self.n1 - 1)

    @property
    def num_interior(self) -> int:
        return (self.n1 - 1) * (self.n2 - 1)

    def interior_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrids (x1, x2) of interior node coordinates, shape (n2-1, n1-1)."""
        x1 = self.h1 * np.arange(1, self.n1)
        x2 = self.h2 * np.arange(1, self.n2)
        return np.meshgrid(x1, x2, indexing="xy")


@dataclass(frozen=True)
class GridFunction:
    """Scalar field on the interior nodes of a grid.

    ``values`` is 1D in lexicographic order with the x1-index fastest;
    ``as_2d()`` exposes the (n2-1, n1-1) view used by the stencil kernels.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64).reshape(-1)
        if v.size != self.grid.num_interior:
            raise ValueError(
                f"expected {self.grid.num_interior} interior values, got {v.size}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def as_2d(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        check_same_grid(self, other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        check_same_grid(self, other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, a: float) -> "GridFunction":
        return GridFunction(self.grid, a * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)


def zeros(g: Grid) -> GridFunction:
    return GridFunction(g, np.zeros(g.num_interior))


def check_same_grid(y: GridFunction, w: GridFunction) -> None:
    if y.grid != w.grid:
        raise GridMismatchError("grid functions live on different grids")


def inner_product(y: GridFunction, w: GridFunction) -> float:
    """Discrete L2 scalar product: sum over interior nodes of y*w*h1*h2."""
    check_same_grid(y, w)
    return float(np.dot(y.values, w.values) * (y.grid.h1 * y.grid.h2))


def norm(y: GridFunction) -> float:
    return np.sqrt(inner_product(y, y))


def energy_norm(y: GridFunction, apply_D: Callable[[GridFunction], GridFunction]) -> float:
    """sqrt((Dy, y)) for a self-adjoint positive operator given as a callable.

    Raises OperatorNotPositiveError if the quadratic form is negative beyond
    a -1e-12*(y,y) rounding allowance.
    """
    q = inner_product(apply_D(y), y)
    if q < -1e-12 * inner_product(y, y):
        raise OperatorNotPositiveError(f"(Dy, y) = {q} < 0: operator is not positive")
    return np.sqrt(max(q, 0.0))


def sample(g: Grid, f: Callable, t: float = 0.0) -> GridFunction:
    """Evaluate f(x1, x2, t) (or f(x1, x2) if t-independent) at interior nodes."""
    x1, x2 = g.interior_coords()
    try:
        vals = np.broadcast_to(f(x1, x2, t), g.shape)
    except TypeError:
        vals = np.broadcast_to(f(x1, x2), g.shape)
    return GridFunction(g, np.array(vals, dtype=np.float64))
