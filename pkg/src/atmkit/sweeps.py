"""Explicit traveling-computation solves for the triangular factors.

(E + c*A1) couples each node only to its east/north neighbors, so the system
is solved exactly by one sweep from high indices to low; (E + c*A2) by the
ascending sweep.  The wavefront variants process anti-diagonals instead of
rows; they evaluate the identical per-node expression and are therefore
bit-identical to the lexicographic sweeps.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .grid import Grid, GridFunction
from .operators import Coefficient

__all__ = ["SweepWorkspace", "solve_upper", "solve_lower", "solve_factorized"]


@njit(cache=True)
def _sweep_upper_lex(b, ae, an, hd, c, out):
    m2, m1 = b.shape
    for j in range(m2 - 1, -1, -1):
        for i in range(m1 - 1, -1, -1):
            xe = out[j, i + 1] if i + 1 < m1 else 0.0
            xn = out[j + 1, i] if j + 1 < m2 else 0.0
            out[j, i] = (b[j, i] + c * (ae[j, i] * xe + an[j, i] * xn)) / (
                1.0 + c * hd[j, i]
            )


@njit(cache=True)
def _sweep_upper_wave(b, ae, an, hd, c, out):
    m2, m1 = b.shape
    for s in range(m1 + m2 - 2, -1, -1):
        for j in range(max(0, s - m1 + 1), min(m2, s + 1)):
            i = s - j
            xe = out[j, i + 1] if i + 1 < m1 else 0.0
            xn = out[j + 1, i] if j + 1 < m2 else 0.0
            out[j, i] = (b[j, i] + c * (ae[j, i] * xe + an[j, i] * xn)) / (
                1.0 + c * hd[j, i]
            )


@njit(cache=True)
def _sweep_lower_lex(b, aw, as_, hd, c, out):
    m2, m1 = b.shape
    for j in range(m2):
        for i in range(m1):
            xw = out[j, i - 1] if i > 0 else 0.0
            xs = out[j - 1, i] if j > 0 else 0.0
            out[j, i] = (b[j, i] + c * (aw[j, i] * xw + as_[j, i] * xs)) / (
                1.0 + c * hd[j, i]
            )


@njit(cache=True)
def _sweep_lower_wave(b, aw, as_, hd, c, out):
    m2, m1 = b.shape
    for s in range(m1 + m2 - 1):
        for j in range(max(0, s - m1 + 1), min(m2, s + 1)):
            i = s - j
            xw = out[j, i - 1] if i > 0 else 0.0
            xs = out[j - 1, i] if j > 0 else 0.0
            out[j, i] = (b[j, i] + c * (aw[j, i] * xw + as_[j, i] * xs)) / (
                1.0 + c * hd[j, i]
            )


@dataclass
class SweepWorkspace:
    """Reusable scratch for the factorized solve; one owner per solve."""

    grid: Grid
    scratch: np.ndarray = field(init=False)

    def __post_init__(self):
        self.scratch = np.empty(self.grid.shape)


def _stencil_weights(k: Coefficient):
    """Neighbor weights (east, north, west, south) over h_alpha^2 and the
    half diagonal carried by each triangular factor."""
    g = k.grid
    ae = k.k_face1[:, 1:] / g.h1**2
    an = k.k_face2[1:, :] / g.h2**2
    aw = k.k_face1[:, :-1] / g.h1**2
    as_ = k.k_face2[:-1, :] / g.h2**2
    hd = 0.5 * ((k.k_face1[:, 1:] + k.k_face1[:, :-1]) / g.h1**2
                + (k.k_face2[1:, :] + k.k_face2[:-1, :]) / g.h2**2)
    return ae, an, aw, as_, hd


def solve_upper(
    k: Coefficient, c: float, b: GridFunction, wavefront: bool = False
) -> GridFunction:
    """Solve (E + c*A1)x = b by a descending traveling computation."""
    if c < 0.0:
        raise ValueError("need c >= 0 (diagonal 1 + c*(...) must stay positive)")
    if k.grid != b.grid:
        raise ValueError("coefficient and right side live on different grids")
    ae, an, _, _, hd = _stencil_weights(k)
    out = np.empty(k.grid.shape)
    kern = _sweep_upper_wave if wavefront else _sweep_upper_lex
    kern(b.as_2d(), ae, an, hd, c, out)
    return GridFunction(k.grid, out)


def solve_lower(
    k: Coefficient, c: float, b: GridFunction, wavefront: bool = False
) -> GridFunction:
    """Solve (E + c*A2)x = b by an ascending traveling computation."""
    if c < 0.0:
        raise ValueError("need c >= 0 (diagonal 1 + c*(...) must stay positive)")
    if k.grid != b.grid:
        raise ValueError("coefficient and right side live on different grids")
    _, _, aw, as_, hd = _stencil_weights(k)
    out = np.empty(k.grid.shape)
    kern = _sweep_lower_wave if wavefront else _sweep_lower_lex
    kern(b.as_2d(), aw, as_, hd, c, out)
    return GridFunction(k.grid, out)


def solve_factorized(
    k: Coefficient, c: float, b: GridFunction, wavefront: bool = False
) -> GridFunction:
    """Solve (E + c*A1)(E + c*A2)x = b by the two sweeps in sequence."""
    z = solve_upper(k, c, b, wavefront=wavefront)
    return solve_lower(k, c, z, wavefront=wavefront)
