"""Discrete diffusion operators and their triangular splitting.

All operators are matrix-free stencil applications on interior-node fields.
The splitting writes the five-point diffusion operator A as A1 + A2, where
A1 takes the forward-neighbor flux half and A2 = A - A1 is its adjoint.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import Grid, GridFunction, check_same_grid

__all__ = [
    "Coefficient",
    "SpectralBounds",
    "ConvergenceError",
    "apply_D1",
    "apply_D2",
    "apply_A",
    "apply_A1",
    "apply_A2",
    "apply_A1A2",
    "apply_B",
    "apply_G_hyperbolic",
    "apply_R_hyperbolic",
    "spectral_bounds",
    "estimate_norm_A",
]


class ConvergenceError(RuntimeError):
    """Iteration cap hit; carries the last estimate in ``estimate``."""

    def __init__(self, msg: str, estimate: float):
        super().__init__(msg)
        self.estimate = estimate


@dataclass(frozen=True, eq=False)
class Coefficient:
    """Diffusion coefficient sampled at cell-face midpoints.

    k_face1[j, i] is k((i + 1/2)h1, (j + 1)h2) for i = 0..n1-1 — the face
    between x1-neighbor nodes i and i+1 at interior row j.  k_face2[j, i] is
    the x2-direction analog with shape (n2, n1-1).
    """

    grid: Grid
    k_face1: np.ndarray
    k_face2: np.ndarray
    k_lower: float
    k_upper: float

    def __post_init__(self):
        g = self.grid
        f1 = np.ascontiguousarray(self.k_face1, dtype=np.float64)
        f2 = np.ascontiguousarray(self.k_face2, dtype=np.float64)
        if f1.shape != (g.n2 - 1, g.n1):
            raise ValueError(f"k_face1 must have shape {(g.n2 - 1, g.n1)}")
        if f2.shape != (g.n2, g.n1 - 1):
            raise ValueError(f"k_face2 must have shape {(g.n2, g.n1 - 1)}")
        if self.k_lower <= 0.0:
            raise ValueError("coefficient lower bound must be positive")
        for f in (f1, f2):
            if f.min() < self.k_lower - 1e-12 or f.max() > self.k_upper + 1e-12:
                raise ValueError("face values violate the stated coefficient bounds")
            f.setflags(write=False)
        object.__setattr__(self, "k_face1", f1)
        object.__setattr__(self, "k_face2", f2)

    @classmethod
    def from_function(cls, g: Grid, k: Callable) -> "Coefficient":
        """Sample k(x1, x2) at face midpoints; bounds taken from the samples."""
        x1f = g.h1 * (np.arange(g.n1) + 0.5)
        x2n = g.h2 * np.arange(1, g.n2)
        X1, X2 = np.meshgrid(x1f, x2n, indexing="xy")
        f1 = np.asarray(np.broadcast_to(k(X1, X2), X1.shape), dtype=np.float64)

        x1n = g.h1 * np.arange(1, g.n1)
        x2f = g.h2 * (np.arange(g.n2) + 0.5)
        X1, X2 = np.meshgrid(x1n, x2f, indexing="xy")
        f2 = np.asarray(np.broadcast_to(k(X1, X2), X1.shape), dtype=np.float64)

        lo = min(f1.min(), f2.min())
        hi = max(f1.max(), f2.max())
        return cls(g, f1, f2, float(lo), float(hi))

    @classmethod
    def constant(cls, g: Grid, value: float = 1.0) -> "Coefficient":
        return cls.from_function(g, lambda x1, x2: np.full_like(x1, value))


@dataclass(frozen=True)
class SpectralBounds:
    """Eigenvalue bounds of the constant-coefficient operator, units 1/length^2."""

    delta1: float
    delta2: float
    Delta1: float
    Delta2: float
    delta: float
    Delta: float
    lower: float
    upper: float


def _neighbors(y2: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Shifted copies (east, west, north, south) with zero outside the domain."""
    yE = np.zeros_like(y2)
    yE[:, :-1] = y2[:, 1:]
    yW = np.zeros_like(y2)
    yW[:, 1:] = y2[:, :-1]
    yN = np.zeros_like(y2)
    yN[:-1, :] = y2[1:, :]
    yS = np.zeros_like(y2)
    yS[1:, :] = y2[:-1, :]
    return yE, yW, yN, yS


def _check(k: Coefficient, y: GridFunction) -> None:
    if k.grid != y.grid:
        raise ValueError("coefficient and grid function live on different grids")


def apply_D1(k: Coefficient, y: GridFunction) -> GridFunction:
    """Second-difference flux operator in x1 (negative definite sign flipped)."""
    _check(k, y)
    g = y.grid
    y2 = y.as_2d()
    ke = k.k_face1[:, 1:]
    kw = k.k_face1[:, :-1]
    yE, yW, _, _ = _neighbors(y2)
    out = -(ke * (yE - y2) - kw * (y2 - yW)) / g.h1**2
    return GridFunction(g, out)


def apply_D2(k: Coefficient, y: GridFunction) -> GridFunction:
    """Mirror of apply_D1 in x2."""
    _check(k, y)
    g = y.grid
    y2 = y.as_2d()
    kn = k.k_face2[1:, :]
    ks = k.k_face2[:-1, :]
    _, _, yN, yS = _neighbors(y2)
    out = -(kn * (yN - y2) - ks * (y2 - yS)) / g.h2**2
    return GridFunction(g, out)


def apply_A(k: Coefficient, y: GridFunction) -> GridFunction:
    """Full diffusion operator A = D1 + D2, fused in one pass."""
    _check(k, y)
    g = y.grid
    y2 = y.as_2d()
    ke = k.k_face1[:, 1:]
    kw = k.k_face1[:, :-1]
    kn = k.k_face2[1:, :]
    ks = k.k_face2[:-1, :]
    yE, yW, yN, yS = _neighbors(y2)
    out = (
        -(ke * (yE - y2) - kw * (y2 - yW)) / g.h1**2
        - (kn * (yN - y2) - ks * (y2 - yS)) / g.h2**2
    )
    return GridFunction(g, out)


def _half_diagonal(k: Coefficient) -> np.ndarray:
    """Half of A's diagonal; each triangular part carries one half so A1 = A2*."""
    g = k.grid
    ke = k.k_face1[:, 1:]
    kw = k.k_face1[:, :-1]
    kn = k.k_face2[1:, :]
    ks = k.k_face2[:-1, :]
    return 0.5 * ((ke + kw) / g.h1**2 + (kn + ks) / g.h2**2)


def apply_A1(k: Coefficient, y: GridFunction) -> GridFunction:
    """Upper triangular part of A: half the diagonal plus the forward-neighbor fluxes.

    Coincides with the pure forward-flux half when the coefficient is
    constant; the symmetric diagonal split keeps A1 = A2* exact for
    variable coefficients as well.
    """
    _check(k, y)
    g = y.grid
    y2 = y.as_2d()
    ke = k.k_face1[:, 1:]
    kn = k.k_face2[1:, :]
    yE, _, yN, _ = _neighbors(y2)
    out = _half_diagonal(k) * y2 - (ke * yE) / g.h1**2 - (kn * yN) / g.h2**2
    return GridFunction(g, out)


def apply_A2(k: Coefficient, y: GridFunction) -> GridFunction:
    """Lower triangular part: half the diagonal plus the backward-neighbor fluxes."""
    _check(k, y)
    g = y.grid
    y2 = y.as_2d()
    kw = k.k_face1[:, :-1]
    ks = k.k_face2[:-1, :]
    _, yW, _, yS = _neighbors(y2)
    out = _half_diagonal(k) * y2 - (kw * yW) / g.h1**2 - (ks * yS) / g.h2**2
    return GridFunction(g, out)


def apply_A1A2(k: Coefficient, y: GridFunction) -> GridFunction:
    """Composition A1(A2 y); self-adjoint since A1 = A2*."""
    return apply_A1(k, apply_A2(k, y))


def apply_B(k: Coefficient, sigma: float, tau: float, y: GridFunction) -> GridFunction:
    """Factorized operator (E + sigma*tau*A1)(E + sigma*tau*A2) applied to y."""
    if sigma < 0.0 or tau <= 0.0:
        raise ValueError("need sigma >= 0 and tau > 0")
    c = sigma * tau
    w = y + c * apply_A2(k, y)
    return w + c * apply_A1(k, w)


def apply_G_hyperbolic(k: Coefficient, sigma: float, tau: float, y: GridFunction) -> GridFunction:
    """(E + sigma*tau^2*A1)(E + sigma*tau^2*A2) applied to y."""
    if sigma < 0.0 or tau <= 0.0:
        raise ValueError("need sigma >= 0 and tau > 0")
    c = sigma * (tau * tau)
    w = y + c * apply_A2(k, y)
    return w + c * apply_A1(k, w)


def apply_R_hyperbolic(k: Coefficient, sigma: float, tau: float, y: GridFunction) -> GridFunction:
    """E + (sigma - 1/4)tau^2 A + sigma^2 tau^4 A1A2, positive for sigma >= 0.25."""
    if sigma < 0.0:
        raise ValueError("need sigma >= 0")
    return apply_G_hyperbolic(k, sigma, tau, y) - (tau * tau / 4.0) * apply_A(k, y)


def spectral_bounds(k: Coefficient) -> SpectralBounds:
    """Two-sided eigenvalue bounds k_lower*delta*E <= A <= k_upper*Delta*E."""
    g = k.grid
    d1 = (4.0 / g.h1**2) * np.sin(np.pi * g.h1 / (2.0 * g.l1)) ** 2
    d2 = (4.0 / g.h2**2) * np.sin(np.pi * g.h2 / (2.0 * g.l2)) ** 2
    D1 = (4.0 / g.h1**2) * np.cos(np.pi * g.h1 / (2.0 * g.l1)) ** 2
    D2 = (4.0 / g.h2**2) * np.cos(np.pi * g.h2 / (2.0 * g.l2)) ** 2
    delta = d1 + d2
    Delta = D1 + D2
    return SpectralBounds(
        delta1=float(d1),
        delta2=float(d2),
        Delta1=float(D1),
        Delta2=float(D2),
        delta=float(delta),
        Delta=float(Delta),
        lower=float(k.k_lower * delta),
        upper=float(k.k_upper * Delta),
    )


def estimate_norm_A(
    k: Coefficient,
    tol: float = 1e-10,
    seed: int = 0,
    max_iter: int = 10_000,
) -> float:
    """Largest eigenvalue of A by power iteration with a seeded random start.

    Stops when the relative change of the Rayleigh quotient drops below tol;
    raises ConvergenceError (carrying the last estimate) at the iteration cap.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    g = k.grid
    rng = np.random.default_rng(seed)
    x = GridFunction(g, rng.standard_normal(g.num_interior))
    lam = 0.0
    for _ in range(max_iter):
        y = apply_A(k, x)
        ynorm = float(np.linalg.norm(y.values))
        lam_new = float(np.dot(x.values, y.values) / np.dot(x.values, x.values))
        x = GridFunction(g, y.values / ynorm)
        if lam > 0.0 and abs(lam_new - lam) <= tol * abs(lam_new):
            return lam_new
        lam = lam_new
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations", lam
    )
