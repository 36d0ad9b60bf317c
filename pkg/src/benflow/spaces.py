"""Discrete stand-ins for V = H^1_0(0,1), H = L^2(0,1) and V' = H^-1(0,1).

Grid functions are plain numpy arrays of nodal values at the interior nodes
``x_i = i*dx``, ``i = 1..M``; the homogeneous Dirichlet values at ``x_0`` and
``x_{M+1}`` are implied. Elements of V' are identified with grid functions
through the H pairing, so ``laplacian_apply`` maps V into V' and
``lambda_solve`` is its inverse.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import solve_banded

__all__ = [
    "DiscreteSpace",
    "pairing_H",
    "laplacian_apply",
    "lambda_solve",
]


@dataclass(frozen=True)
class DiscreteSpace:
    """Uniform grid on (0, 1) with ``M`` interior nodes."""

    M: int
    dx: float = field(init=False)

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M!r}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "dx", 1.0 / (self.M + 1))

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.arange(1, self.M + 1) * self.dx

    @cached_property
    def all_nodes(self) -> np.ndarray:
        """Nodes including the two boundary points."""
        return np.arange(self.M + 2) * self.dx

    @cached_property
    def midpoints(self) -> np.ndarray:
        """Cell midpoints; there are ``M + 1`` cells."""
        return (np.arange(self.M + 1) + 0.5) * self.dx

    def check(self, a, name: str = "grid function") -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if a.shape[-1:] != (self.M,):
            raise ValueError(
                f"{name} has trailing dimension {a.shape[-1:] or '()'}, expected ({self.M},)"
            )
        return a

    def sample(self, f) -> np.ndarray:
        """Evaluate a callable at the interior nodes."""
        return np.asarray(f(self.nodes), dtype=float) * np.ones(self.M)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.M)

    # -- pairings and norms ------------------------------------------------

    def pairing(self, a, b) -> float | np.ndarray:
        a = self.check(a)
        b = self.check(b)
        return self.dx * np.sum(a * b, axis=-1)

    def norm_H(self, a) -> float:
        return float(np.sqrt(self.pairing(a, a)))

    def norm_V(self, v) -> float:
        g = self.grad(v)
        return float(np.sqrt(self.dx * np.sum(g * g)))

    def norm_Vdual(self, vstar) -> float:
        return self.norm_V(self.lambda_solve(vstar))

    # -- difference operators ----------------------------------------------

    def pad(self, v) -> np.ndarray:
        """Append the zero boundary values along the last axis."""
        v = self.check(v)
        width = [(0, 0)] * (v.ndim - 1) + [(1, 1)]
        return np.pad(v, width)

    def grad(self, v) -> np.ndarray:
        """Forward differences on the ``M + 1`` cells."""
        return np.diff(self.pad(v), axis=-1) / self.dx

    def grad_T(self, s) -> np.ndarray:
        """Transpose of :meth:`grad` (a negative discrete divergence)."""
        s = np.asarray(s, dtype=float)
        if s.shape[-1] != self.M + 1:
            raise ValueError(f"cell array must have length {self.M + 1}")
        return (s[..., :-1] - s[..., 1:]) / self.dx

    def cell_average(self, v) -> np.ndarray:
        p = self.pad(v)
        return 0.5 * (p[..., :-1] + p[..., 1:])

    def laplacian_apply(self, v) -> np.ndarray:
        """Three-point stencil for ``-d^2/dx^2`` with zero boundary values."""
        p = self.pad(v)
        return (-p[..., :-2] + 2.0 * p[..., 1:-1] - p[..., 2:]) / self.dx**2

    @cached_property
    def _banded(self) -> np.ndarray:
        ab = np.empty((3, self.M))
        ab[0] = -1.0 / self.dx**2
        ab[1] = 2.0 / self.dx**2
        ab[2] = -1.0 / self.dx**2
        return ab

    def laplacian_matrix(self) -> np.ndarray:
        """Dense matrix of :meth:`laplacian_apply` (symmetric positive definite).

        The Laplacian proper is its negation, which is negative definite.
        """
        n = self.M
        return (
            np.diag(np.full(n, 2.0)) - np.diag(np.ones(n - 1), 1) - np.diag(np.ones(n - 1), -1)
        ) / self.dx**2

    def lambda_solve(self, vstar) -> np.ndarray:
        """Solve ``laplacian_apply(eta) = vstar``; accepts stacked right-hand sides."""
        vstar = self.check(vstar, "vstar")
        if vstar.ndim == 1:
            return solve_banded((1, 1), self._banded, vstar)
        flat = vstar.reshape(-1, self.M).T
        return solve_banded((1, 1), self._banded, flat).T.reshape(vstar.shape)


def pairing_H(space: DiscreteSpace, a, b) -> float:
    return float(space.pairing(a, b))


def laplacian_apply(space: DiscreteSpace, v) -> np.ndarray:
    return space.laplacian_apply(v)


def lambda_solve(space: DiscreteSpace, vstar) -> np.ndarray:
    return space.lambda_solve(vstar)
