"""One-dimensional quasilinear parabolic models wired into :class:`BenProblem`.

* nonlinear diffusion ``D_t u - d/dx (k(u) du/dx) = h`` (semi-monotone;
  convex when ``k`` is constant),
* the Kirchhoff transform ``theta(v) = int_0^v k(s) ds``,
* the two-phase Stefan problem in the enthalpy variable,
  ``D_t u - d^2/dx^2 theta(u) = h`` with a plateau of ``theta`` on ``[0, L]``,
* diffusion-convection ``D_t u - d^2u/dx^2 + b du/dx = h`` with ``db/dx <= 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .convex import AddQuadratic, IndicatorInterval, MoreauEnvelope, Quadratic, ScalarConvex
from .flow import (BenProblem, LinearFlowOperator, NodalFlowOperator, SemimonoFlowOperator,
                   WEIGHTS)
from .graphs import MonotoneGraph, linear_graph, plateau_graph
from .representation import (ParamMonotoneFamily, elliptic_representative, fenchel_representative,
                             nodal_fenchel_representative, shift_by_linear)
from .spaces import DiscreteSpace

__all__ = [
    "DiffusionLaw",
    "ConvectionField",
    "kirchhoff_transform",
    "stefan_graph",
    "stefan_potential",
    "convection_matrix",
    "convection_form",
    "diffusion_matrix",
    "build_diffusion_problem",
    "build_heat_problem",
    "build_stefan_problem",
]

LAW_KINDS = ("constant", "affine", "quadratic", "grid")


@dataclass(frozen=True, eq=False)
class DiffusionLaw:
    """Diffusivity ``k(s)`` bounded by ``0 < k_min <= k <= k_max`` on ``range``.

    ``constant``: ``k = a``; ``affine``: ``1 + a s``; ``quadratic``:
    ``1 + a s^2``; ``grid``: linear interpolation of ``(s_grid, k_grid)``.
    Outside ``range`` every law is continued by its end values.
    """

    kind: str
    a: float = 1.0
    s_grid: tuple | None = None
    k_grid: tuple | None = None
    range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in LAW_KINDS:
            raise ValueError(f"unknown law kind {self.kind!r}; expected one of {LAW_KINDS}")
        if self.kind == "grid":
            if self.s_grid is None or self.k_grid is None:
                raise ValueError("grid law needs s_grid and k_grid")
            s = np.asarray(self.s_grid, dtype=float)
            if s.ndim != 1 or s.size < 2 or np.any(np.diff(s) <= 0) or len(self.k_grid) != s.size:
                raise ValueError("s_grid must be strictly increasing and match k_grid")
        if self.range is None:
            lo, hi = -3.0, 3.0
            if self.kind == "affine" and self.a != 0:
                if self.a > 0:
                    lo = max(lo, -0.5 / self.a)
                else:
                    hi = min(hi, 0.5 / -self.a)
            if self.kind == "grid":
                lo, hi = float(self.s_grid[0]), float(self.s_grid[-1])
            object.__setattr__(self, "range", (lo, hi))
        lo, hi = self.range
        if not lo < hi:
            raise ValueError("range must satisfy lo < hi")
        if not self.k_min > 0:
            raise ValueError(f"coercivity violation: k_min = {self.k_min:.3g} <= 0 on {self.range}")

    def k(self, s):
        """Diffusivity; constant beyond the working range so that ``k >= k_min`` everywhere."""
        s = np.clip(np.asarray(s, dtype=float), *self.range)
        if self.kind == "constant":
            out = np.full(s.shape, float(self.a))
        elif self.kind == "affine":
            out = 1.0 + self.a * s
        elif self.kind == "quadratic":
            out = 1.0 + self.a * s * s
        else:
            out = np.interp(s, self.s_grid, self.k_grid)
        return float(out) if out.ndim == 0 else out

    @cached_property
    def _samples(self) -> np.ndarray:
        return np.linspace(*self.range, 401)

    @property
    def k_min(self) -> float:
        return float(np.min(self.k(self._samples)))

    @property
    def k_max(self) -> float:
        return float(np.max(self.k(self._samples)))

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant" or (self.kind in ("affine", "quadratic") and self.a == 0)

    @cached_property
    def _theta_table(self):
        s = self._samples
        th = cumulative_trapezoid(self.k(s), s, initial=0.0)
        return s, th - np.interp(0.0, s, th)

    def theta(self, v):
        """``int_0^v k(s) ds``; closed form except for grid laws."""
        v = np.asarray(v, dtype=float)
        lo, hi = self.range
        if self.kind == "grid":
            s, th = self._theta_table
            out = np.interp(v, s, th)
            th_lo, th_hi = th[0], th[-1]
        else:
            out = self._theta_closed(np.clip(v, lo, hi))
            th_lo, th_hi = self._theta_closed(lo), self._theta_closed(hi)
        out = np.where(v < lo, th_lo + self.k(lo) * (v - lo), out)
        out = np.where(v > hi, th_hi + self.k(hi) * (v - hi), out)
        return float(out) if out.ndim == 0 else out

    def _theta_closed(self, v):
        if self.kind == "constant":
            return self.a * v
        if self.kind == "affine":
            return v + 0.5 * self.a * v * v
        return v + self.a * v**3 / 3.0

    def family(self) -> ParamMonotoneFamily:
        """``beta(z, .)`` = multiplication by ``k(z)`` (applied to gradients)."""
        return ParamMonotoneFamily.linear(self.k, description=f"k(z), {self.kind} law, a={self.a:g}")


def kirchhoff_transform(law: DiffusionLaw, n_nodes: int = 401) -> MonotoneGraph:
    """Graph of ``theta``: exact for constant ``k``, else interpolated on ``n_nodes`` nodes.

    Node values use the closed-form integral when available; the rays
    continue with the end slopes ``k(lo)`` and ``k(hi)``.
    """
    if law.is_constant:
        return linear_graph(law.k(0.0))
    s = np.linspace(*law.range, n_nodes)
    pts = np.column_stack([s, law.theta(s)])
    return MonotoneGraph(pts, left_tail=(1.0, law.k(s[0])), right_tail=(1.0, law.k(s[-1])))


def stefan_graph(latent: float = 1.0) -> MonotoneGraph:
    """Temperature as a function of enthalpy: zero on ``[0, latent]``, slope one outside."""
    return plateau_graph(latent, 1.0)


def stefan_potential(latent: float = 1.0, eps: float = 1e-3) -> ScalarConvex:
    """Convex potential whose derivative is the Stefan graph plus ``eps * u``.

    ``Theta(u) = dist(u, [0, latent])^2 / 2``; adding ``eps u^2 / 2`` makes
    the conjugate smooth, which the gradient-based minimiser needs.
    """
    if latent < 0:
        raise ValueError("latent heat must be >= 0")
    base = MoreauEnvelope(IndicatorInterval(0.0, latent), 1.0)
    return AddQuadratic(base, eps) if eps > 0 else base


# -- convection -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConvectionField:
    """Velocity ``b`` at all ``M + 2`` nodes; admissible when ``db/dx <= tol`` on every cell."""

    space: DiscreteSpace
    b: np.ndarray
    tol: float = 1e-12

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        if b.shape != (self.space.M + 2,):
            raise ValueError(f"b must be sampled at all {self.space.M + 2} nodes")
        object.__setattr__(self, "b", b)
        div = self.divergence
        if np.max(div) > self.tol:
            i = int(np.argmax(div))
            raise ValueError(f"divergence check failed: db/dx = {div[i]:.3e} > 0 on cell {i}")

    @classmethod
    def from_function(cls, space: DiscreteSpace, fn, tol: float = 1e-12) -> "ConvectionField":
        return cls(space, np.asarray(fn(space.all_nodes), dtype=float) * np.ones(space.M + 2), tol)

    @property
    def divergence(self) -> np.ndarray:
        """Forward differences of ``b`` on the ``M + 1`` cells."""
        return np.diff(self.b) / self.space.dx


def convection_matrix(field: ConvectionField) -> np.ndarray:
    """Skew-symmetric splitting of ``u -> b du/dx``.

    ``C = (b D + D b)/2 - diag(Db)/2`` with ``D`` the centred difference.
    The first part is skew-symmetric, so ``<Cu, u> = -1/2 dx sum (Db)_i u_i^2``,
    nonnegative whenever the divergence is nonpositive.
    """
    sp = field.space
    M, dx = sp.M, sp.dx
    b_in = field.b[1:-1]
    D = (np.eye(M, k=1) - np.eye(M, k=-1)) / (2.0 * dx)
    Bd = np.diag(b_in)
    S = 0.5 * (Bd @ D + D @ Bd)
    db = (field.b[2:] - field.b[:-2]) / (2.0 * dx)
    return S - 0.5 * np.diag(db)


def convection_form(space: DiscreteSpace, field: ConvectionField, u) -> float:
    """``<C u, u>_H`` for the split convection operator (see :func:`convection_matrix`)."""
    if field.space.M != space.M:
        raise ValueError("field lives on a different grid")
    u = space.check(u, "u")
    return float(space.pairing(u @ convection_matrix(field).T, u))


# -- builders ---------------------------------------------------------------------


def _grad_matrix(space: DiscreteSpace) -> np.ndarray:
    E = np.zeros((space.M + 2, space.M))
    E[1:-1] = np.eye(space.M)
    return np.diff(E, axis=0) / space.dx


def diffusion_matrix(space: DiscreteSpace, k_cells) -> np.ndarray:
    """``G^T diag(k) G`` for cell diffusivities ``k`` (length ``M + 1``)."""
    G = _grad_matrix(space)
    return G.T @ (np.asarray(k_cells, dtype=float)[:, None] * G)


def _as_grid(space: DiscreteSpace, f, name: str):
    if callable(f):
        return space.sample(f)
    return np.asarray(f, dtype=float)


def build_diffusion_problem(space: DiscreteSpace, law: DiffusionLaw, u0, h=0.0, T: float = 0.1,
                            K: int = 32, weight: str = "lebesgue",
                            convection: ConvectionField | None = None, label: str = "") -> BenProblem:
    """BEN problem for ``D_t u - d/dx(k(u) du/dx) [+ b du/dx] = h``.

    Constant ``k`` yields the convex elliptic Fenchel representative;
    otherwise the semi-monotone family ``beta(z, .) = -d/dx(k(z) d/dx .)``
    with the parametrised Fitzpatrick representative. ``u0`` and ``h`` may
    be callables of ``x`` or arrays (``h`` also of shape ``(K+1, M)``).
    No zero-order term ``a(u)`` is included; it is left undefined upstream.
    """
    if weight not in WEIGHTS:
        raise ValueError(f"unknown weight {weight!r}")
    u0 = _as_grid(space, u0, "u0")
    h_arr = np.zeros(space.M) + (_as_grid(space, h, "h") if callable(h) else np.asarray(h, dtype=float))
    lo, hi = law.range
    if u0.size and (u0.min() < lo - 1e-12 or u0.max() > hi + 1e-12):
        raise ValueError(f"coercivity violation: u0 leaves the law's range [{lo:g}, {hi:g}]")
    C = convection_matrix(convection) if convection is not None else None

    if law.is_constant:
        kc = law.k(0.0)
        rep = elliptic_representative(space, fenchel_representative(Quadratic(kc)))
        A = kc * space.laplacian_matrix()
        op = LinearFlowOperator(A if C is None else A + C)
    else:
        rep = elliptic_representative(space, z_dependent=law.family())

        def matrix_of_z(z, _C=C):
            B = diffusion_matrix(space, law.k(space.cell_average(z)))
            return B if _C is None else B + _C

        op = SemimonoFlowOperator(matrix_of_z)
    if C is not None:
        rep = shift_by_linear(rep, C)
    return BenProblem(space=space, representative=rep, operator=op, h=h_arr, u0=u0, T=T, K=K,
                      weight=weight, pivot="H", label=label or f"diffusion[{law.kind}]")


def build_heat_problem(space: DiscreteSpace, u0, h=0.0, T: float = 0.1, K: int = 32,
                       weight: str = "lebesgue", k: float = 1.0,
                       convection: ConvectionField | None = None) -> BenProblem:
    return build_diffusion_problem(space, DiffusionLaw("constant", a=k), u0, h, T, K, weight,
                                   convection, label="heat")


def build_stefan_problem(space: DiscreteSpace, u0, h=0.0, T: float = 0.05, K: int = 32,
                         weight: str = "lebesgue", latent: float = 1.0,
                         eps: float = 1e-3) -> BenProblem:
    """Two-phase Stefan problem in the enthalpy variable ``u``.

    The flow is posed with pivot ``Lambda``: the residual
    ``r = Lambda(h - D_t u)`` must equal ``theta_eps(u)`` node by node, which
    the nodal Fenchel function of ``Theta_eps`` represents.
    """
    if not eps > 0:
        raise ValueError("eps must be > 0 for the smooth enthalpy formulation")
    u0 = _as_grid(space, u0, "u0")
    h_arr = np.zeros(space.M) + (_as_grid(space, h, "h") if callable(h) else np.asarray(h, dtype=float))
    pot = stefan_potential(latent, eps)
    rep = nodal_fenchel_representative(space, pot)
    op = NodalFlowOperator(space, pot)
    return BenProblem(space=space, representative=rep, operator=op, h=h_arr, u0=u0, T=T, K=K,
                      weight=weight, pivot="lambda", label=f"stefan[L={latent:g}, eps={eps:g}]")
