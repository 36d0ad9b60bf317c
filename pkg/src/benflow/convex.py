"""Scalar convex analysis: conjugates, proximal maps, Moreau envelopes.

Every function here is a :class:`ScalarConvex`. Calls are vectorised over
numpy arrays and may return ``+inf`` outside the effective domain. The
closed-form variants are closed under conjugation:

======================  =====================================
function                conjugate
======================  =====================================
``Quadratic(a)``        ``Quadratic(1/a)``
``PowerP(p)``           ``PowerP(p/(p-1))``
``Abs(c)``              ``IndicatorInterval(-c, c)``
``IndicatorInterval``   support function (``Abs`` or ``PiecewiseLinear``)
``PiecewiseLinear``     ``PiecewiseLinear`` (knots and slopes swap roles)
``MoreauEnvelope``      ``AddQuadratic`` of the conjugate
======================  =====================================

``GridSampled`` data is conjugated numerically by the hull-and-merge
Legendre transform, see :func:`legendre_transform`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ScalarConvex",
    "Quadratic",
    "PowerP",
    "Abs",
    "IndicatorInterval",
    "PiecewiseLinear",
    "GridSampled",
    "MoreauEnvelope",
    "AddQuadratic",
    "zero",
    "conjugate",
    "fenchel_gap",
    "in_subdifferential",
    "prox",
    "moreau_smooth",
    "regularize",
    "legendre_transform",
    "lower_hull",
]


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


class ScalarConvex:
    """Proper closed convex function ``R -> R u {+inf}``."""

    #: finite everywhere and continuously differentiable
    smooth: bool = False

    def __call__(self, v):
        raise NotImplementedError

    def conjugate(self) -> "ScalarConvex":
        raise NotImplementedError

    def prox(self, tau, w):
        """``argmin_v f(v) + (v - w)^2 / (2 tau)``."""
        raise NotImplementedError

    def prox_derivative(self, tau, w):
        """Derivative of ``w -> prox(tau, w)`` (a.e.; one-sided at kinks)."""
        raise NotImplementedError

    def derivative(self, v):
        """Gradient for smooth functions; some subgradient otherwise."""
        raise NotImplementedError

    def second_derivative(self, v):
        raise NotImplementedError

    def domain(self) -> tuple[float, float]:
        return (-math.inf, math.inf)


@dataclass(frozen=True)
class Quadratic(ScalarConvex):
    """``a v^2 / 2``."""

    a: float = 1.0
    smooth = True

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"Quadratic needs a > 0, got {self.a}")

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        return _out(0.5 * self.a * v * v)

    def conjugate(self):
        return Quadratic(1.0 / self.a)

    def prox(self, tau, w):
        return _out(np.asarray(w, dtype=float) / (1.0 + tau * self.a))

    def prox_derivative(self, tau, w):
        return _out(np.full(np.shape(w), 1.0 / (1.0 + tau * self.a)))

    def derivative(self, v):
        return _out(self.a * np.asarray(v, dtype=float))

    def second_derivative(self, v):
        return _out(np.full(np.shape(v), self.a))


@dataclass(frozen=True)
class PowerP(ScalarConvex):
    """``|v|^p / p``; accepts any ``p > 1`` so that the family is closed under conjugation."""

    p: float = 2.0
    smooth = True

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"PowerP needs p > 1, got {self.p}")

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    def __call__(self, v):
        v = np.abs(np.asarray(v, dtype=float))
        return _out(v**self.p / self.p)

    def conjugate(self):
        return PowerP(self.q)

    def prox(self, tau, w):
        w = np.asarray(w, dtype=float)
        if self.p < 2:
            # Moreau decomposition moves the work onto the conjugate, where
            # the exponent is > 2 and Newton from the right is monotone.
            return _out(w - tau * np.asarray(self.conjugate().prox(1.0 / tau, w / tau)))
        p = self.p
        aw = np.abs(w)
        a = np.minimum(aw, (aw / tau) ** (1.0 / (p - 1.0)))
        for _ in range(100):
            F = tau * a ** (p - 1.0) + a - aw
            dF = tau * (p - 1.0) * a ** (p - 2.0) + 1.0
            step = F / dF
            a = np.maximum(a - step, 0.0)
            if np.all(np.abs(step) <= 1e-15 * np.maximum(1.0, aw)):
                break
        return _out(np.sign(w) * a)

    def prox_derivative(self, tau, w):
        x = np.abs(np.asarray(self.prox(tau, w), dtype=float))
        with np.errstate(divide="ignore"):
            curv = (self.p - 1.0) * x ** (self.p - 2.0)
        return _out(1.0 / (1.0 + tau * curv))

    def derivative(self, v):
        v = np.asarray(v, dtype=float)
        return _out(np.sign(v) * np.abs(v) ** (self.p - 1.0))

    def second_derivative(self, v):
        v = np.abs(np.asarray(v, dtype=float))
        with np.errstate(divide="ignore"):
            return _out((self.p - 1.0) * v ** (self.p - 2.0))


@dataclass(frozen=True)
class Abs(ScalarConvex):
    """``scale * |v|``."""

    scale: float = 1.0

    def __post_init__(self):
        if not self.scale >= 0:
            raise ValueError("Abs needs scale >= 0")

    def __call__(self, v):
        return _out(self.scale * np.abs(np.asarray(v, dtype=float)))

    def conjugate(self):
        return IndicatorInterval(-self.scale, self.scale)

    def prox(self, tau, w):
        w = np.asarray(w, dtype=float)
        return _out(np.sign(w) * np.maximum(np.abs(w) - tau * self.scale, 0.0))

    def prox_derivative(self, tau, w):
        return _out((np.abs(np.asarray(w, dtype=float)) > tau * self.scale).astype(float))

    def derivative(self, v):
        return _out(self.scale * np.sign(np.asarray(v, dtype=float)))


@dataclass(frozen=True)
class IndicatorInterval(ScalarConvex):
    """0 on ``[lo, hi]``, ``+inf`` elsewhere; either bound may be infinite."""

    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        return _out(np.where((v >= self.lo) & (v <= self.hi), 0.0, math.inf))

    def conjugate(self):
        if math.isfinite(self.hi) and self.lo == -self.hi:
            return Abs(self.hi)
        return PiecewiseLinear(
            [0.0],
            [0.0],
            left_slope=self.lo if math.isfinite(self.lo) else None,
            right_slope=self.hi if math.isfinite(self.hi) else None,
        )

    def prox(self, tau, w):
        return _out(np.clip(np.asarray(w, dtype=float), self.lo, self.hi))

    def prox_derivative(self, tau, w):
        w = np.asarray(w, dtype=float)
        return _out(((w > self.lo) & (w < self.hi)).astype(float))

    def derivative(self, v):
        v = np.asarray(v, dtype=float)
        return _out(np.where((v >= self.lo) & (v <= self.hi), 0.0, np.nan))

    def domain(self):
        return (self.lo, self.hi)


@dataclass(frozen=True, eq=False)
class PiecewiseLinear(ScalarConvex):
    """Convex piecewise-linear function through ``(knots[j], values[j])``.

    Beyond the outer knots the function continues with ``left_slope`` /
    ``right_slope``, or is ``+inf`` when the slope is ``None``.
    """

    knots: np.ndarray
    values: np.ndarray
    left_slope: float | None = None
    right_slope: float | None = None

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.knots, dtype=float))
        y = np.atleast_1d(np.asarray(self.values, dtype=float))
        if x.shape != y.shape or x.ndim != 1 or x.size == 0:
            raise ValueError("knots and values must be equal-length 1-d arrays")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("knots and values must be finite (improper input)")
        if np.any(np.diff(x) <= 0):
            raise ValueError("knots must be strictly increasing")
        object.__setattr__(self, "knots", x)
        object.__setattr__(self, "values", y)
        s = self.slopes
        full = np.concatenate(
            [[self.left_slope] if self.left_slope is not None else [], s,
             [self.right_slope] if self.right_slope is not None else []]
        )
        scale = max(1.0, float(np.max(np.abs(full)))) if full.size else 1.0
        if np.any(np.diff(full) < -1e-12 * scale):
            raise ValueError("slopes must be nondecreasing (function not convex)")

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.knots)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        x, y = self.knots, self.values
        out = np.interp(v, x, y)
        left = v < x[0]
        right = v > x[-1]
        if self.left_slope is None:
            out = np.where(left, math.inf, out)
        else:
            out = np.where(left, y[0] + self.left_slope * (v - x[0]), out)
        if self.right_slope is None:
            out = np.where(right, math.inf, out)
        else:
            out = np.where(right, y[-1] + self.right_slope * (v - x[-1]), out)
        return _out(out)

    def domain(self):
        lo = -math.inf if self.left_slope is not None else self.knots[0]
        hi = math.inf if self.right_slope is not None else self.knots[-1]
        return (float(lo), float(hi))

    def conjugate(self):
        x, y = self.knots, self.values
        m = self.slopes
        sk, sv = [], []
        if self.left_slope is not None:
            sk.append(self.left_slope)
            sv.append(self.left_slope * x[0] - y[0])
        for j, mj in enumerate(m):
            sk.append(mj)
            sv.append(mj * x[j + 1] - y[j + 1])
        if self.right_slope is not None:
            sk.append(self.right_slope)
            sv.append(self.right_slope * x[-1] - y[-1])
        left = x[0] if self.left_slope is None else None
        right = x[-1] if self.right_slope is None else None
        if not sk:
            # indicator of a single point: the conjugate is affine
            return PiecewiseLinear([0.0], [-y[0]], left_slope=x[0], right_slope=x[0])
        sk = np.asarray(sk)
        sv = np.asarray(sv)
        keep = np.concatenate([[True], np.diff(sk) > 1e-14 * np.maximum(1.0, np.abs(sk[1:]))])
        return PiecewiseLinear(sk[keep], sv[keep], left_slope=left, right_slope=right)

    def _subgradient_bounds(self):
        m = self.slopes
        lo = np.concatenate([[self.left_slope if self.left_slope is not None else -math.inf], m])
        hi = np.concatenate([m, [self.right_slope if self.right_slope is not None else math.inf]])
        return lo, hi

    def _prox_locate(self, tau, w):
        w = np.asarray(w, dtype=float)
        lo, hi = self._subgradient_bounds()
        x = self.knots
        flat = np.empty(2 * x.size)
        with np.errstate(invalid="ignore"):
            flat[0::2] = x + tau * lo
            flat[1::2] = x + tau * hi
        c = np.searchsorted(flat, w, side="right")
        return w, c

    def prox(self, tau, w):
        w, c = self._prox_locate(tau, w)
        x = self.knots
        n = x.size
        m = self.slopes
        seg_slope = np.concatenate(
            [[self.left_slope if self.left_slope is not None else 0.0], m,
             [self.right_slope if self.right_slope is not None else 0.0]]
        )
        on_knot = c % 2 == 1
        knot_idx = np.clip((c - 1) // 2, 0, n - 1)
        seg_idx = c // 2
        v_seg = w - tau * seg_slope[seg_idx]
        return _out(np.where(on_knot, x[knot_idx], v_seg))

    def prox_derivative(self, tau, w):
        _, c = self._prox_locate(tau, w)
        return _out((c % 2 == 0).astype(float))

    def derivative(self, v):
        v = np.asarray(v, dtype=float)
        lo, hi = self._subgradient_bounds()
        seg = np.searchsorted(self.knots, v, side="right")
        slopes = hi[np.clip(seg - 1, 0, hi.size - 1)]
        slopes = np.where(seg == 0, lo[0], slopes)
        return _out(np.where(np.isfinite(self(v)), slopes, np.nan))


def lower_hull(x, f):
    """Indices of the lower convex hull of points sorted by ``x`` (monotone chain)."""
    hull: list[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            # drop i1 if it lies on or above the chord i0 -> i
            cross = (x[i1] - x[i0]) * (f[i] - f[i0]) - (f[i1] - f[i0]) * (x[i] - x[i0])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.asarray(hull, dtype=int)


def legendre_transform(x, f, s):
    """Discrete conjugate ``max_i (s x_i - f_i)`` for sorted slopes ``s``.

    Builds the lower hull of the samples in one pass, then merges the sorted
    slopes against the sorted hull edge slopes. Both passes are linear in
    the input size, apart from the binary search used for the merge.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    s = np.asarray(s, dtype=float)
    order = np.argsort(x, kind="stable")
    x, f = x[order], f[order]
    h = lower_hull(x, f)
    hx, hf = x[h], f[h]
    if hx.size == 1:
        return s * hx[0] - hf[0]
    edge = np.diff(hf) / np.diff(hx)
    j = np.searchsorted(edge, s, side="left")
    return s * hx[j] - hf[j]


class GridSampled(PiecewiseLinear):
    """Convex function known by samples; ``+inf`` entries mark points outside the domain.

    Between samples the function is the linear interpolant; outside the
    finite samples it is ``+inf``. ``truncated`` marks results of
    :meth:`conjugate`, valid only for arguments in ``valid_range``.
    """

    def __init__(self, grid, values, truncated: bool = False, valid_range=None):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.shape != values.shape or grid.ndim != 1:
            raise ValueError("grid and values must be equal-length 1-d arrays")
        if np.any(np.isnan(values)) or np.any(values == -math.inf):
            raise ValueError("values must be finite or +inf")
        finite = np.flatnonzero(np.isfinite(values))
        if finite.size == 0:
            raise ValueError("improper input: no finite sample")
        if finite[-1] - finite[0] + 1 != finite.size:
            raise ValueError("finite samples must be contiguous (convex domain)")
        x, y = grid[finite], values[finite]
        if x.size >= 3:
            m = np.diff(y) / np.diff(x)
            if np.any(np.diff(m) < -1e-12 * max(1.0, float(np.max(np.abs(m))))):
                raise ValueError("samples are not convex")
        super().__init__(x, y)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "samples", values)
        object.__setattr__(self, "truncated", bool(truncated))
        # +inf samples mark a genuine domain end, so every slope is admissible on that side
        object.__setattr__(self, "closed_ends", (bool(finite[0] > 0), bool(finite[-1] < values.size - 1)))
        object.__setattr__(
            self,
            "valid_range",
            (float(x[0]), float(x[-1])) if valid_range is None else tuple(valid_range),
        )

    def __repr__(self):
        return (f"GridSampled(n={self.grid.size}, domain=({self.knots[0]:g}, {self.knots[-1]:g}), "
                f"truncated={self.truncated})")

    def slope_range(self) -> tuple[float, float]:
        h = lower_hull(self.knots, self.values)
        if h.size == 1:
            return (-math.inf, math.inf)
        edge = np.diff(self.values[h]) / np.diff(self.knots[h])
        lo = -math.inf if self.closed_ends[0] else float(edge[0])
        hi = math.inf if self.closed_ends[1] else float(edge[-1])
        return (lo, hi)

    def conjugate(self, slopes=None):
        """Conjugate on a slope grid, restricted to the sampled slope range.

        Slopes outside the range spanned by the sample secants would only see
        the artificial truncation of the domain; they are dropped with a
        warning instead of being extrapolated.
        """
        smin, smax = self.slope_range()
        if slopes is None:
            if not (math.isfinite(smin) and math.isfinite(smax)):
                return super().conjugate()
            slopes = np.linspace(smin, smax, max(self.knots.size, 2))
        slopes = np.sort(np.asarray(slopes, dtype=float))
        span = max(1.0, abs(smin) if math.isfinite(smin) else 1.0, abs(smax) if math.isfinite(smax) else 1.0)
        inside = (slopes >= smin - 1e-12 * span) & (slopes <= smax + 1e-12 * span)
        if not np.all(inside):
            warnings.warn(
                f"{np.count_nonzero(~inside)} slopes outside the sampled range "
                f"[{smin:g}, {smax:g}] were dropped",
                stacklevel=2,
            )
            slopes = slopes[inside]
        if slopes.size == 0:
            raise ValueError("no requested slope lies in the sampled slope range")
        vals = legendre_transform(self.knots, self.values, slopes)
        return GridSampled(slopes, vals, truncated=True, valid_range=(smin, smax))


@dataclass(frozen=True, eq=False)
class MoreauEnvelope(ScalarConvex):
    """``min_w base(w) + (v - w)^2 / (2 eps)``."""

    base: ScalarConvex
    eps: float
    smooth = True

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be > 0")

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        x = np.asarray(self.base.prox(self.eps, v))
        return _out(np.asarray(self.base(x)) + (v - x) ** 2 / (2.0 * self.eps))

    def conjugate(self):
        return AddQuadratic(self.base.conjugate(), self.eps)

    def prox(self, tau, w):
        w = np.asarray(w, dtype=float)
        t = tau + self.eps
        return _out(w + tau / t * (np.asarray(self.base.prox(t, w)) - w))

    def prox_derivative(self, tau, w):
        t = tau + self.eps
        return _out(1.0 + tau / t * (np.asarray(self.base.prox_derivative(t, w)) - 1.0))

    def derivative(self, v):
        v = np.asarray(v, dtype=float)
        return _out((v - np.asarray(self.base.prox(self.eps, v))) / self.eps)

    def second_derivative(self, v):
        return _out((1.0 - np.asarray(self.base.prox_derivative(self.eps, v))) / self.eps)


@dataclass(frozen=True, eq=False)
class AddQuadratic(ScalarConvex):
    """``base(v) + c v^2 / 2``; the conjugate of a Moreau envelope."""

    base: ScalarConvex
    c: float

    def __post_init__(self):
        if not self.c >= 0:
            raise ValueError("c must be >= 0")

    @property
    def smooth(self):
        return self.base.smooth

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        return _out(np.asarray(self.base(v)) + 0.5 * self.c * v * v)

    def conjugate(self):
        if self.c == 0:
            return self.base.conjugate()
        return MoreauEnvelope(self.base.conjugate(), self.c)

    def prox(self, tau, w):
        r = 1.0 + self.c * tau
        return self.base.prox(tau / r, np.asarray(w, dtype=float) / r)

    def prox_derivative(self, tau, w):
        r = 1.0 + self.c * tau
        return _out(np.asarray(self.base.prox_derivative(tau / r, np.asarray(w, dtype=float) / r)) / r)

    def derivative(self, v):
        v = np.asarray(v, dtype=float)
        return _out(np.asarray(self.base.derivative(v)) + self.c * v)

    def second_derivative(self, v):
        v = np.asarray(v, dtype=float)
        return _out(np.asarray(self.base.second_derivative(v)) + self.c)

    def domain(self):
        return self.base.domain()


def zero() -> PiecewiseLinear:
    """The zero function; its conjugate is the indicator of ``{0}``."""
    return PiecewiseLinear([0.0], [0.0], left_slope=0.0, right_slope=0.0)


def conjugate(phi: ScalarConvex) -> ScalarConvex:
    if not isinstance(phi, ScalarConvex):
        raise TypeError(f"expected ScalarConvex, got {type(phi).__name__}")
    return phi.conjugate()


def fenchel_gap(phi: ScalarConvex, v, vstar, phi_star: ScalarConvex | None = None):
    """``phi(v) + phi*(vstar) - vstar*v``; nonnegative, zero iff ``vstar`` in the subdifferential."""
    phi_star = phi.conjugate() if phi_star is None else phi_star
    v = np.asarray(v, dtype=float)
    vstar = np.asarray(vstar, dtype=float)
    return _out(np.asarray(phi(v)) + np.asarray(phi_star(vstar)) - v * vstar)


def in_subdifferential(phi: ScalarConvex, v, vstar, tol: float = 1e-9):
    gap = np.asarray(fenchel_gap(phi, v, vstar))
    res = gap <= tol
    return bool(res) if res.ndim == 0 else res


def prox(phi: ScalarConvex, tau: float, w):
    if not tau > 0:
        raise ValueError("tau must be > 0")
    return phi.prox(tau, w)


def moreau_smooth(phi: ScalarConvex, eps: float) -> ScalarConvex:
    if not eps > 0:
        raise ValueError("eps must be > 0")
    if isinstance(phi, Quadratic):
        return Quadratic(phi.a / (1.0 + eps * phi.a))
    return MoreauEnvelope(phi, eps)


def regularize(phi: ScalarConvex, eps: float = 1e-3) -> ScalarConvex:
    """Smallest modification making both ``phi`` and its conjugate smooth.

    A nonsmooth ``phi`` is replaced by its Moreau envelope; if the conjugate
    is still nonsmooth, ``eps v^2 / 2`` is added, which Moreau-smooths the
    conjugate side. Smooth inputs pass through unchanged.
    """
    out = phi if phi.smooth else moreau_smooth(phi, eps)
    if not out.conjugate().smooth:
        out = AddQuadratic(out, eps)
    return out
