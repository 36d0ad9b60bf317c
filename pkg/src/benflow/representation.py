"""Representative functions of monotone and semi-monotone operators.

A representative ``f(v, v*)`` of an operator ``alpha`` satisfies
``f(v, v*) >= <v*, v>`` everywhere, with equality exactly when
``v* in alpha(v)``. This module builds them (Fitzpatrick functions of
graphs, Fenchel functions, the ``F_b`` family), combines them (shift by a
positive linear map, partial inf-convolution), lifts them to parametrised
families (semi-monotone operators) and to the grid elliptic operator
``v -> -d/dx gamma(dv/dx)``, and certifies them on sample grids.

Scalar representatives are vectorised over numpy arrays. Grid
representatives take nodal vectors and are vectorised over leading axes,
so a whole trajectory ``(K, M)`` is evaluated in one call.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .convex import ScalarConvex
from .graphs import MonotoneGraph
from .spaces import DiscreteSpace

__all__ = [
    "Representative",
    "ParamMonotoneFamily",
    "CertReport",
    "CoercivityError",
    "fitzpatrick_eval",
    "fitzpatrick_representative",
    "fenchel_representative",
    "fb_family",
    "shift_by_linear",
    "inf_convolution",
    "semimono_representative",
    "elliptic_representative",
    "nodal_fenchel_representative",
    "certify_representative",
    "dump_representative_csv",
    "midpoint_convexity_violation",
]

KINDS = ("fitzpatrick", "fenchel", "fb_family", "shifted", "infconv", "semimono", "elliptic")


class CoercivityError(ValueError):
    """The inf-convolution infimum sits on the boundary of the search grid."""


@dataclass(frozen=True, eq=False)
class Representative:
    """Evaluatable representative function.

    ``space`` is ``None`` for scalar pairs and a :class:`DiscreteSpace` for
    grid pairs. ``grad`` returns Euclidean gradients with respect to the
    nodal vectors. Semi-monotone grid representatives carry ``freeze``,
    which returns the convex representative obtained by fixing the
    parameter ``z``.
    """

    func: Callable
    kind: str
    convex: bool
    space: DiscreteSpace | None = None
    grad: Callable | None = None
    freeze: Callable | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown representative kind {self.kind!r}")

    @property
    def carrier(self) -> str:
        return "scalar" if self.space is None else "grid"

    def __call__(self, v, vstar):
        return self.func(v, vstar)

    def pairing(self, v, vstar):
        if self.space is None:
            out = np.asarray(v, dtype=float) * np.asarray(vstar, dtype=float)
            return float(out) if out.ndim == 0 else out
        return self.space.pairing(vstar, v)

    def gap(self, v, vstar):
        val = np.asarray(self(v, vstar), dtype=float)
        with np.errstate(invalid="ignore"):
            out = val - np.asarray(self.pairing(v, vstar), dtype=float)
        return float(out) if out.ndim == 0 else out

    def contains(self, v, vstar, tol: float = 1e-9):
        res = np.asarray(self.gap(v, vstar)) <= tol
        return bool(res) if res.ndim == 0 else res


def _scalar_out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


# -- scalar representatives ----------------------------------------------


def fitzpatrick_eval(graph: MonotoneGraph, v, vstar, return_witness: bool = False):
    """Fitzpatrick function of ``graph`` at ``(v, vstar)``.

    With ``return_witness`` the ray direction along which the supremum
    diverges is returned as well (``None`` for finite values).
    """
    val = graph.fitzpatrick(v, vstar)
    if not return_witness:
        return val
    if np.ndim(val) != 0:
        raise ValueError("witness directions are reported for scalar queries only")
    return val, (graph.unbounded_direction(float(v), float(vstar)) if math.isinf(val) else None)


def fitzpatrick_representative(graph: MonotoneGraph) -> Representative:
    return Representative(
        func=graph.fitzpatrick, kind="fitzpatrick", convex=True, label="fitzpatrick(graph)"
    )


def fenchel_representative(phi: ScalarConvex) -> Representative:
    """``phi(v) + phi*(v*)``, the canonical representative of the subdifferential."""
    phi_star = phi.conjugate()

    def func(v, vstar):
        v = np.asarray(v, dtype=float)
        vstar = np.asarray(vstar, dtype=float)
        return _scalar_out(np.asarray(phi(v)) + np.asarray(phi_star(vstar)))

    grad = None
    if phi.smooth and phi_star.smooth:
        def grad(v, vstar):
            return phi.derivative(v), phi_star.derivative(vstar)

    return Representative(func=func, kind="fenchel", convex=True, grad=grad,
                          label=f"fenchel({phi!r})")


def fb_family(a_coeff: float, b: float) -> Representative:
    """``b (a v^2 + v*^2 / a)`` for multiplication by ``a > 0``.

    ``b = 1/2`` gives the Fenchel function of the multiplication; ``b > 1/2``
    represents the non-maximal operator with graph ``{(0, 0)}``.
    """
    if not a_coeff > 0:
        raise ValueError("a_coeff must be > 0")
    if b < 0.5:
        raise ValueError(f"F_b with b = {b} < 1/2 violates the gap inequality and represents no operator")

    def func(v, vstar):
        v = np.asarray(v, dtype=float)
        vstar = np.asarray(vstar, dtype=float)
        return _scalar_out(b * (a_coeff * v * v + vstar * vstar / a_coeff))

    def grad(v, vstar):
        return (_scalar_out(2.0 * b * a_coeff * np.asarray(v, dtype=float)),
                _scalar_out(2.0 * b * np.asarray(vstar, dtype=float) / a_coeff))

    return Representative(func=func, kind="fb_family", convex=True, grad=grad,
                          label=f"F_b(a={a_coeff:g}, b={b:g})")


# -- calculus -------------------------------------------------------------


def _linear_map(L, space):
    """Return ``(apply, apply_T, form)`` for a scalar or matrix positive linear map."""
    if np.ndim(L) == 0:
        L = float(L)
        if L < 0:
            raise ValueError("L must be positive (L >= 0)")
        if space is None:
            return (lambda v: L * np.asarray(v, dtype=float),) * 2 + (
                lambda v: L * np.asarray(v, dtype=float) ** 2,)
        return ((lambda v: L * v), (lambda v: L * v),
                (lambda v: L * space.pairing(v, v)))
    if space is None:
        raise ValueError("matrix shifts need a grid representative")
    Lm = np.asarray(L, dtype=float)
    if Lm.shape != (space.M, space.M):
        raise ValueError(f"L must be ({space.M}, {space.M})")
    sym = 0.5 * (Lm + Lm.T)
    lam = np.linalg.eigvalsh(sym)
    if lam[0] < -1e-10 * max(1.0, abs(lam[-1])):
        raise ValueError("L is not positive: <Lv, v> < 0 for some v")
    return ((lambda v: v @ Lm.T), (lambda v: v @ Lm),
            (lambda v: space.pairing(v @ Lm.T, v)))


def shift_by_linear(f: Representative, L) -> Representative:
    """Representative of ``alpha + L``: ``f(v, v* - Lv) + <Lv, v>``.

    ``L`` is a nonnegative scalar (multiplication) or, for grid
    representatives, an ``(M, M)`` matrix whose symmetric part is positive
    semidefinite.
    """
    space = f.space
    apply, apply_T, form = _linear_map(L, space)

    def func(v, vstar):
        v = np.asarray(v, dtype=float)
        vstar = np.asarray(vstar, dtype=float)
        return _scalar_out(np.asarray(f(v, vstar - apply(v))) + np.asarray(form(v)))

    grad = None
    if f.grad is not None:
        scale = 1.0 if space is None else space.dx

        def grad(v, vstar):
            v = np.asarray(v, dtype=float)
            vstar = np.asarray(vstar, dtype=float)
            gv, gs = f.grad(v, vstar - apply(v))
            gv = np.asarray(gv) - apply_T(np.asarray(gs)) + scale * (apply(v) + apply_T(v))
            return _scalar_out(gv), gs

    freeze = None
    if f.freeze is not None:
        def freeze(z):
            return shift_by_linear(f.freeze(z), L)

    return Representative(func=func, kind="shifted", convex=f.convex, space=space,
                          grad=grad, freeze=freeze, label=f"shift({f.label})")


def _golden_min(fun, a, b, iters: int = 80):
    """Vectorised golden-section search on brackets ``[a, b]``."""
    r = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - r * (b - a)
    d = a + r * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        left = fc <= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = b - r * (b - a)
        d_new = a + r * (b - a)
        # reuse the surviving interior point
        c, d = np.where(left, c_new, d), np.where(left, c, d_new)
        fc_keep, fd_keep = fc, fd
        fc = np.where(left, fun(c), fd_keep)
        fd = np.where(left, fc_keep, fun(d))
    x = np.where(fc <= fd, c, d)
    return x, np.minimum(fc, fd)


def inf_convolution(g1: Representative, g2: Representative, zstar_grid=None,
                    chunk: int = 4096) -> Representative:
    """Partial inf-convolution ``inf_z g1(v, v* - z) + g2(v, z)``, representing ``alpha1 + alpha2``.

    The infimum is taken over ``zstar_grid`` (default 401 points on
    ``[-10, 10]``) and refined by golden-section search between the grid
    neighbours of the best grid point. An infimum on the grid boundary means
    the coercivity assumption failed on the search box and raises
    :class:`CoercivityError`.
    """
    if g1.carrier != "scalar" or g2.carrier != "scalar":
        raise ValueError("inf_convolution is implemented for scalar carriers")
    Z = np.linspace(-10.0, 10.0, 401) if zstar_grid is None else np.sort(np.asarray(zstar_grid, dtype=float))
    if Z.size < 3:
        raise ValueError("zstar_grid needs at least 3 points")

    def objective(v, vstar, z):
        with np.errstate(invalid="ignore"):
            val = np.asarray(g1(v, vstar - z), dtype=float) + np.asarray(g2(v, z), dtype=float)
        return np.where(np.isnan(val), math.inf, val)

    def func(v, vstar):
        v, vstar = np.broadcast_arrays(np.asarray(v, dtype=float), np.asarray(vstar, dtype=float))
        shape = v.shape
        vf, sf = v.ravel(), vstar.ravel()
        out = np.empty(vf.size)
        for lo in range(0, vf.size, chunk):
            vv, ss = vf[lo:lo + chunk, None], sf[lo:lo + chunk, None]
            vals = objective(vv, ss, Z[None, :])
            i = np.argmin(vals, axis=1)  # first index: smallest argument on ties
            best = vals[np.arange(vals.shape[0]), i]
            finite = np.isfinite(best)
            if np.any(finite & ((i == 0) | (i == Z.size - 1))):
                bad = np.flatnonzero(finite & ((i == 0) | (i == Z.size - 1)))[0]
                raise CoercivityError(
                    f"infimum over z* at ({vv[bad, 0]:g}, {ss[bad, 0]:g}) lies on the search "
                    f"grid boundary [{Z[0]:g}, {Z[-1]:g}]; the coercivity condition fails there"
                )
            ic = np.clip(i, 1, Z.size - 2)
            a, b = Z[ic - 1], Z[ic + 1]
            _, refined = _golden_min(lambda z: objective(vv[:, 0], ss[:, 0], z), a, b)
            out[lo:lo + chunk] = np.minimum(best, refined)
        return _scalar_out(out.reshape(shape))

    return Representative(func=func, kind="infconv", convex=g1.convex and g2.convex,
                          label=f"({g1.label}) + ({g2.label})")


# -- semi-monotone families --------------------------------------------------


@dataclass(frozen=True, eq=False)
class ParamMonotoneFamily:
    """``z -> beta(z, .)``, a maximal monotone scalar graph for every frozen ``z``.

    ``fitzpatrick(z, v, vstar)`` and ``fitzpatrick_grad`` are optional
    vectorised closed forms of the Fitzpatrick function of ``beta(z, .)``;
    without them each point is evaluated on the graph returned by ``beta``.
    """

    beta: Callable[[float], MonotoneGraph]
    description: str = ""
    fitzpatrick: Callable | None = None
    fitzpatrick_grad: Callable | None = None

    def graph(self, z: float) -> MonotoneGraph:
        try:
            g = self.beta(float(z))
        except (ValueError, ArithmeticError) as exc:
            raise ValueError(f"family undefined at z={z!r}: {exc}") from exc
        if g is None or not isinstance(g, MonotoneGraph):
            raise ValueError(f"family undefined at z={z!r}")
        return g

    def evaluate(self, z, v, vstar):
        if self.fitzpatrick is not None:
            return _scalar_out(self.fitzpatrick(z, v, vstar))
        z, v, vstar = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (z, v, vstar)))
        out = np.empty(z.shape)
        for idx in np.ndindex(z.shape):
            out[idx] = self.graph(z[idx]).fitzpatrick(v[idx], vstar[idx])
        return _scalar_out(out)

    @classmethod
    def linear(cls, coeff: Callable, description: str = "") -> "ParamMonotoneFamily":
        """``beta(z, v) = coeff(z) * v`` with ``coeff > 0``.

        The Fitzpatrick function of multiplication by ``m > 0`` is
        ``(v* + m v)^2 / (4 m)``.
        """
        from .graphs import linear_graph

        def m_of(z):
            m = np.asarray(coeff(np.asarray(z, dtype=float)), dtype=float)
            if np.any(~(m > 0)):
                raise ValueError("coefficient must be positive")
            return m

        def fitz(z, v, vstar):
            m = m_of(z)
            s = np.asarray(vstar, dtype=float) + m * np.asarray(v, dtype=float)
            return s * s / (4.0 * m)

        def fitz_grad(z, v, vstar):
            m = m_of(z)
            s = np.asarray(vstar, dtype=float) + m * np.asarray(v, dtype=float)
            return s / 2.0, s / (2.0 * m)

        def beta(z):
            return linear_graph(float(m_of(z)))

        return cls(beta=beta, description=description or "multiplication by coeff(z)",
                   fitzpatrick=fitz, fitzpatrick_grad=fitz_grad)


def semimono_representative(family: ParamMonotoneFamily) -> Representative:
    """``phi(v, v*) = f_v(v, v*)`` with ``f_z`` the Fitzpatrick function of ``beta(z, .)``.

    Nonconvex in general; the gap vanishes exactly on the graph of
    ``alpha(v) = beta(v, v)``.
    """

    def func(v, vstar):
        return family.evaluate(v, v, vstar)

    return Representative(func=func, kind="semimono", convex=False,
                          label=f"semimono({family.description})")


# -- grid elliptic representative -----------------------------------------


def _bracket_root(fn, n: int, scale):
    """Roots of nondecreasing ``fn`` (vectorised over ``n`` rows) by bracketing and Illinois steps."""
    a = -np.asarray(scale, dtype=float) * np.ones(n)
    b = -a.copy()
    fa, fb = fn(a), fn(b)
    for _ in range(200):
        grow_a, grow_b = fa > 0, fb < 0
        if not (np.any(grow_a) or np.any(grow_b)):
            break
        w = b - a
        a = np.where(grow_a, a - w, a)
        b = np.where(grow_b, b + w, b)
        fa = np.where(grow_a, fn(a), fa)
        fb = np.where(grow_b, fn(b), fb)
    else:
        raise ArithmeticError("could not bracket the flux constant")
    side = np.zeros(n)
    x = a.copy()
    for _ in range(200):
        denom = fb - fa
        x = np.where(denom > 0, b - fb * (b - a) / np.where(denom > 0, denom, 1.0), 0.5 * (a + b))
        x = np.clip(x, a, b)
        fx = fn(x)
        tol = 1e-15 * (np.abs(fa) + np.abs(fb)) + 1e-300
        done = (np.abs(fx) <= tol) | (b - a <= 1e-15 * (1.0 + np.abs(x)))
        if np.all(done):
            break
        right = fx > 0
        b = np.where(right, x, b)
        fb = np.where(right, fx, fb)
        a = np.where(right, a, x)
        fa = np.where(right, fa, fx)
        # Illinois: halve the stale endpoint value when the same side repeats
        fa = np.where(right & (side > 0), fa / 2, fa)
        fb = np.where(~right & (side < 0), fb / 2, fb)
        side = np.where(right, 1.0, -1.0)
    return x


def elliptic_representative(space: DiscreteSpace, g: Representative | None = None,
                            z_dependent: ParamMonotoneFamily | None = None) -> Representative:
    """Grid representative of ``v -> -d/dx gamma(dv/dx)`` from a scalar representative of ``gamma``.

    Evaluates ``min_c dx * sum_cells g(grad v, grad(Lambda v*) + c)``. The
    constant ``c`` is the only divergence-free flux on an interval:
    ``grad(Lambda v*)`` recovers a flux ``sigma`` with ``-div sigma = v*``
    only up to its mean, and ``c`` restores it. For linear ``gamma`` with a
    constant coefficient the optimal ``c`` is zero.

    With ``z_dependent`` the cell integrand is the Fitzpatrick function of
    ``beta(z, .)`` at the cell average of ``z = v``; the result is
    nonconvex and ``freeze(z)`` returns the convex representative with
    ``z`` fixed.
    """
    if (g is None) == (z_dependent is None):
        raise ValueError("give exactly one of g and z_dependent")
    if g is not None and g.carrier != "scalar":
        raise ValueError("g must be a scalar-carrier representative")

    if z_dependent is not None:
        fam = z_dependent

        def cell_rep(zc):
            gf = None
            if fam.fitzpatrick_grad is not None:
                def gf(xi, eta):
                    return fam.fitzpatrick_grad(zc, xi, eta)
            return Representative(func=lambda xi, eta: fam.evaluate(zc, xi, eta),
                                  kind="fitzpatrick", convex=True, grad=gf)

        def freeze(z):
            z = space.check(z, "z")
            return _elliptic(space, cell_rep(space.cell_average(z)), "elliptic")

        def func(v, vstar):
            return freeze(v)(v, vstar)

        return Representative(func=func, kind="semimono", convex=False, space=space,
                              freeze=freeze, label=f"elliptic-semimono({fam.description})")

    return _elliptic(space, g, "elliptic")


def _elliptic(space: DiscreteSpace, g: Representative, kind: str) -> Representative:
    dx = space.dx

    def fields(v, vstar):
        v = space.check(v)
        vstar = space.check(vstar, "vstar")
        v, vstar = np.broadcast_arrays(v, vstar)
        xi = space.grad(v)
        eta = space.grad(space.lambda_solve(vstar))
        lead = xi.shape[:-1]
        xi2 = xi.reshape(-1, space.M + 1)
        eta2 = eta.reshape(-1, space.M + 1)
        n = xi2.shape[0]
        scale = 1.0 + np.max(np.abs(eta2), axis=1) + np.max(np.abs(xi2), axis=1)
        if g.grad is not None:
            def dsum(c):
                return np.sum(np.asarray(g.grad(xi2, eta2 + c[:, None])[1]), axis=1)
            c = _bracket_root(dsum, n, scale)
        else:
            def total(c):
                val = np.sum(np.asarray(g(xi2, eta2 + c[:, None])), axis=1)
                return np.where(np.isnan(val), math.inf, val)
            c, _ = _golden_min(total, -4.0 * scale, 4.0 * scale, iters=120)
        return xi2, eta2 + c[:, None], lead

    def func(v, vstar):
        xi, eta, lead = fields(v, vstar)
        val = dx * np.sum(np.asarray(g(xi, eta)), axis=1)
        return float(val[0]) if lead == () else val.reshape(lead)

    grad = None
    if g.grad is not None:
        def grad(v, vstar):
            xi, eta, lead = fields(v, vstar)
            gx, ge = g.grad(xi, eta)
            gv = dx * space.grad_T(np.asarray(gx))
            gs = dx * space.lambda_solve(space.grad_T(np.asarray(ge)))
            shape = lead + (space.M,)
            return gv.reshape(shape), gs.reshape(shape)

    return Representative(func=func, kind=kind, convex=g.convex, space=space, grad=grad,
                          label=f"elliptic({g.label})")


def nodal_fenchel_representative(space: DiscreteSpace, phi: ScalarConvex) -> Representative:
    """Grid Fenchel function ``dx * sum_i phi(v_i) + phi*(v*_i)`` of the nodal map ``v -> phi'(v)``."""
    phi_star = phi.conjugate()
    dx = space.dx

    def func(v, vstar):
        v = space.check(v)
        vstar = space.check(vstar, "vstar")
        val = dx * np.sum(np.asarray(phi(v)) + np.asarray(phi_star(vstar)), axis=-1)
        return _scalar_out(val)

    grad = None
    if phi.smooth and phi_star.smooth:
        def grad(v, vstar):
            return (dx * np.asarray(phi.derivative(space.check(v))),
                    dx * np.asarray(phi_star.derivative(space.check(vstar, "vstar"))))

    return Representative(func=func, kind="fenchel", convex=True, space=space, grad=grad,
                          label=f"nodal-fenchel({phi!r})")


# -- certification ----------------------------------------------------------


@dataclass
class CertReport:
    min_gap: float
    max_gap_on_graph: float
    min_gap_off_graph: float
    minimality_violation: float | None
    tol: float
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def _graph_points(graph_or_family, grid):
    if isinstance(graph_or_family, MonotoneGraph):
        return graph_or_family.sample(n_per_piece=max(len(grid) // 2, 10),
                                      tail_length=float(np.max(np.abs(grid))))
    pts = []
    for v in grid:
        g = graph_or_family.graph(v)
        z = g.evaluate(v)
        if np.isfinite(z):
            pts.append((v, float(z)))
        for o, d, tmax in g.pieces():
            if d[0] == 0 and abs(o[0] - v) < 1e-12 and np.isfinite(tmax):
                pts.append((v, o[1]))
                pts.append((v, o[1] + tmax * d[1]))
    return np.asarray(pts)


def _on_family_graph(family, v, vstar, tol):
    out = np.empty(np.shape(v), dtype=bool)
    for idx in np.ndindex(out.shape):
        out[idx] = family.graph(v[idx]).distance(v[idx], vstar[idx]) <= tol
    return out


def certify_representative(f: Representative, graph_or_family, sample_grid=None,
                           tol: float = 1e-9, compare: Representative | None = None,
                           off_graph_distance: float = 0.1) -> CertReport:
    """Check the representation conditions of a scalar ``f`` on a sample box.

    (a) the gap is ``>= -tol`` on the box; (b) it is ``<= tol`` at sampled
    graph points; (c) away from the graph (distance ``>= off_graph_distance``)
    it is ``> tol``; (d) with ``compare``, ``f <= compare + tol`` on the box,
    the minimality of Fitzpatrick functions. Failures are listed, not raised.
    """
    grid = np.linspace(-3.0, 3.0, 101) if sample_grid is None else np.asarray(sample_grid, dtype=float)
    V, S = np.meshgrid(grid, grid, indexing="ij")
    gap = np.asarray(f.gap(V, S), dtype=float)
    failures = []
    min_gap = float(np.min(gap))
    if not min_gap >= -tol:
        failures.append(f"gap inequality violated: min gap {min_gap:.3e} < -{tol:g}")

    pts = _graph_points(graph_or_family, grid)
    lo, hi = grid.min(), grid.max()
    inside = (pts[:, 0] >= lo) & (pts[:, 0] <= hi) & (pts[:, 1] >= lo) & (pts[:, 1] <= hi)
    pts = pts[inside]
    on_gap = np.asarray(f.gap(pts[:, 0], pts[:, 1]), dtype=float) if pts.size else np.zeros(0)
    max_on = float(np.max(on_gap)) if on_gap.size else 0.0
    if not max_on <= tol:
        failures.append(f"gap not zero on the graph: max gap {max_on:.3e} > {tol:g}")

    if isinstance(graph_or_family, MonotoneGraph):
        dist = np.asarray(graph_or_family.distance(V, S))
        off = dist >= off_graph_distance
    else:
        off = ~_on_family_graph(graph_or_family, V, S, off_graph_distance)
    min_off = float(np.min(gap[off])) if np.any(off) else math.inf
    if not min_off > tol:
        failures.append(f"gap vanishes off the graph: min off-graph gap {min_off:.3e}")

    violation = None
    if compare is not None:
        other = np.asarray(compare(V, S), dtype=float)
        with np.errstate(invalid="ignore"):
            diff = np.asarray(f(V, S), dtype=float) - other
        diff = np.where(np.isinf(other) & (other > 0), -math.inf, diff)
        violation = float(np.max(diff))
        if not violation <= tol:
            failures.append(f"minimality violated: f - g reaches {violation:.3e}")

    return CertReport(min_gap=min_gap, max_gap_on_graph=max_on, min_gap_off_graph=min_off,
                      minimality_violation=violation, tol=tol, failures=failures)


def midpoint_convexity_violation(f: Representative, points, rng=None, n: int = 500) -> float:
    """Largest ``f((a+b)/2) - (f(a)+f(b))/2`` over random sample pairs (<= 0 for convex f)."""
    rng = np.random.default_rng(0) if rng is None else rng
    pts = np.asarray(points, dtype=float)
    i = rng.integers(0, len(pts), n)
    j = rng.integers(0, len(pts), n)
    a, b = pts[i], pts[j]
    m = 0.5 * (a + b)
    fa = np.asarray(f(a[:, 0], a[:, 1]))
    fb = np.asarray(f(b[:, 0], b[:, 1]))
    fm = np.asarray(f(m[:, 0], m[:, 1]))
    ok = np.isfinite(fa) & np.isfinite(fb)
    return float(np.max(fm[ok] - 0.5 * (fa[ok] + fb[ok]))) if np.any(ok) else -math.inf


def dump_representative_csv(f: Representative, v_grid, vstar_grid, path) -> None:
    """Write ``v, vstar, f, gap`` rows for a scalar representative on a grid."""
    V, S = np.meshgrid(np.asarray(v_grid, dtype=float), np.asarray(vstar_grid, dtype=float), indexing="ij")
    vals = np.asarray(f(V, S), dtype=float)
    gaps = np.asarray(f.gap(V, S), dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["v", "vstar", "f", "gap"])
        for row in zip(V.ravel(), S.ravel(), vals.ravel(), gaps.ravel()):
            w.writerow([f"{x:.12e}" for x in row])
