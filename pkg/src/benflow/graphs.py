"""Piecewise-linear monotone graphs in the plane.

A :class:`MonotoneGraph` is a connected polyline through points ``(w_j, z_j)``
that is nondecreasing in both coordinates, optionally continued by two rays.
A graph with both rays is the storage form of a maximal monotone graph
(identity, sign, Kirchhoff transforms, Stefan plateaus). Without rays it is
a bounded monotone piece, e.g. the single point ``{(0, 0)}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MonotoneGraph",
    "graph_membership",
    "identity_graph",
    "linear_graph",
    "sign_graph",
    "plateau_graph",
    "point_graph",
]


def _direction(d):
    if d is None:
        return None
    d = np.asarray(d, dtype=float)
    if d.shape != (2,) or np.any(d < 0) or not np.any(d > 0):
        raise ValueError(f"tail direction must be a nonnegative nonzero 2-vector, got {d}")
    return d / np.hypot(*d)


@dataclass(frozen=True, eq=False)
class MonotoneGraph:
    """Monotone polyline with optional ray extensions.

    ``left_tail`` and ``right_tail`` are directions ``(dw, dz)`` with
    nonnegative entries; the left ray runs from the first point along
    ``-left_tail`` and the right ray from the last point along ``+right_tail``.
    """

    points: np.ndarray
    left_tail: np.ndarray | None = None
    right_tail: np.ndarray | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
            raise ValueError("points must have shape (n, 2) with n >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        d = np.diff(pts, axis=0)
        if np.any(d < 0):
            raise ValueError("graph is not monotone: coordinates must be nondecreasing")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "left_tail", _direction(self.left_tail))
        object.__setattr__(self, "right_tail", _direction(self.right_tail))

    @property
    def is_maximal(self) -> bool:
        """Maximality surrogate: unbounded in both directions."""
        return self.left_tail is not None and self.right_tail is not None

    def pieces(self):
        """Yield ``(origin, direction, t_max)``; points are ``origin + t*direction``, ``0 <= t <= t_max``."""
        pts = self.points
        if self.left_tail is not None:
            yield pts[0], -self.left_tail, math.inf
        for a, b in zip(pts[:-1], pts[1:]):
            yield a, b - a, 1.0
        if pts.shape[0] == 1 and self.left_tail is None and self.right_tail is None:
            yield pts[0], np.zeros(2), 0.0
        if self.right_tail is not None:
            yield pts[-1], self.right_tail, math.inf

    def distance(self, w, z):
        """Euclidean distance from ``(w, z)`` to the graph (vectorised)."""
        w = np.asarray(w, dtype=float)
        z = np.asarray(z, dtype=float)
        best = np.full(np.broadcast(w, z).shape, math.inf)
        for o, d, tmax in self.pieces():
            dd = float(d @ d)
            if dd == 0.0:
                t = np.zeros_like(best)
            else:
                t = np.clip(((w - o[0]) * d[0] + (z - o[1]) * d[1]) / dd, 0.0, tmax)
            best = np.minimum(best, np.hypot(w - o[0] - t * d[0], z - o[1] - t * d[1]))
        return float(best) if best.ndim == 0 else best

    def contains(self, w, z, tol: float = 1e-9):
        res = np.asarray(self.distance(w, z)) <= tol
        return bool(res) if res.ndim == 0 else res

    def sample(self, n_per_piece: int = 50, tail_length: float = 5.0) -> np.ndarray:
        """Points along the graph, rays clipped at ``tail_length``."""
        out = []
        for o, d, tmax in self.pieces():
            if math.isinf(tmax):
                tmax = tail_length
            t = np.linspace(0.0, tmax, n_per_piece)
            out.append(o + t[:, None] * d)
        return np.unique(np.concatenate(out), axis=0)

    def fitzpatrick(self, v, vstar):
        """``sup over graph points (w, z) of vstar*w - z*(w - v)``, exact per piece.

        Along a piece ``(w, z) = o + t d`` the objective is a concave quadratic
        in ``t`` (leading coefficient ``-dw*dz <= 0``), maximised in closed
        form. An unbounded ray with a positive linear coefficient gives ``+inf``.
        """
        v = np.asarray(v, dtype=float)
        vstar = np.asarray(vstar, dtype=float)
        best = np.full(np.broadcast(v, vstar).shape, -math.inf)
        for o, d, tmax in self.pieces():
            w0, z0 = o
            dw, dz = d
            c0 = vstar * w0 - z0 * (w0 - v)
            c1 = dw * (vstar - z0) + dz * (v - w0)
            c2 = -dw * dz
            if c2 < 0:
                t = np.clip(-c1 / (2.0 * c2), 0.0, tmax)
                val = c0 + c1 * t + c2 * t * t
            elif math.isinf(tmax):
                val = np.where(c1 > 0, math.inf, c0)
            else:
                t = np.where(c1 > 0, tmax, 0.0)
                val = c0 + c1 * t
            best = np.maximum(best, val)
        return float(best) if best.ndim == 0 else best

    def unbounded_direction(self, v, vstar):
        """Ray direction along which the Fitzpatrick sup diverges, or ``None``."""
        for o, d, tmax in self.pieces():
            if math.isinf(tmax) and d[0] * d[1] == 0:
                c1 = d[0] * (vstar - o[1]) + d[1] * (v - o[0])
                if c1 > 0:
                    return tuple(d)
        return None

    def evaluate(self, w):
        """Single-valued reading ``z(w)`` by linear interpolation (vertical parts take the lower end)."""
        pts = self.points
        w = np.asarray(w, dtype=float)
        ws, zs = pts[:, 0], pts[:, 1]
        out = np.interp(w, ws, zs)
        if self.left_tail is not None and self.left_tail[0] > 0:
            s = self.left_tail[1] / self.left_tail[0]
            out = np.where(w < ws[0], zs[0] + s * (w - ws[0]), out)
        else:
            out = np.where(w < ws[0], np.nan, out)
        if self.right_tail is not None and self.right_tail[0] > 0:
            s = self.right_tail[1] / self.right_tail[0]
            out = np.where(w > ws[-1], zs[-1] + s * (w - ws[-1]), out)
        else:
            out = np.where(w > ws[-1], np.nan, out)
        return float(out) if out.ndim == 0 else out


def graph_membership(graph: MonotoneGraph, w, z, tol: float = 1e-9):
    return graph.contains(w, z, tol)


def linear_graph(slope: float) -> MonotoneGraph:
    """Graph of ``w -> slope*w`` for ``slope >= 0``."""
    if slope < 0:
        raise ValueError("slope must be nonnegative")
    d = (1.0, slope)
    return MonotoneGraph([(0.0, 0.0)], left_tail=d, right_tail=d)


def identity_graph() -> MonotoneGraph:
    return linear_graph(1.0)


def sign_graph() -> MonotoneGraph:
    """Subdifferential of ``|.|``: a vertical segment at 0 joined to two plateaus."""
    return MonotoneGraph([(0.0, -1.0), (0.0, 1.0)], left_tail=(1.0, 0.0), right_tail=(1.0, 0.0))


def plateau_graph(width: float, slope: float = 1.0) -> MonotoneGraph:
    """Stefan-type graph: zero on ``[0, width]``, slope ``slope`` on either side."""
    if width < 0 or slope <= 0:
        raise ValueError("need width >= 0 and slope > 0")
    return MonotoneGraph([(0.0, 0.0), (width, 0.0)], left_tail=(1.0, slope), right_tail=(1.0, slope))


def point_graph(w: float = 0.0, z: float = 0.0) -> MonotoneGraph:
    """The (non-maximal) graph ``{(w, z)}``."""
    return MonotoneGraph([(w, z)])
