"""Variational time discretisation of ``D_t u + alpha(u) = h``.

A candidate trajectory ``v^0 = u0, v^1, ..., v^K`` is scored by the BEN
functional

    sum_k w_k dt [ f(v^k, r^k) - <r^k, v^k> ],   r^k = P (h^k - D_t v^k),

where ``f`` is a grid representative of ``alpha``, ``D_t`` is the backward
difference and ``P`` is the identity (pivot space H) or ``Lambda`` (pivot
space V'). Every summand is a representative gap, so the functional is
nonnegative and vanishes exactly at the implicit-Euler trajectory. The
weights are 1 (Lebesgue) or the midpoint values ``T - (k - 1/2) dt`` of
the measure ``(T - t) dt``.
"""
from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .representation import Representative
from .spaces import DiscreteSpace

__all__ = [
    "WEIGHTS",
    "Trajectory",
    "BenProblem",
    "SolveOptions",
    "SolveReport",
    "LinearFlowOperator",
    "SemimonoFlowOperator",
    "NodalFlowOperator",
    "PicardError",
    "time_weights",
    "discrete_dt",
    "assemble_ben",
    "ben_gradient",
    "weighted_dt_identity_check",
    "energy_telescoping",
    "implicit_euler_solve",
    "minimize_ben",
    "l2q_norm",
]

log = logging.getLogger(__name__)

WEIGHTS = ("lebesgue", "linear_decay")
PIVOTS = ("H", "lambda")


class PicardError(RuntimeError):
    """Inner fixed-point iteration of the implicit-Euler oracle did not converge."""


# -- trajectories ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-discrete path ``v^0..v^K`` on a uniform grid of ``[0, T]``."""

    steps: np.ndarray
    T: float

    def __post_init__(self):
        s = np.array(self.steps, dtype=float)
        if s.ndim != 2 or s.shape[0] < 2:
            raise ValueError("steps must have shape (K+1, M) with K >= 1")
        if not self.T > 0:
            raise ValueError("T must be > 0")
        s.setflags(write=False)
        object.__setattr__(self, "steps", s)

    @property
    def K(self) -> int:
        return self.steps.shape[0] - 1

    @property
    def dt(self) -> float:
        return self.T / self.K

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.K + 1)

    @classmethod
    def constant(cls, u0, K: int, T: float) -> "Trajectory":
        u0 = np.asarray(u0, dtype=float)
        return cls(np.repeat(u0[None, :], K + 1, axis=0), T)

    @classmethod
    def from_function(cls, space: DiscreteSpace, fn: Callable, K: int, T: float) -> "Trajectory":
        """Sample ``fn(t, x)`` at the time levels and interior nodes."""
        t = np.linspace(0.0, T, K + 1)[:, None]
        return cls(np.asarray(fn(t, space.nodes[None, :]), dtype=float) * np.ones((K + 1, space.M)), T)

    def to_rows(self, space: DiscreteSpace):
        """``(t, x, u)`` rows for CSV output."""
        for t, row in zip(self.times, self.steps):
            for x, u in zip(space.nodes, row):
                yield t, x, u


def time_weights(K: int, T: float, weight: str) -> np.ndarray:
    """Per-step weights: ones, or the midpoint values ``T - (k - 1/2) dt`` of ``(T - t) dt``."""
    if weight == "lebesgue":
        return np.ones(K)
    if weight == "linear_decay":
        dt = T / K
        return T - (np.arange(1, K + 1) - 0.5) * dt
    raise ValueError(f"unknown weight {weight!r}; expected one of {WEIGHTS}")


def discrete_dt(traj: Trajectory, k: int | None = None) -> np.ndarray:
    """Backward difference ``(v^k - v^{k-1}) / dt``; all ``k = 1..K`` when ``k`` is None."""
    if k is None:
        return np.diff(traj.steps, axis=0) / traj.dt
    if not 1 <= k <= traj.K:
        raise IndexError(f"step index {k} outside 1..{traj.K}")
    return (traj.steps[k] - traj.steps[k - 1]) / traj.dt


def l2q_norm(space: DiscreteSpace, steps, dt: float) -> float:
    """``sqrt(sum_{k>=1} dt ||v^k||_H^2)``, the discrete L^2(Q) norm."""
    steps = np.asarray(steps, dtype=float)
    return float(np.sqrt(dt * np.sum(space.pairing(steps[1:], steps[1:]))))


# -- operators used by the implicit-Euler oracle -------------------------------


def _tridiagonal_bands(A: np.ndarray):
    n = A.shape[0]
    if n > 2 and (np.any(np.triu(A, 2)) or np.any(np.tril(A, -2))):
        return None
    ab = np.zeros((3, n))
    ab[0, 1:] = np.diag(A, 1)
    ab[1] = np.diag(A)
    ab[2, :-1] = np.diag(A, -1)
    return ab


def _solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = _tridiagonal_bands(A)
    if ab is None:
        return np.linalg.solve(A, b)
    return solve_banded((1, 1), ab, b)


@dataclass(frozen=True, eq=False)
class LinearFlowOperator:
    """``v -> A v`` with a positive matrix ``A`` (symmetric part PSD)."""

    matrix: np.ndarray

    def apply(self, v):
        return np.asarray(v) @ self.matrix.T

    def resolvent(self, v_prev, h, dt):
        """Solve ``(v - v_prev)/dt + A v = h``."""
        n = self.matrix.shape[0]
        return _solve(np.eye(n) + dt * self.matrix, v_prev + dt * h)


@dataclass(frozen=True, eq=False)
class SemimonoFlowOperator:
    """``alpha(v) = beta(v, v)`` with ``beta(z, .)`` linear: ``v -> B(z) v``.

    The resolvent is fully implicit: Picard iteration on the frozen ``z``
    with damping, stopped when the fixed-point update is below ``tol``.
    """

    matrix_of_z: Callable[[np.ndarray], np.ndarray]
    damping: float = 0.5
    tol: float = 1e-10
    max_iter: int = 200

    def apply(self, v):
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            return self.matrix_of_z(v) @ v
        return np.stack([self.matrix_of_z(r) @ r for r in v])

    def frozen_solve(self, z, v_prev, h, dt):
        B = self.matrix_of_z(z)
        return _solve(np.eye(B.shape[0]) + dt * B, v_prev + dt * h)

    def resolvent(self, v_prev, h, dt):
        z = np.array(v_prev, dtype=float)
        for it in range(1, self.max_iter + 1):
            v = self.frozen_solve(z, v_prev, h, dt)
            delta = float(np.max(np.abs(v - z)))
            if delta <= self.tol:
                return v
            z = z + self.damping * (v - z)
        raise PicardError(f"Picard iteration not converged after {self.max_iter} iterations (last update {delta:.3e})")


@dataclass(frozen=True, eq=False)
class NodalFlowOperator:
    """``v -> A theta(v)`` with ``theta`` the derivative of a smooth convex potential.

    Used for enthalpy formulations ``D_t u - d^2/dx^2 theta(u) = h``. The
    resolvent is a semismooth Newton iteration with backtracking.
    """

    space: DiscreteSpace
    potential: object
    tol: float = 1e-13
    max_iter: int = 100

    def theta(self, v):
        return np.asarray(self.potential.derivative(v), dtype=float)

    def apply(self, v):
        return self.space.laplacian_apply(self.theta(v))

    def resolvent(self, v_prev, h, dt):
        sp = self.space
        A = sp.laplacian_matrix()
        rhs = v_prev + dt * h

        def F(v):
            return v + dt * sp.laplacian_apply(self.theta(v)) - rhs

        v = np.array(v_prev, dtype=float)
        r = F(v)
        scale = 1.0 + float(np.max(np.abs(rhs)))
        for _ in range(self.max_iter):
            nr = float(np.max(np.abs(r)))
            if nr <= self.tol * scale:
                return v
            J = np.eye(sp.M) + dt * A * np.asarray(self.potential.second_derivative(v), dtype=float)[None, :]
            step = _solve(J, -r)
            lam = 1.0
            while lam > 1e-8:
                v_try = v + lam * step
                r_try = F(v_try)
                if float(np.max(np.abs(r_try))) < (1.0 - 1e-4 * lam) * nr:
                    break
                lam *= 0.5
            v, r = v_try, r_try
        if float(np.max(np.abs(r))) <= 1e-10 * scale:
            return v
        raise PicardError("Newton iteration for the enthalpy step did not converge")


# -- problems ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BenProblem:
    """A flow instance ``D_t u + alpha(u) = h, u(0) = u0`` on ``[0, T]`` with ``K`` steps.

    ``representative`` is a grid representative of ``alpha`` after the
    pivot map: with ``pivot="lambda"`` it represents ``Lambda`` composed
    with the flow operator and the pairing is taken in the ``Lambda`` inner
    product. ``operator`` provides the resolvent used by the oracle.
    """

    space: DiscreteSpace
    representative: Representative
    operator: object
    h: np.ndarray
    u0: np.ndarray
    T: float
    K: int
    weight: str = "lebesgue"
    pivot: str = "H"
    label: str = ""

    def __post_init__(self):
        sp = self.space
        if not self.T > 0:
            raise ValueError("T must be > 0")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be an integer >= 1")
        if self.weight not in WEIGHTS:
            raise ValueError(f"unknown weight {self.weight!r}; expected one of {WEIGHTS}")
        if self.pivot not in PIVOTS:
            raise ValueError(f"unknown pivot {self.pivot!r}")
        if self.representative.space is None or self.representative.space.M != sp.M:
            raise ValueError("representative must be a grid representative on the problem's space")
        h = np.asarray(self.h, dtype=float)
        if h.ndim == 1:
            h = np.repeat(sp.check(h, "h")[None, :], self.K + 1, axis=0)
        if h.shape != (self.K + 1, sp.M):
            raise ValueError(f"h must have shape ({self.K + 1}, {sp.M})")
        u0 = np.array(sp.check(self.u0, "u0"), dtype=float)
        if u0.ndim != 1:
            raise ValueError("u0 must be a single grid function")
        h.setflags(write=False)
        u0.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "K", int(self.K))
        self._certify()

    def _certify(self):
        rng = np.random.default_rng(12345)
        sp = self.space
        # K rows so that representatives frozen along a trajectory broadcast
        v = rng.standard_normal((self.K, sp.M))
        vs = sp.laplacian_apply(rng.standard_normal((self.K, sp.M)))
        rep = self.representative
        if rep.freeze is not None:
            rep = rep.freeze(v)
        gaps = np.asarray(rep.gap(v, vs))
        scale = 1e-9 * (1.0 + np.abs(np.asarray(rep(v, vs))))
        if np.any(gaps < -scale):
            raise ValueError(f"representative violates the gap inequality on sample pairs (min gap {gaps.min():.3e})")

    @property
    def dt(self) -> float:
        return self.T / self.K

    @property
    def weights(self) -> np.ndarray:
        return time_weights(self.K, self.T, self.weight)

    @property
    def is_semimono(self) -> bool:
        return self.representative.freeze is not None

    def pivot_apply(self, vstar):
        return vstar if self.pivot == "H" else self.space.lambda_solve(vstar)

    def with_representative(self, rep: Representative) -> "BenProblem":
        return replace(self, representative=rep)

    def with_weight(self, weight: str) -> "BenProblem":
        return replace(self, weight=weight)

    def scale(self) -> float:
        """``1 + ||u0||_H^2``, the reference size for tolerances."""
        return 1.0 + float(self.space.pairing(self.u0, self.u0))


def _as_steps(problem: BenProblem, traj) -> np.ndarray:
    steps = traj.steps if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    if steps.shape != (problem.K + 1, problem.space.M):
        raise ValueError(f"trajectory must have shape ({problem.K + 1}, {problem.space.M})")
    if isinstance(traj, Trajectory) and not math.isclose(traj.T, problem.T, rel_tol=1e-12):
        raise ValueError("trajectory horizon differs from the problem's T")
    return steps


def _residual_duals(problem: BenProblem, steps: np.ndarray) -> np.ndarray:
    dv = np.diff(steps, axis=0) / problem.dt
    return problem.pivot_apply(problem.h[1:] - dv)


def assemble_ben(problem: BenProblem, traj, check_initial: bool = True):
    """Weighted BEN value and the ``K`` per-step gaps.

    Returns ``(value, gaps)``. A step at which the representative is
    infinite makes the value ``+inf`` and is named in a warning.
    """
    steps = _as_steps(problem, traj)
    if check_initial and not np.array_equal(steps[0], problem.u0):
        raise ValueError("candidate violates the initial condition v^0 = u0")
    r = _residual_duals(problem, steps)
    v = steps[1:]
    rep = problem.representative
    with np.errstate(invalid="ignore"):
        gaps = np.asarray(rep(v, r), dtype=float) - problem.space.pairing(r, v)
    gaps = np.where(np.isnan(gaps), math.inf, gaps)
    if np.any(np.isinf(gaps)):
        k = int(np.flatnonzero(np.isinf(gaps))[0]) + 1
        warnings.warn(f"representative is +inf at step {k}", RuntimeWarning, stacklevel=2)
        return math.inf, gaps
    value = float(np.sum(problem.weights * problem.dt * gaps))
    return value, gaps


def ben_gradient(problem: BenProblem, steps: np.ndarray):
    """Value and Euclidean gradient with respect to ``v^1..v^K``."""
    rep = problem.representative
    if rep.grad is None:
        raise ValueError("representative has no gradient; smooth it first")
    sp, dt = problem.space, problem.dt
    r = _residual_duals(problem, steps)
    v = steps[1:]
    gaps = np.asarray(rep(v, r), dtype=float) - sp.pairing(r, v)
    w = problem.weights
    value = float(np.sum(w * dt * gaps))
    gv, gr = rep.grad(v, r)
    q = np.asarray(gr) - sp.dx * v
    Pq = problem.pivot_apply(q)
    grad = (w * dt)[:, None] * (np.asarray(gv) - sp.dx * r) - w[:, None] * Pq
    grad[:-1] += w[1:, None] * Pq[1:]
    return value, grad


def energy_telescoping(space: DiscreteSpace, traj: Trajectory):
    """Both sides of ``sum dt <D_t v^k, v^k> = |v^K|^2/2 - |v^0|^2/2 + sum |v^k - v^{k-1}|^2 / 2``."""
    s = traj.steps
    lhs = float(np.sum(traj.dt * space.pairing(discrete_dt(traj), s[1:])))
    d = np.diff(s, axis=0)
    rhs = 0.5 * (space.pairing(s[-1], s[-1]) - space.pairing(s[0], s[0])) + 0.5 * float(np.sum(space.pairing(d, d)))
    return lhs, float(rhs)


def weighted_dt_identity_check(space: DiscreteSpace, traj: Trajectory, T: float | None = None):
    """Both sides of the time-integrated identity for the measure ``(T - t) dt``.

    ``lhs = sum_k w_k dt <D_t v^k, v^k>`` with midpoint weights and
    ``rhs = 1/2 sum_k dt |v^k|^2 - (T/2)|v^0|^2``; they differ by ``O(dt)``.
    """
    T = traj.T if T is None else float(T)
    if not math.isclose(T, traj.T, rel_tol=1e-12):
        raise ValueError("T differs from the trajectory horizon")
    s = traj.steps
    w = time_weights(traj.K, T, "linear_decay")
    lhs = float(np.sum(w * traj.dt * space.pairing(discrete_dt(traj), s[1:])))
    rhs = 0.5 * traj.dt * float(np.sum(space.pairing(s[1:], s[1:]))) - 0.5 * T * float(space.pairing(s[0], s[0]))
    return lhs, rhs


# -- oracle ---------------------------------------------------------------------------


def implicit_euler_solve(problem: BenProblem) -> Trajectory:
    """Reference solution: ``(v^k - v^{k-1})/dt + alpha(v^k) = h^k`` step by step."""
    op = problem.operator
    steps = np.empty((problem.K + 1, problem.space.M))
    steps[0] = problem.u0
    for k in range(1, problem.K + 1):
        steps[k] = op.resolvent(steps[k - 1], problem.h[k], problem.dt)
    return Trajectory(steps, problem.T)


# -- minimisation ---------------------------------------------------------------------


@dataclass
class SolveOptions:
    tol_null: float | None = None  # default 1e-8 * (1 + |u0|^2)
    tol_grad: float = 0.0
    max_iter: int = 5000
    max_outer: int = 50
    damping: float = 0.5
    armijo: float = 0.5
    oracle: bool = True

    def resolved_tol(self, problem: BenProblem) -> float:
        return 1e-8 * problem.scale() if self.tol_null is None else float(self.tol_null)


@dataclass
class SolveReport:
    minimizer: Trajectory
    value: float
    per_step_gaps: np.ndarray
    oracle_distance: float
    iterations: int
    wall_time_ms: float
    converged: bool
    oracle_norm: float = math.nan
    outer_iterations: int = 0
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def relative_oracle_distance(self) -> float:
        return self.oracle_distance / self.oracle_norm if self.oracle_norm > 0 else self.oracle_distance

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            "value": self.value,
            "per_step_gaps": [float(g) for g in self.per_step_gaps],
            "oracle_distance": self.oracle_distance,
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }
        if timing:
            out["wall_time_ms"] = self.wall_time_ms
        return out


def _fista(fun_grad, x0, tol_value, tol_grad, max_iter, armijo):
    """Accelerated gradient with backtracking and gradient-based adaptive restart.

    Returns ``(x, f(x), iterations)``.
    """
    x = x0.copy()
    fx, gx = fun_grad(x)
    if fx <= tol_value or np.linalg.norm(gx) <= tol_grad:
        return x, fx, 0
    y, fy, gy = x, fx, gx
    t, L = 1.0, 1.0
    it = 0
    for it in range(1, max_iter + 1):
        gnorm2 = float(np.vdot(gy, gy))
        while True:
            x_new = y - gy / L
            f_new, g_new = fun_grad(x_new)
            if f_new <= fy - 0.5 * gnorm2 / L + 1e-15 * abs(fy):
                break
            L /= armijo
            if L > 1e300:
                return x, fx, it
        if np.vdot(gy, x_new - x) > 0 or f_new > fx:
            t_new = 1.0
            y, fy, gy = x_new, f_new, g_new
        else:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_new) * (x_new - x)
            fy, gy = fun_grad(y)
        x, fx, t = x_new, f_new, t_new
        if fx <= tol_value or np.linalg.norm(g_new) <= tol_grad:
            break
    return x, fx, it


def _convex_solve(problem: BenProblem, steps0: np.ndarray, tol: float, opts: SolveOptions):
    u0 = problem.u0

    def fun_grad(x):
        return ben_gradient(problem, np.vstack([u0[None, :], x]))

    x, _, iters = _fista(fun_grad, steps0[1:].copy(), tol, opts.tol_grad, opts.max_iter, opts.armijo)
    return np.vstack([u0[None, :], x]), iters


def minimize_ben(problem: BenProblem, init: Trajectory | None = None,
                 opts: SolveOptions | None = None, oracle: Trajectory | None = None) -> SolveReport:
    """Null-minimise the BEN functional over trajectories with ``v^0 = u0``.

    Convex representatives: accelerated gradient descent. Semi-monotone
    representatives: outer Picard iteration on the frozen first argument
    (damped), each frozen problem solved by the convex method. The report
    is flagged non-converged when the value stays above ``tol_null``.
    """
    opts = SolveOptions() if opts is None else opts
    start = time.perf_counter()
    init = Trajectory.constant(problem.u0, problem.K, problem.T) if init is None else init
    steps = np.array(_as_steps(problem, init))
    if not np.array_equal(steps[0], problem.u0):
        raise ValueError("initial guess violates the initial condition v^0 = u0")
    tol = opts.resolved_tol(problem)
    rep = problem.representative
    iterations = outer = 0

    if rep.freeze is None:
        steps, iterations = _convex_solve(problem, steps, tol, opts)
        value, gaps = assemble_ben(problem, steps)
    else:
        value, gaps = assemble_ben(problem, steps)
        z = steps[1:].copy()
        while value > tol and outer < opts.max_outer:
            outer += 1
            frozen = problem.with_representative(rep.freeze(z))
            steps, its = _convex_solve(frozen, steps, 0.1 * tol, opts)
            iterations += its
            value, gaps = assemble_ben(problem, steps)
            log.debug("outer %d: value %.3e after %d inner iterations", outer, value, its)
            z = z + opts.damping * (steps[1:] - z)

    converged = bool(value <= tol)
    minimizer = Trajectory(steps, problem.T)
    dist = norm = math.nan
    if opts.oracle or oracle is not None:
        ref = implicit_euler_solve(problem) if oracle is None else oracle
        dist = l2q_norm(problem.space, steps - ref.steps, problem.dt)
        norm = l2q_norm(problem.space, ref.steps, problem.dt)
    wall = 1000.0 * (time.perf_counter() - start)
    msg = "converged" if converged else f"value {value:.3e} above tol_null {tol:.3e}"
    if not converged:
        log.warning("minimize_ben not converged: %s", msg)
    return SolveReport(minimizer=minimizer, value=float(value), per_step_gaps=np.asarray(gaps),
                       oracle_distance=float(dist), iterations=iterations, wall_time_ms=wall,
                       converged=converged, oracle_norm=float(norm), outer_iterations=outer,
                       message=msg)
