"""Structural compactness and stability experiments.

On a fixed grid all topologies coincide, so convergence notions are
measured as trends along families: weak convergence through sine moments,
the nonlinear weak topology through moments plus the duality pairing,
Gamma-limits of representatives through pointwise extrapolation in ``1/n``.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .flow import (BenProblem, SolveOptions, assemble_ben, discrete_dt, l2q_norm,
                   minimize_ben)
from .graphs import MonotoneGraph
from .models import DiffusionLaw, build_diffusion_problem
from .representation import Representative
from .spaces import DiscreteSpace

__all__ = [
    "PairingDiag",
    "OperatorSequence",
    "StabilityReport",
    "GraphLimitDiag",
    "LimitEstimate",
    "NonConvergentFamilyError",
    "sine_moments",
    "pairing_convergence_diagnostic",
    "oscillation_family",
    "run_stability_experiment",
    "quadratic_law_sequence",
    "constant_sequence",
    "data_perturbation_sequence",
    "graph_limit_check",
    "estimate_limit_integrand",
    "DEFAULT_INDICES",
]

log = logging.getLogger(__name__)

DEFAULT_INDICES = (4, 8, 16, 32)


class NonConvergentFamilyError(ValueError):
    """The family does not converge pointwise, so no Gamma-limit is certified."""


# -- nonlinear weak topology ---------------------------------------------------------


def sine_moments(space: DiscreteSpace, a, n_moments: int = 10, dt: float | None = None) -> np.ndarray:
    """``<a, sin(m pi x)>`` for ``m = 1..n_moments``.

    A 2-D ``a`` is read as a time-stacked trajectory; its moments are taken
    against ``sin(m pi x)`` and ``(t/T) sin(m pi x)`` integrated in time.
    """
    a = space.check(a)
    xi = np.sin(np.outer(np.arange(1, n_moments + 1), np.pi * space.nodes))
    if a.ndim == 1:
        return space.pairing(xi, a[None, :])
    if dt is None:
        raise ValueError("dt is required for time-stacked arrays")
    per_t = space.dx * a @ xi.T  # (K, m)
    t = (np.arange(1, a.shape[0] + 1)) / a.shape[0]
    return np.concatenate([dt * per_t.sum(axis=0), dt * (t[:, None] * per_t).sum(axis=0)])


def _pair(space, vstar, v, dt):
    p = space.pairing(vstar, v)
    return float(p) if np.ndim(p) == 0 else float(dt * np.sum(p))


def _trend_ok(err: np.ndarray, ns: np.ndarray, tol: float) -> bool:
    """Final error below ``tol``, or a nonincreasing tail decaying at least like ``n^-1/2``."""
    if err[-1] <= tol:
        return True
    if err.size < 3:
        return False
    tail = err[-3:]
    if np.any(np.diff(tail) > 1e-15) or tail[-1] <= 0:
        return False
    slope = np.polyfit(np.log(ns[-3:]), np.log(tail), 1)[0]
    return bool(slope <= -0.5)


@dataclass
class PairingDiag:
    ns: np.ndarray
    moment_err_v: np.ndarray
    moment_err_vstar: np.ndarray
    pairing_err: np.ndarray
    pairings: np.ndarray
    limit_pairing: float
    weak_v: bool
    weak_vstar: bool
    pairing_converges: bool
    tol: float

    @property
    def weakly_convergent(self) -> bool:
        return self.weak_v and self.weak_vstar

    @property
    def pi_tilde_convergent(self) -> bool:
        return self.weakly_convergent and self.pairing_converges

    @property
    def verdict(self) -> str:
        if self.pi_tilde_convergent:
            return "pi-tilde-convergent"
        if self.weakly_convergent:
            return "weakly convergent, not pi-tilde-convergent"
        return "not weakly convergent"

    def to_dict(self) -> dict:
        return {
            "moment_err_v": self.moment_err_v.tolist(),
            "moment_err_vstar": self.moment_err_vstar.tolist(),
            "pairing_err": self.pairing_err.tolist(),
            "verdict": self.verdict,
        }


def pairing_convergence_diagnostic(space: DiscreteSpace, seq_v: Sequence, seq_vstar: Sequence, v, vstar,
                                   test_moments: int = 10, tol: float = 1e-2, ns=None,
                                   dt: float | None = None, moments_from: int = 0) -> PairingDiag:
    """Trend test for ``(v_n, v*_n) -> (v, v*)`` in the nonlinear weak topology.

    Errors are relative to ``1 + |limit|``: the largest sine-moment error of
    ``v_n`` and of ``v*_n`` and the pairing error. Each counts as convergent
    when its final value is below ``tol`` or its tail decays (see
    ``_trend_ok``). ``moments_from`` skips leading family members in the
    moment trend, for families whose first members coincide with test functions.
    """
    if len(seq_v) != len(seq_vstar) or len(seq_v) == 0:
        raise ValueError("sequences must be nonempty and of equal length")
    ns = np.arange(1, len(seq_v) + 1) if ns is None else np.asarray(ns, dtype=float)
    mv = sine_moments(space, v, test_moments, dt)
    ms = sine_moments(space, vstar, test_moments, dt)
    p_lim = _pair(space, vstar, v, dt)
    ev, es, ep, pairs = [], [], [], []
    for a, b in zip(seq_v, seq_vstar):
        ev.append(np.max(np.abs(sine_moments(space, a, test_moments, dt) - mv) / (1.0 + np.abs(mv))))
        es.append(np.max(np.abs(sine_moments(space, b, test_moments, dt) - ms) / (1.0 + np.abs(ms))))
        p = _pair(space, b, a, dt)
        pairs.append(p)
        ep.append(abs(p - p_lim) / (1.0 + abs(p_lim)))
    ev, es, ep = map(np.asarray, (ev, es, ep))
    sl = slice(moments_from, None)
    return PairingDiag(ns=ns, moment_err_v=ev, moment_err_vstar=es, pairing_err=ep,
                       pairings=np.asarray(pairs), limit_pairing=p_lim,
                       weak_v=_trend_ok(ev[sl], ns[sl], tol), weak_vstar=_trend_ok(es[sl], ns[sl], tol),
                       pairing_converges=_trend_ok(ep, ns, tol), tol=tol)


def oscillation_family(space: DiscreteSpace, ns=(8, 16, 32, 64)):
    """``v_n = v*_n = sin(n pi x)``: weakly null, with pairing ``1/2`` for every ``n``."""
    if max(ns) > space.M / 2:
        raise ValueError("oscillation index must satisfy n <= M/2")
    seq = [space.sample(lambda x, n=n: np.sin(n * np.pi * x)) for n in ns]
    return seq, seq


# -- stability experiments --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OperatorSequence:
    """Perturbed diffusion problems indexed by ``n`` with a declared limit.

    ``law(n)`` gives the diffusion law and ``data(n)`` the pair
    ``(u0_n, h_n)``; the shared bounds ``k_min``/``k_max`` are the
    equi-coercivity and equi-boundedness constants.
    """

    space: DiscreteSpace
    indices: tuple
    law: Callable[[int], DiffusionLaw]
    data: Callable[[int], tuple]
    limit_law: DiffusionLaw
    limit_data: tuple
    T: float = 0.1
    K: int = 32
    weight: str = "lebesgue"
    label: str = ""

    def __post_init__(self):
        idx = tuple(int(n) for n in self.indices)
        if len(idx) < 2 or any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing with at least two entries")
        object.__setattr__(self, "indices", idx)
        if not self.k_min > 0:
            raise ValueError("equi-coercivity violated: shared k_min <= 0")
        if not math.isfinite(self.k_max):
            raise ValueError("equi-boundedness violated: k_max is not finite")

    @property
    def k_min(self) -> float:
        return min([self.law(n).k_min for n in self.indices] + [self.limit_law.k_min])

    @property
    def k_max(self) -> float:
        return max([self.law(n).k_max for n in self.indices] + [self.limit_law.k_max])

    def problem(self, n: int | None) -> BenProblem:
        law = self.limit_law if n is None else self.law(n)
        u0, h = self.limit_data if n is None else self.data(n)
        return build_diffusion_problem(self.space, law, u0, h, self.T, self.K, self.weight,
                                       label=f"{self.label}[n={'inf' if n is None else n}]")


def quadratic_law_sequence(space: DiscreteSpace, indices=DEFAULT_INDICES, T: float = 0.1, K: int = 32,
                           u0=None, weight: str = "lebesgue") -> OperatorSequence:
    """``k_n(s) = 1 + s^2 n/(n+1)`` converging to ``k(s) = 1 + s^2``."""
    u0 = (lambda x: np.sin(np.pi * x)) if u0 is None else u0
    return OperatorSequence(space, tuple(indices), law=lambda n: DiffusionLaw("quadratic", n / (n + 1.0)),
                            data=lambda n: (u0, 0.0), limit_law=DiffusionLaw("quadratic", 1.0),
                            limit_data=(u0, 0.0), T=T, K=K, weight=weight, label="k_n = 1 + s^2 n/(n+1)")


def constant_sequence(space: DiscreteSpace, law: DiffusionLaw, indices=DEFAULT_INDICES, T: float = 0.1,
                      K: int = 32, u0=None, weight: str = "lebesgue") -> OperatorSequence:
    u0 = (lambda x: np.sin(np.pi * x)) if u0 is None else u0
    return OperatorSequence(space, tuple(indices), law=lambda n: law, data=lambda n: (u0, 0.0),
                            limit_law=law, limit_data=(u0, 0.0), T=T, K=K, weight=weight,
                            label="constant")


def data_perturbation_sequence(space: DiscreteSpace, law: DiffusionLaw | None = None, indices=DEFAULT_INDICES,
                               T: float = 0.1, K: int = 32, weight: str = "lebesgue") -> OperatorSequence:
    """``u0_n = sin(pi x) + sin(2 pi x)/n`` with a fixed law."""
    law = DiffusionLaw("constant", 1.0) if law is None else law

    def u0(x):
        return np.sin(np.pi * x)

    def data(n):
        return (lambda x: u0(x) + np.sin(2 * np.pi * x) / n), 0.0

    return OperatorSequence(space, tuple(indices), law=lambda n: law, data=data, limit_law=law,
                            limit_data=(u0, 0.0), T=T, K=K, weight=weight, label="u0_n = u0 + sin(2 pi x)/n")


@dataclass
class StabilityReport:
    indices: list
    errors: list
    ben_values: list
    pairing_gaps: list
    norms: list
    oracle_distances: list
    limit_norm: float
    limit_residual: float
    bounded: bool
    decreasing: bool
    monotone: bool
    limit_solves_limit_problem: bool
    pairing_diag: PairingDiag | None
    aborted: bool = False
    message: str = ""
    trajectories: dict = field(default_factory=dict)

    @property
    def pi_tilde_ok(self) -> bool:
        return self.pairing_diag is not None and self.pairing_diag.pi_tilde_convergent

    @property
    def passed(self) -> bool:
        return (not self.aborted and self.bounded and self.limit_solves_limit_problem
                and self.pi_tilde_ok and (self.decreasing or max(self.errors) <= 1e-8 * (1 + self.limit_norm)))

    def to_dict(self) -> dict:
        return {
            "indices": list(self.indices),
            "errors": list(self.errors),
            "ben_values": list(self.ben_values),
            "pairing_gaps": list(self.pairing_gaps),
            "oracle_distances": list(self.oracle_distances),
            "limit_norm": self.limit_norm,
            "limit_residual": self.limit_residual,
            "bounded": self.bounded,
            "decreasing": self.decreasing,
            "limit_solves_limit_problem": self.limit_solves_limit_problem,
            "pi_tilde": None if self.pairing_diag is None else self.pairing_diag.verdict,
            "aborted": self.aborted,
            "message": self.message,
        }

    def csv_rows(self):
        for n, e, b, p in zip(self.indices, self.errors, self.ben_values, self.pairing_gaps):
            yield n, e, b, p


def _energy_bound(space: DiscreteSpace, prob: BenProblem) -> float:
    """``sqrt(T) (|u0| + T max_k |h^k|)``; implicit Euler for monotone flows stays below it."""
    hmax = float(np.max(np.sqrt(space.pairing(prob.h[1:], prob.h[1:]))))
    return math.sqrt(prob.T) * (space.norm_H(prob.u0) + prob.T * hmax)


def run_stability_experiment(seq: OperatorSequence, opts: SolveOptions | None = None,
                             jobs: int = 1, keep_trajectories: bool = False) -> StabilityReport:
    """Solve every member and the limit problem by BEN minimisation and compare.

    Checks boundedness, the error trend ``e_last < e_first``, that the limit
    trajectory null-minimises the limit functional, and the nonlinear weak
    convergence of ``(u_n, h_n - D_t u_n)``. A non-converged solve aborts the
    experiment; the report then covers the members solved before it.
    """
    opts = SolveOptions() if opts is None else opts
    sp = seq.space
    problems = {n: seq.problem(n) for n in seq.indices}
    limit_problem = seq.problem(None)
    keys = list(seq.indices) + [None]

    def solve(n):
        p = limit_problem if n is None else problems[n]
        return n, minimize_ben(p, opts=opts)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = dict(ex.map(solve, keys))
    else:
        results = dict(map(solve, keys))

    lim = results[None]
    dt = limit_problem.dt
    u_lim = lim.minimizer.steps
    lim_norm = l2q_norm(sp, u_lim, dt)
    lim_value, _ = assemble_ben(limit_problem, lim.minimizer)
    tol = opts.resolved_tol(limit_problem)

    indices, errors, bens, gaps, norms, odist = [], [], [], [], [], []
    bounded, aborted, message = True, False, ""
    if not lim.converged:
        aborted, message = True, f"limit solve not converged ({lim.message})"
    trajs = {}
    for n in seq.indices:
        if aborted:
            break
        r = results[n]
        if not r.converged:
            aborted, message = True, f"solve for n={n} not converged ({r.message})"
            break
        steps = r.minimizer.steps
        indices.append(n)
        errors.append(l2q_norm(sp, steps - u_lim, dt))
        bens.append(r.value)
        norms.append(l2q_norm(sp, steps, dt))
        odist.append(r.oracle_distance)
        bounded &= norms[-1] <= (1.0 + 1e-6) * _energy_bound(sp, problems[n]) + 1e-12
        if keep_trajectories:
            trajs[n] = r.minimizer

    diag = None
    if indices:
        lim_dual = limit_problem.h[1:] - discrete_dt(lim.minimizer)
        seq_v, seq_s = [], []
        for n in indices:
            tr = results[n].minimizer
            seq_v.append(tr.steps[1:])
            seq_s.append(problems[n].h[1:] - discrete_dt(tr))
        diag = pairing_convergence_diagnostic(sp, seq_v, seq_s, u_lim[1:], lim_dual, ns=indices, dt=dt)
        gaps = [float(e) for e in diag.pairing_err]
    if keep_trajectories:
        trajs["limit"] = lim.minimizer

    e = np.asarray(errors)
    decreasing = bool(e.size >= 2 and e[-1] < e[0])
    monotone = bool(e.size >= 2 and np.all(np.diff(e) <= 1e-15))
    return StabilityReport(indices=indices, errors=[float(x) for x in errors], ben_values=bens,
                           pairing_gaps=gaps, norms=norms, oracle_distances=odist, limit_norm=lim_norm,
                           limit_residual=float(lim_value), bounded=bool(bounded), decreasing=decreasing,
                           monotone=monotone, limit_solves_limit_problem=bool(lim_value <= tol),
                           pairing_diag=diag, aborted=aborted, message=message or "ok",
                           trajectories=trajs)


# -- graph limits -------------------------------------------------------------------------


@dataclass
class GraphLimitDiag:
    witnesses_on_graphs: bool
    witness_distances: np.ndarray
    witnesses_converge: bool
    limit_membership: bool
    liminf_inclusion: bool
    liminf_residual: float
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """Kuratowski upper-limit inclusion for the supplied witness family."""
        return self.witnesses_on_graphs and self.witnesses_converge and self.limit_membership


def graph_limit_check(graphs: Sequence[MonotoneGraph], limit: MonotoneGraph, witnesses, witness_limit,
                      tol: float = 1e-9, sample_box: float = 3.0) -> GraphLimitDiag:
    """Check that limits of graph points lie on the limit graph.

    ``witnesses[i]`` must lie on ``graphs[i]`` and converge to
    ``witness_limit``, which must lie on ``limit``. The reverse (lower-limit)
    inclusion, every limit point being approximable by points of the graphs,
    is only reported: it may fail for representable sequences such as
    ``gr = {(0, 0)}``.
    """
    if len(graphs) != len(witnesses) or not graphs:
        raise ValueError("need one witness per graph")
    W = np.asarray(witnesses, dtype=float)
    on = all(g.contains(w, z, tol) for g, (w, z) in zip(graphs, W))
    d = np.hypot(W[:, 0] - witness_limit[0], W[:, 1] - witness_limit[1])
    converge = bool(d[-1] <= max(tol, 0.25 * d[0]) and np.all(np.diff(d) <= 1e-12))
    member = limit.contains(witness_limit[0], witness_limit[1], tol)
    pts = limit.sample(n_per_piece=41, tail_length=sample_box)
    resid = float(np.max(graphs[-1].distance(pts[:, 0], pts[:, 1])))
    first = float(np.max(graphs[0].distance(pts[:, 0], pts[:, 1])))
    liminf = resid <= max(1e-6, 0.25 * first) if first > 0 else resid <= 1e-6
    notes = []
    if not liminf:
        notes.append(f"lower-limit inclusion fails: limit points stay {resid:.3g} away from the graphs")
    return GraphLimitDiag(witnesses_on_graphs=bool(on), witness_distances=d, witnesses_converge=converge,
                          limit_membership=bool(member), liminf_inclusion=bool(liminf),
                          liminf_residual=resid, notes=notes)


# -- Gamma-limit estimation ---------------------------------------------------------------


@dataclass
class LimitEstimate:
    v_grid: np.ndarray
    vstar_grid: np.ndarray
    values: np.ndarray
    ns: np.ndarray
    weighted: dict
    bound_violations: list
    convex_inputs: bool

    @property
    def gap(self) -> np.ndarray:
        V, S = np.meshgrid(self.v_grid, self.vstar_grid, indexing="ij")
        return self.values - V * S

    @property
    def equi_bounded(self) -> bool:
        return not self.bound_violations


def _neville_at_zero(h: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Value at ``h = 0`` of the interpolating polynomial through ``(h_j, F_j)``."""
    P = [F[j].copy() for j in range(len(h))]
    for m in range(1, len(h)):
        for j in range(len(h) - m):
            P[j] = (h[j + m] * P[j] - h[j] * P[j + 1]) / (h[j + m] - h[j])
    return P[0]


def _lsc_grid(F: np.ndarray) -> np.ndarray:
    """Lower isolated ``+inf`` samples to the largest of their finite neighbours."""
    out = F.copy()
    pad = np.pad(F, 1, constant_values=np.nan)
    nbrs = np.stack([pad[1 + di:1 + di + F.shape[0], 1 + dj:1 + dj + F.shape[1]]
                     for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)])
    finite_nb = np.all(np.isfinite(nbrs) | np.isnan(nbrs), axis=0)
    isolated = np.isposinf(F) & finite_nb
    out[isolated] = np.nanmax(nbrs, axis=0)[isolated]
    return out


def _default_path(T: float, n: int = 201):
    t = np.linspace(0.0, T, n)
    return t, np.cos(2 * np.pi * t / T), np.sin(2 * np.pi * t / T)


def estimate_limit_integrand(phi_n: Sequence[Representative], v_grid=None, vstar_grid=None, ns=None,
                             xi: dict | None = None, bounds: tuple | None = None, T: float = 1.0,
                             contraction: float = 0.9) -> LimitEstimate:
    """Pointwise limit of scalar representatives on a sample box, with weighted functionals.

    The members, ordered by increasing ``n``, are evaluated on the box and
    extrapolated to ``1/n -> 0`` by polynomial (Neville) extrapolation; for
    pointwise convergent, locally uniformly convergent, equi-coercive
    families this limit is the Gamma-limit. Families whose successive
    differences do not contract are rejected with
    :class:`NonConvergentFamilyError`. Isolated ``+inf`` samples are lowered
    by a grid lower-semicontinuous envelope pass.

    ``weighted`` holds ``int Psi(w(t)) xi(t) (T - t) dt`` along the loop
    ``w(t) = (cos 2 pi t/T, sin 2 pi t/T)`` for each member and the limit,
    for ``xi`` in ``{1, t, (T - t)^2}`` unless given. ``bounds = (C1, C2, C3)``
    flags samples violating ``C1 |w|^2 <= phi_n(w) <= C2 |w|^2 + C3``.
    """
    if len(phi_n) == 0:
        raise ValueError("need at least one representative")
    if any(f.carrier != "scalar" for f in phi_n):
        raise ValueError("estimate_limit_integrand works on scalar representatives")
    vg = np.linspace(-3.0, 3.0, 101) if v_grid is None else np.asarray(v_grid, dtype=float)
    sg = vg if vstar_grid is None else np.asarray(vstar_grid, dtype=float)
    ns = np.arange(1, len(phi_n) + 1, dtype=float) if ns is None else np.asarray(ns, dtype=float)
    if ns.size != len(phi_n) or np.any(np.diff(ns) <= 0):
        raise ValueError("ns must be increasing and match phi_n")
    V, S = np.meshgrid(vg, sg, indexing="ij")
    F = np.stack([np.asarray(f(V, S), dtype=float) * np.ones_like(V) for f in phi_n])

    violations = []
    if bounds is not None:
        c1, c2, c3 = bounds
        r2 = V * V + S * S
        for n, Fn in zip(ns, F):
            bad = int(np.sum((Fn < c1 * r2 - 1e-12) | (Fn > c2 * r2 + c3 + 1e-12)))
            if bad:
                violations.append((int(n), bad))

    finite = np.all(np.isfinite(F), axis=0)
    if np.all(F == F[-1]):
        limit = F[-1].copy()
    elif len(phi_n) == 1:
        limit = F[0].copy()
    else:
        D = np.abs(np.diff(np.where(finite, F, 0.0), axis=0))
        size = np.max(D, axis=(1, 2))
        if size.size >= 2 and size[0] > 0:
            ratios = size[1:] / np.maximum(size[:-1], 1e-300)
            ratios = ratios[size[:-1] > 1e-13 * (1.0 + np.max(np.abs(np.where(finite, F, 0.0))))]
            if ratios.size and float(np.exp(np.mean(np.log(np.maximum(ratios, 1e-300))))) > contraction:
                raise NonConvergentFamilyError(
                    "successive differences do not contract; oscillatory (homogenisation-type) "
                    "families have no certified pointwise Gamma-limit here")
        limit = np.where(finite, _neville_at_zero(1.0 / ns, np.where(finite, F, 0.0)), F[-1])
    limit = _lsc_grid(limit)

    xi = {"1": lambda t: np.ones_like(t), "t": lambda t: t, "(T-t)^2": lambda t: (T - t) ** 2} \
        if xi is None else xi
    t, pv, ps = _default_path(T)
    mu = T - t
    weighted = {}
    for name, fn in xi.items():
        vals = [float(trapezoid(np.asarray(f(pv, ps)) * fn(t) * mu, t)) for f in phi_n]
        weighted[name] = {"members": vals,
                          "limit": float(_neville_at_zero(1.0 / ns, np.asarray(vals)[:, None])[0])
                          if len(vals) > 1 and len(set(vals)) > 1 else vals[-1]}
    return LimitEstimate(v_grid=vg, vstar_grid=sg, values=limit, ns=ns, weighted=weighted,
                         bound_violations=violations, convex_inputs=all(f.convex for f in phi_n))
