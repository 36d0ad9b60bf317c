"""Command-line entry point: ``benflow --config run.toml --out results/``.

Exit codes: 0 success, 2 configuration error (including an unknown
command), 3 non-converged solve, 4 output not writable.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import convex as cx
from .config import ConfigError, RunConfig, load_config, make_convex, make_graph, make_law, sample_grid
from .flow import Trajectory, minimize_ben
from .models import stefan_potential
from .reports import emit_report, write_csv
from .representation import (CoercivityError, ParamMonotoneFamily, Representative,
                             certify_representative, fb_family, fenchel_representative,
                             fitzpatrick_representative, semimono_representative)
from .stability import (DEFAULT_INDICES, NonConvergentFamilyError, constant_sequence,
                        data_perturbation_sequence, estimate_limit_integrand, quadratic_law_sequence,
                        run_stability_experiment)

__all__ = ["main", "run", "EXIT_OK", "EXIT_CONFIG", "EXIT_NONCONVERGED", "EXIT_IO"]

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("benflow")


class _NonConverged(Exception):
    pass


def _cmd_conjugate(cfg: RunConfig, out: Path, args) -> dict:
    sec = cfg.section("conjugate")
    phi = make_convex(sec.get("phi", {"kind": "indicator", "lo": -1.0, "hi": 1.0}))
    s = sample_grid(sec.get("grid"), (-3.0, 3.0, 61))
    star = phi.conjugate() if not isinstance(phi, cx.GridSampled) else phi.conjugate(s)
    vals = np.asarray(star(s), dtype=float) * np.ones_like(s)
    write_csv(out / "conjugate.csv", ["s", "phi_star"], zip(s, vals))
    bic = np.asarray(star.conjugate()(s), dtype=float) * np.ones_like(s)
    ref = np.asarray(phi(s), dtype=float) * np.ones_like(s)
    both = np.isfinite(bic) & np.isfinite(ref)
    agree = bool(np.array_equal(np.isfinite(bic), np.isfinite(ref)))
    err = float(np.max(np.abs(bic[both] - ref[both]))) if np.any(both) else 0.0
    return {"command": "conjugate", "phi": repr(phi), "conjugate": repr(star), "samples": int(s.size),
            "biconjugation_max_error": err, "biconjugation_domain_agrees": agree}


def _scalar_rep(spec: dict) -> Representative:
    kind = spec.get("kind", "fitzpatrick")
    if kind == "fitzpatrick":
        return fitzpatrick_representative(make_graph(spec.get("graph", {"kind": "identity"})))
    if kind == "fenchel":
        return fenchel_representative(make_convex(spec.get("phi", {"kind": "quadratic"})))
    if kind == "fb_family":
        try:
            return fb_family(float(spec.get("a", 1.0)), float(spec.get("b", 0.5)))
        except ValueError as exc:
            raise ConfigError(f"represent: {exc}") from exc
    if kind == "semimono":
        law = make_law(spec.get("law", {"kind": "quadratic", "a": 1.0}))
        return semimono_representative(ParamMonotoneFamily.linear(law.k, law.kind))
    raise ConfigError(f"represent.kind must be fitzpatrick, fenchel, fb_family or semimono, got {kind!r}")


def _cmd_represent(cfg: RunConfig, out: Path, args) -> dict:
    sec = cfg.section("represent")
    f = _scalar_rep(sec)
    grid = sample_grid(sec.get("grid"))
    target_spec = sec.get("graph", {"kind": "identity"})
    if sec.get("kind") == "semimono":
        law = make_law(sec.get("law", {"kind": "quadratic", "a": 1.0}))
        target = ParamMonotoneFamily.linear(law.k, law.kind)
    else:
        target = make_graph(target_spec)
    compare = _scalar_rep(sec["compare"]) if "compare" in sec else None
    rep = certify_representative(f, target, grid, float(sec.get("tol", 1e-9)), compare=compare)
    V, S = np.meshgrid(grid, grid, indexing="ij")
    vals = np.asarray(f(V, S), dtype=float)
    gaps = np.asarray(f.gap(V, S), dtype=float)
    write_csv(out / "representative.csv", ["v", "vstar", "f", "gap"],
              zip(V.ravel(), S.ravel(), vals.ravel(), gaps.ravel()))
    rng = np.random.default_rng(cfg.seed)
    pts = rng.uniform(grid[0], grid[-1], size=(256, 2))
    rgap = np.asarray(f.gap(pts[:, 0], pts[:, 1]), dtype=float)
    return {"command": "represent", "kind": f.kind, "label": f.label, "seed": cfg.seed,
            "min_gap": rep.min_gap, "max_gap_on_graph": rep.max_gap_on_graph,
            "min_gap_off_graph": rep.min_gap_off_graph,
            "minimality_violation": rep.minimality_violation, "passed": rep.passed,
            "failures": rep.failures, "random_min_gap": float(np.min(rgap))}


def _cmd_solve(cfg: RunConfig, out: Path, args) -> dict:
    problem = cfg.problem()
    opts = cfg.solver()
    init_kind = cfg.section("solver").get("init", "constant")
    init = Trajectory.constant(problem.u0, problem.K, problem.T)
    if init_kind == "random":
        rng = np.random.default_rng(cfg.seed)
        noise = float(cfg.section("solver").get("noise", 0.1))
        steps = np.array(init.steps)
        steps[1:] += noise * rng.standard_normal(steps[1:].shape)
        init = Trajectory(steps, problem.T)
    elif init_kind != "constant":
        raise ConfigError(f"solver.init must be constant or random, got {init_kind!r}")
    report = minimize_ben(problem, init, opts)
    sp = problem.space
    traj = report.minimizer
    if cfg.section("model").get("kind") == "stefan":
        theta = stefan_potential(float(cfg.section("model").get("latent", 1.0)),
                                 float(cfg.section("model").get("eps", 1e-3)))
        rows = ((t, x, u, float(theta.derivative(u))) for t, x, u in traj.to_rows(sp))
        write_csv(out / "trajectory.csv", ["t", "x", "u", "theta"], rows)
    else:
        write_csv(out / "trajectory.csv", ["t", "x", "u"], traj.to_rows(sp))
    data = report.to_dict(timing=True)
    if not args.timing:
        data["wall_time_ms"] = None
    if not report.converged:
        emit_report(data, out / "report.json")
        raise _NonConverged(report.message)
    return data


def _cmd_stability(cfg: RunConfig, out: Path, args) -> dict:
    sec = cfg.section("stability")
    sp = cfg.space()
    T, K, weight = cfg.time()
    indices = tuple(sec.get("indices", DEFAULT_INDICES))
    kind = sec.get("sequence", "quadratic")
    try:
        if kind == "quadratic":
            seq = quadratic_law_sequence(sp, indices, T, K, weight=weight)
        elif kind == "constant":
            seq = constant_sequence(sp, make_law(sec.get("law", {"kind": "quadratic", "a": 1.0})),
                                    indices, T, K, weight=weight)
        elif kind == "data":
            seq = data_perturbation_sequence(sp, make_law(sec.get("law", {"kind": "constant", "a": 1.0})),
                                             indices, T, K, weight)
        else:
            raise ConfigError(f"stability.sequence must be quadratic, constant or data, got {kind!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"stability: {exc}") from exc
    rep = run_stability_experiment(seq, cfg.solver(), jobs=args.jobs)
    write_csv(out / "stability.csv", ["n", "error", "ben_value", "pairing_gap"], rep.csv_rows())
    data = rep.to_dict()
    data["command"] = "stability"
    data["sequence"] = kind
    data["passed"] = rep.passed
    if rep.aborted:
        emit_report(data, out / "report.json")
        raise _NonConverged(rep.message)
    return data


def _cmd_gamma(cfg: RunConfig, out: Path, args) -> dict:
    sec = cfg.section("gamma")
    ns = [int(n) for n in sec.get("indices", DEFAULT_INDICES)]
    family = sec.get("family", "fb")
    grid = sample_grid(sec.get("grid"))
    if family == "fb":
        reps = [fb_family(1.0, 0.5 + 1.0 / n) for n in ns]
        declared = fb_family(1.0, 0.5)
    elif family == "quadratic":
        reps = [fenchel_representative(cx.Quadratic(1.0 + 1.0 / n)) for n in ns]
        declared = fenchel_representative(cx.Quadratic(1.0))
    elif family == "constant":
        reps = [fb_family(1.0, 0.5) for _ in ns]
        declared = reps[0]
    else:
        raise ConfigError(f"gamma.family must be fb, quadratic or constant, got {family!r}")
    try:
        est = estimate_limit_integrand(reps, grid, grid, ns=ns)
    except NonConvergentFamilyError as exc:
        raise ConfigError(f"gamma: {exc}") from exc
    V, S = np.meshgrid(grid, grid, indexing="ij")
    write_csv(out / "limit.csv", ["v", "vstar", "limit", "gap"],
              zip(V.ravel(), S.ravel(), est.values.ravel(), est.gap.ravel()))
    dev = float(np.max(np.abs(est.values - np.asarray(declared(V, S)))))
    return {"command": "gamma", "family": family, "indices": ns, "max_deviation_from_declared": dev,
            "min_gap": float(np.min(est.gap)), "weighted": est.weighted}


COMMAND_TABLE = {
    "conjugate": _cmd_conjugate,
    "represent": _cmd_represent,
    "solve": _cmd_solve,
    "stability": _cmd_stability,
    "gamma": _cmd_gamma,
}


def run(cfg: RunConfig, out, args=None) -> int:
    """Execute a parsed config, writing ``report.json`` and CSV tables to ``out``."""
    args = args or argparse.Namespace(jobs=1, timing=False)
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory {out} is not writable: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        data = COMMAND_TABLE[cfg.command](cfg, out, args)
        emit_report(data, out / "report.json")
    except (ConfigError, CoercivityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NonConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except OSError as exc:
        print(f"error: cannot write results: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="benflow", description=__doc__.splitlines()[0])
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="concurrent solves for the stability command")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--verbose", action="store_true", help="log solver progress")
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock time in report.json (breaks byte-stable output)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, args.out, args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
