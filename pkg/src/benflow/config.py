"""Schema-versioned TOML run configurations.

Every config carries ``schema_version = 1`` and a ``command``. Sections:

``[grid]`` ``M``; ``[time]`` ``T``, ``K``, ``weight``; ``[model]`` ``kind``
(heat, diffusion, convection, stefan), ``law``, ``u0``, ``h``, ``velocity``,
``latent``, ``eps``; ``[solver]`` ``tol_null``, ``tol_grad``, ``max_iter``,
``max_outer``, ``init``; plus one section named after the command for
``conjugate``, ``represent``, ``stability`` and ``gamma``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from . import convex as cx
from .flow import WEIGHTS, SolveOptions
from .graphs import MonotoneGraph, identity_graph, linear_graph, point_graph, sign_graph
from .models import (ConvectionField, DiffusionLaw, build_diffusion_problem, build_stefan_problem,
                     kirchhoff_transform, stefan_graph)
from .spaces import DiscreteSpace

__all__ = ["ConfigError", "RunConfig", "load_config", "COMMANDS", "SCHEMA_VERSION", "M_MAX", "K_MAX"]

SCHEMA_VERSION = 1
COMMANDS = ("conjugate", "represent", "solve", "stability", "gamma")
M_MAX = 4097
K_MAX = 8192


class ConfigError(ValueError):
    """Invalid configuration (exit code 2)."""


@dataclass
class RunConfig:
    command: str
    raw: dict
    seed: int = 0
    source: str = ""
    sections: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        sec = self.raw.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"[{name}] must be a table")
        return sec

    # -- common blocks -----------------------------------------------------

    def space(self) -> DiscreteSpace:
        M = _int(self.section("grid").get("M", 31), "grid.M", 1, M_MAX)
        return DiscreteSpace(M)

    def time(self) -> tuple[float, int, str]:
        sec = self.section("time")
        T = _float(sec.get("T", 0.1), "time.T")
        if not T > 0:
            raise ConfigError("time.T must be > 0")
        K = _int(sec.get("K", 32), "time.K", 1, K_MAX)
        weight = sec.get("weight", "lebesgue")
        if weight not in WEIGHTS:
            raise ConfigError(f"time.weight must be one of {WEIGHTS}, got {weight!r}")
        return T, K, weight

    def solver(self) -> SolveOptions:
        sec = self.section("solver")
        known = {"tol_null", "tol_grad", "max_iter", "max_outer", "init", "noise"}
        _no_unknown(sec, known, "solver")
        tol = sec.get("tol_null")
        return SolveOptions(tol_null=None if tol is None else _float(tol, "solver.tol_null"),
                            tol_grad=_float(sec.get("tol_grad", 0.0), "solver.tol_grad"),
                            max_iter=_int(sec.get("max_iter", 5000), "solver.max_iter", 1, 10**7),
                            max_outer=_int(sec.get("max_outer", 50), "solver.max_outer", 1, 10**5))

    def problem(self):
        sp = self.space()
        T, K, weight = self.time()
        sec = self.section("model")
        kind = sec.get("kind", "heat")
        u0 = grid_function(sec.get("u0", {"shape": "sine"}), "model.u0")
        h = sec.get("h", 0.0)
        h = grid_function(h, "model.h") if isinstance(h, dict) else _float(h, "model.h")
        try:
            if kind in ("heat", "diffusion", "convection"):
                law = make_law(sec.get("law", {"kind": "constant", "a": 1.0}))
                conv = None
                if kind == "convection" or "velocity" in sec:
                    conv = ConvectionField.from_function(sp, velocity(sec.get("velocity", {})))
                return build_diffusion_problem(sp, law, u0, h, T, K, weight, convection=conv, label=kind)
            if kind == "stefan":
                return build_stefan_problem(sp, u0, h, T, K, weight,
                                            latent=_float(sec.get("latent", 1.0), "model.latent"),
                                            eps=_float(sec.get("eps", 1e-3), "model.eps"))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"model: {exc}") from exc
        raise ConfigError(f"model.kind must be heat, diffusion, convection or stefan, got {kind!r}")


def _no_unknown(sec: dict, known: set, name: str):
    extra = set(sec) - known
    if extra:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(extra))}")


def _float(x, name: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{name} must be a number, got {x!r}")
    return float(x)


def _int(x, name: str, lo: int, hi: int) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ConfigError(f"{name} must be an integer, got {x!r}")
    if not lo <= x <= hi:
        raise ConfigError(f"{name} = {x} outside the allowed range [{lo}, {hi}]")
    return x


def grid_function(spec, name: str):
    """Named profiles: ``sine`` (amplitude, mode), ``constant`` (value), ``bump`` (amplitude, center, width)."""
    if not isinstance(spec, dict):
        raise ConfigError(f"{name} must be a table")
    shape = spec.get("shape", "sine")
    amp = _float(spec.get("amplitude", 1.0), f"{name}.amplitude")
    if shape == "sine":
        mode = _int(spec.get("mode", 1), f"{name}.mode", 1, 10**6)
        return lambda x: amp * np.sin(mode * np.pi * x)
    if shape == "constant":
        val = _float(spec.get("value", amp), f"{name}.value")
        return lambda x: val + 0.0 * x
    if shape == "bump":
        c = _float(spec.get("center", 0.5), f"{name}.center")
        w = _float(spec.get("width", 0.2), f"{name}.width")
        return lambda x: amp * np.maximum(0.0, 1.0 - ((x - c) / w) ** 2)
    raise ConfigError(f"{name}.shape must be sine, constant or bump, got {shape!r}")


def velocity(spec: dict):
    """``b(x) = value + slope (x - center)``."""
    val = _float(spec.get("value", 0.0), "model.velocity.value")
    slope = _float(spec.get("slope", -1.0), "model.velocity.slope")
    center = _float(spec.get("center", 0.5), "model.velocity.center")
    return lambda x: val + slope * (x - center)


def make_law(spec) -> DiffusionLaw:
    if not isinstance(spec, dict):
        raise ConfigError("law must be a table")
    kind = spec.get("kind", "constant")
    try:
        if kind == "grid":
            return DiffusionLaw("grid", s_grid=tuple(spec["s"]), k_grid=tuple(spec["k"]))
        rng = spec.get("range")
        return DiffusionLaw(kind, a=_float(spec.get("a", 1.0), "law.a"),
                            range=None if rng is None else (float(rng[0]), float(rng[1])))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"law: {exc}") from exc


def make_convex(spec) -> cx.ScalarConvex:
    if not isinstance(spec, dict):
        raise ConfigError("phi must be a table")
    kind = spec.get("kind")
    try:
        if kind == "quadratic":
            return cx.Quadratic(_float(spec.get("a", 1.0), "phi.a"))
        if kind == "power":
            return cx.PowerP(_float(spec.get("p", 2.0), "phi.p"))
        if kind == "abs":
            return cx.Abs(_float(spec.get("scale", 1.0), "phi.scale"))
        if kind == "indicator":
            return cx.IndicatorInterval(_float(spec.get("lo", -1.0), "phi.lo"), _float(spec.get("hi", 1.0), "phi.hi"))
        if kind == "piecewise":
            return cx.PiecewiseLinear(spec["knots"], spec["values"], spec.get("left_slope"), spec.get("right_slope"))
        if kind == "grid":
            return cx.GridSampled(spec["points"], [float("inf") if v == "inf" else v for v in spec["values"]])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"phi: {exc}") from exc
    raise ConfigError(f"phi.kind must be quadratic, power, abs, indicator, piecewise or grid, got {kind!r}")


def make_graph(spec) -> MonotoneGraph:
    if not isinstance(spec, dict):
        raise ConfigError("graph must be a table")
    kind = spec.get("kind")
    try:
        if kind == "identity":
            return identity_graph()
        if kind == "linear":
            return linear_graph(_float(spec.get("slope", 1.0), "graph.slope"))
        if kind == "sign":
            return sign_graph()
        if kind in ("plateau", "stefan"):
            return stefan_graph(_float(spec.get("width", 1.0), "graph.width"))
        if kind == "kirchhoff":
            return kirchhoff_transform(make_law(spec.get("law", {"kind": "affine", "a": 1.0})))
        if kind == "point":
            return point_graph(_float(spec.get("w", 0.0), "graph.w"), _float(spec.get("z", 0.0), "graph.z"))
    except ValueError as exc:
        raise ConfigError(f"graph: {exc}") from exc
    raise ConfigError(f"graph.kind must be identity, linear, sign, plateau, kirchhoff or point, got {kind!r}")


def sample_grid(spec, default=(-3.0, 3.0, 101)) -> np.ndarray:
    spec = spec or {}
    lo = _float(spec.get("lo", default[0]), "grid.lo")
    hi = _float(spec.get("hi", default[1]), "grid.hi")
    n = _int(spec.get("n", default[2]), "grid.n", 2, 100001)
    if not lo < hi:
        raise ConfigError("sample grid needs lo < hi")
    return np.linspace(lo, hi, n)


def load_config(path, seed: int | None = None) -> RunConfig:
    """Parse and validate a config file; raises ``ConfigError`` or ``OSError``."""
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            raw = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: not valid TOML: {exc}") from exc
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: schema_version must be {SCHEMA_VERSION}, got {version!r}")
    command = raw.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"{path}: unknown command {command!r}; expected one of {COMMANDS}")
    s = raw.get("seed", 0) if seed is None else seed
    if isinstance(s, bool) or not isinstance(s, int) or s < 0:
        raise ConfigError("seed must be a nonnegative integer")
    return RunConfig(command=command, raw=raw, seed=s, source=str(path))
