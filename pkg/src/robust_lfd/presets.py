"""Scenario configs: validation, preset catalogue, and solver dispatch.

A scenario is a plain JSON-serializable dict with a ``schema_version``, a
``kind`` selecting the uncertainty class, grid and nominal parameters, and
one or more ``variants`` (radius combinations solved in one run). The
presets reproduce the package's reference studies as data files.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .band_general import BandSolution, BandSpec, band_overlap_diagnostic, solve_band
from .band_solver import ContaminationSpec, solve_contamination
from .convex_solver import (
    ConvexLFDResult,
    minimize_over_u,
    moment_constraint,
    ppoint_constraint,
)
from .divergence import likelihood_ratio
from .errors import ConfigError
from .grid import Grid, GridDensity, gaussian_density
from .tv_solver import TVSpec, solve_tv

SCHEMA_VERSION = 1

KINDS = ("tv", "lower_contamination", "upper_contamination", "band", "moment", "ppoint")

PRESET_NAMES = (
    "tv_fig1",
    "contamination_fig1",
    "band_fig9",
    "band_fig10",
    "band_fig88",
    "moment_fig19",
    "ppoint_fig21",
)

_WIDE_GRID = {"x_min": -12.0, "x_max": 12.0, "n": 2001}
_DESK_GRID = {"x_min": -6.0, "x_max": 6.0, "n": 201}

_PRESETS: dict[str, dict] = {
    "tv_fig1": {
        "schema_version": SCHEMA_VERSION,
        "kind": "tv",
        "grid": dict(_WIDE_GRID),
        "nominal0": {"mean": -1.0, "variance": 1.0},
        "nominal1": {"mean": 1.0, "variance": 1.0},
        "variants": [
            {"eps0": 0.1, "eps1": 0.1},
            {"eps0": 0.08875, "eps1": 0.08875},
            {"eps0": 0.05, "eps1": 0.15},
        ],
        "seed": 1001,
    },
    "contamination_fig1": {
        "schema_version": SCHEMA_VERSION,
        "kind": "lower_contamination",
        "grid": dict(_WIDE_GRID),
        "nominal0": {"mean": -1.0, "variance": 1.0},
        "nominal1": {"mean": 1.0, "variance": 1.0},
        "variants": [
            {"eps0": 0.1, "eps1": 0.1},
            {"eps0": 0.05, "eps1": 0.15},
        ],
        "seed": 1002,
    },
    "band_fig9": {
        "schema_version": SCHEMA_VERSION,
        "kind": "band",
        "grid": dict(_DESK_GRID),
        "nominal0": {"mean": -1.0, "variance": 4.0},
        "nominal1": {"mean": 1.0, "variance": 4.0},
        "eps_lower": 0.2,
        "variants": [
            {"eps_upper": 0.2},
            {"eps_upper": 0.5},
            {"eps_upper": 1.5},
        ],
        "seed": 1003,
    },
    "band_fig10": {
        "schema_version": SCHEMA_VERSION,
        "kind": "band",
        "grid": dict(_DESK_GRID),
        "nominal0": {"mean": -1.0, "variance": 4.0},
        "nominal1": {"mean": 1.0, "variance": 4.0},
        "eps_lower": 0.2,
        "variants": [
            {"eps_upper": 0.2},
            {"eps_upper": 0.5},
            {"eps_upper": 1.5},
            {"eps_upper": 19.0},
        ],
        "seed": 1004,
    },
    "band_fig88": {
        "schema_version": SCHEMA_VERSION,
        "kind": "band",
        "grid": dict(_DESK_GRID),
        "nominal0": {"mean": -1.0, "variance": 4.0},
        "nominal1": {"mean": 1.0, "variance": 4.0},
        "eps_lower": 0.2,
        "upper_variance": 9.0,
        "variants": [{"eps_upper": 0.5}],
        "seed": 1005,
    },
    "moment_fig19": {
        "schema_version": SCHEMA_VERSION,
        "kind": "moment",
        "grid": dict(_DESK_GRID),
        "constraints0": [
            {"power": 1, "lower": -2.0, "upper": -0.5},
            {"power": 2, "lower": 0.0, "upper": 2.0},
        ],
        "constraints1": [
            {"power": 1, "lower": 0.5, "upper": 2.0},
            {"power": 2, "lower": 2.0, "upper": 4.0},
        ],
        "seed": 1006,
    },
    "ppoint_fig21": {
        "schema_version": SCHEMA_VERSION,
        "kind": "ppoint",
        "grid": dict(_DESK_GRID),
        "sets0": [{"a": -5.0, "b": 3.0, "lower": 0.0, "upper": 0.3}],
        "sets1": [{"a": 0.0, "b": 3.0, "lower": 0.8, "upper": 1.0}],
        "seed": 1007,
    },
}

_PRESET_NOTES = {
    "tv_fig1": "total-variation neighborhoods of N(-1,1)/N(1,1), three radius pairs",
    "contamination_fig1": "lower contamination of N(-1,1)/N(1,1), two radius pairs",
    "band_fig9": "density band around N(-/+1,4), upper scale 0.2/0.5/1.5",
    "band_fig10": "density band around N(-/+1,4) incl. the clipped limit at 19",
    "band_fig88": "degenerate band: upper bounds widened to variance 9",
    "moment_fig19": "first/second moment boxes, optimized over u",
    "ppoint_fig21": "probability-on-set classes, optimized over u",
}


def preset_config(name: str) -> dict:
    if name not in _PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; know {sorted(_PRESETS)}")
    return copy.deepcopy(_PRESETS[name])


def preset_catalogue() -> dict[str, str]:
    return {name: _PRESET_NOTES[name] for name in PRESET_NAMES}


# --- validation -------------------------------------------------------------


def _need(obj: dict, path: str, key: str, types) -> object:
    if key not in obj:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
    value = obj[key]
    if not isinstance(value, types):
        got = type(value).__name__
        raise ConfigError(f"{path}.{key}" if path else key, f"wrong type {got}")
    return value


def _need_number(obj: dict, path: str, key: str) -> float:
    value = _need(obj, path, key, (int, float))
    if isinstance(value, bool):
        raise ConfigError(f"{path}.{key}" if path else key, "wrong type bool")
    return float(value)


def validate_config(config: dict) -> None:
    """Structural validation with field-path errors; no solving."""
    if not isinstance(config, dict):
        raise ConfigError("", "config root must be a JSON object")
    version = _need(config, "", "schema_version", int)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version}")
    kind = _need(config, "", "kind", str)
    if kind not in KINDS:
        raise ConfigError("kind", f"unknown kind {kind!r}; know {list(KINDS)}")
    grid = _need(config, "", "grid", dict)
    _need_number(grid, "grid", "x_min")
    _need_number(grid, "grid", "x_max")
    _need(grid, "grid", "n", int)
    if "seed" in config:
        _need(config, "", "seed", int)

    if kind in ("tv", "lower_contamination", "upper_contamination", "band"):
        for j in (0, 1):
            nom = _need(config, "", f"nominal{j}", dict)
            _need_number(nom, f"nominal{j}", "mean")
            variance = _need_number(nom, f"nominal{j}", "variance")
            if variance <= 0.0:
                raise ConfigError(f"nominal{j}.variance", "must be positive")
        variants = _need(config, "", "variants", list)
        if not variants:
            raise ConfigError("variants", "must not be empty")
        eps_keys = ("eps_upper",) if kind == "band" else ("eps0", "eps1")
        for i, variant in enumerate(variants):
            if not isinstance(variant, dict):
                raise ConfigError(f"variants[{i}]", "must be an object")
            for key in eps_keys:
                _need_number(variant, f"variants[{i}]", key)
        if kind == "band":
            _need_number(config, "", "eps_lower")
            if "upper_variance" in config:
                _need_number(config, "", "upper_variance")
    elif kind == "moment":
        for j in (0, 1):
            rows = _need(config, "", f"constraints{j}", list)
            for i, row in enumerate(rows):
                path = f"constraints{j}[{i}]"
                if not isinstance(row, dict):
                    raise ConfigError(path, "must be an object")
                _need(row, path, "power", int)
                _need_number(row, path, "lower")
                _need_number(row, path, "upper")
    elif kind == "ppoint":
        for j in (0, 1):
            rows = _need(config, "", f"sets{j}", list)
            for i, row in enumerate(rows):
                path = f"sets{j}[{i}]"
                if not isinstance(row, dict):
                    raise ConfigError(path, "must be an object")
                _need_number(row, path, "a")
                _need_number(row, path, "b")
                _need_number(row, path, "lower")
                _need_number(row, path, "upper")

    if "verify" in config:
        v = _need(config, "", "verify", dict)
        for key in ("threshold", "prior0"):
            if key in v:
                _need_number(v, "verify", key)
        for key in ("sample_size", "trials", "members"):
            if key in v:
                _need(v, "verify", key, int)


# --- solving ----------------------------------------------------------------


@dataclass
class VariantResult:
    params: dict
    lfd0: GridDensity
    lfd1: GridDensity
    lrf_values: np.ndarray
    nominal_lr: np.ndarray
    solution: dict
    spec: object


@dataclass
class ScenarioResult:
    kind: str
    grid: Grid
    seed: int
    variants: list[VariantResult] = field(default_factory=list)


def _grid_of(config: dict) -> Grid:
    g = config["grid"]
    try:
        return Grid(float(g["x_min"]), float(g["x_max"]), int(g["n"]))
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from exc


def _intervals_json(sol: BandSolution) -> list[dict]:
    return [
        {
            "rule": region.rule,
            "intervals": [[int(a), int(b)] for a, b in region.intervals],
            "points": region.point_count(),
        }
        for region in sol.lrf_regions
    ]


def run_config(config: dict) -> ScenarioResult:
    """Validate, solve every variant, and return in-memory results."""
    validate_config(config)
    kind = config["kind"]
    grid = _grid_of(config)
    seed = int(config.get("seed", 0))
    result = ScenarioResult(kind=kind, grid=grid, seed=seed)

    if kind in ("tv", "lower_contamination", "upper_contamination", "band"):
        f0 = gaussian_density(grid, config["nominal0"]["mean"], config["nominal0"]["variance"])
        f1 = gaussian_density(grid, config["nominal1"]["mean"], config["nominal1"]["variance"])
        nominal_lr = likelihood_ratio(f1, f0)

    if kind == "tv":
        for variant in config["variants"]:
            spec = TVSpec(f0, f1, variant["eps0"], variant["eps1"])
            sol = solve_tv(spec)
            lrf = np.clip(nominal_lr, sol.t_l, sol.t_u)
            result.variants.append(
                VariantResult(
                    params=dict(variant),
                    lfd0=sol.lfd0,
                    lfd1=sol.lfd1,
                    lrf_values=lrf,
                    nominal_lr=nominal_lr,
                    solution={
                        "eps0": float(variant["eps0"]),
                        "eps1": float(variant["eps1"]),
                        "t_l": sol.t_l,
                        "t_u": sol.t_u,
                        "t_l_times_t_u": sol.t_l * sol.t_u,
                        "beta": sol.beta,
                        "sigma": sol.sigma,
                        "degenerate": sol.degenerate,
                    },
                    spec=spec,
                )
            )
    elif kind in ("lower_contamination", "upper_contamination"):
        direction = kind.split("_")[0]
        for variant in config["variants"]:
            spec = ContaminationSpec(direction, f0, f1, variant["eps0"], variant["eps1"])
            sol = solve_contamination(spec)
            bound_lr = spec.bound1() / np.maximum(spec.bound0(), 1e-300)
            lrf = np.clip(bound_lr, sol.t_l, sol.t_u)
            result.variants.append(
                VariantResult(
                    params=dict(variant),
                    lfd0=sol.lfd0,
                    lfd1=sol.lfd1,
                    lrf_values=lrf,
                    nominal_lr=nominal_lr,
                    solution={
                        "eps0": float(variant["eps0"]),
                        "eps1": float(variant["eps1"]),
                        "direction": direction,
                        "t_l": sol.t_l,
                        "t_u": sol.t_u,
                        "degenerate": sol.degenerate,
                    },
                    spec=spec,
                )
            )
    elif kind == "band":
        eps_lower = float(config["eps_lower"])
        upper_variance = config.get("upper_variance")
        if upper_variance is None:
            f0u, f1u = f0, f1
        else:
            f0u = gaussian_density(grid, config["nominal0"]["mean"], upper_variance)
            f1u = gaussian_density(grid, config["nominal1"]["mean"], upper_variance)
        for variant in config["variants"]:
            eps_upper = float(variant["eps_upper"])
            spec = BandSpec(
                grid,
                (1.0 - eps_lower) * f0.values,
                (1.0 + eps_upper) * f0u.values,
                (1.0 - eps_lower) * f1.values,
                (1.0 + eps_upper) * f1u.values,
            )
            sol = solve_band(spec)
            result.variants.append(
                VariantResult(
                    params=dict(variant),
                    lfd0=sol.lfd0,
                    lfd1=sol.lfd1,
                    lrf_values=sol.lrf(),
                    nominal_lr=nominal_lr,
                    solution={
                        "eps_lower": eps_lower,
                        "eps_upper": eps_upper,
                        "band_type": sol.band_type,
                        "k1": sol.k1,
                        "k2": sol.k2,
                        "overlap_measure": band_overlap_diagnostic(sol),
                        "regions": _intervals_json(sol),
                    },
                    spec=spec,
                )
            )
    else:
        if kind == "moment":
            cons0 = [
                moment_constraint(grid, row["power"], row["lower"], row["upper"], 0)
                for row in config["constraints0"]
            ]
            cons1 = [
                moment_constraint(grid, row["power"], row["lower"], row["upper"], 1)
                for row in config["constraints1"]
            ]
        else:
            cons0 = [
                ppoint_constraint(grid, row["a"], row["b"], row["lower"], row["upper"], 0)
                for row in config["sets0"]
            ]
            cons1 = [
                ppoint_constraint(grid, row["a"], row["b"], row["lower"], row["upper"], 1)
                for row in config["sets1"]
            ]
        res: ConvexLFDResult = minimize_over_u(cons0, cons1, grid)
        lrf = likelihood_ratio(res.lfd1, res.lfd0)
        result.variants.append(
            VariantResult(
                params={},
                lfd0=res.lfd0,
                lfd1=res.lfd1,
                lrf_values=lrf,
                nominal_lr=np.ones(grid.n),
                solution={
                    "u_star": res.u_star,
                    "objective": res.objective,
                    "kkt_residual": res.kkt_residual,
                    "active_constraints": list(res.active_constraints),
                    "profile": [[u, obj] for u, obj in res.profile],
                },
                spec=(cons0, cons1),
            )
        )
    return result
