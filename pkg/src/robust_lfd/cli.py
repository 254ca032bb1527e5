"""Command-line surface: solve scenario configs and emit CSV/JSON artifacts.

Outputs per run: ``lfd0.csv``/``lfd1.csv`` (columns x, density), ``lrf.csv``
(columns x, robust_lr, nominal_lr), ``solution.json`` (thresholds, band
types, u*, residuals), and ``verify.json`` when verification is requested.
Multi-variant scenarios write per-variant subdirectories plus one
aggregated ``solution.json``. All numeric output uses shortest round-trip
decimals, so a rerun with the same config and seed is byte-identical.

Exit codes: 0 success, 2 config error, 3 infeasible/overlapping classes,
4 solver non-convergence; failures print a machine-readable error JSON.
"""
from __future__ import annotations

import functools
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .errors import (
    ClassOverlapError,
    ConfigError,
    ConvergenceError,
    DegenerateDensityError,
    DimensionMismatchError,
    DomainError,
    InfeasibleClassError,
    ParameterError,
)
from .presets import (
    PRESET_NAMES,
    ScenarioResult,
    VariantResult,
    preset_catalogue,
    preset_config,
    run_config,
)
from .samplers import band_members, contamination_members, tv_members
from .verify import TestConfig, run_verification, tabulated_lrf

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_CONVERGENCE = 4


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _dump_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_to_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: str, columns) -> None:
    lines = [header]
    for row in zip(*columns):
        lines.append(",".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _fail(code: int, kind: str, message: str, path: str | None = None) -> None:
    payload = {"error": {"exit_code": code, "type": kind, "message": message}}
    if path is not None:
        payload["error"]["path"] = path
    click.echo(json.dumps(payload, indent=2, sort_keys=True))
    sys.exit(code)


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(EXIT_CONFIG, "config", exc.detail, path=exc.path)
        except (
            ParameterError,
            DimensionMismatchError,
            DomainError,
            DegenerateDensityError,
        ) as exc:
            _fail(EXIT_CONFIG, "config", str(exc))
        except ClassOverlapError as exc:
            _fail(EXIT_INFEASIBLE, "class-overlap", str(exc))
        except InfeasibleClassError as exc:
            _fail(EXIT_INFEASIBLE, "infeasible", str(exc))
        except ConvergenceError as exc:
            _fail(EXIT_CONVERGENCE, "convergence", str(exc))

    return wrapper


def _load_config(config_path: str) -> dict:
    path = Path(config_path)
    if not path.is_file():
        raise ConfigError("config_path", f"no such file: {config_path}")
    try:
        config = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config_path", f"invalid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("", "config root must be a JSON object")
    return config


def _apply_seed_env(config: dict) -> None:
    raw = os.environ.get("ROBUST_LFD_SEED")
    if raw is None:
        return
    try:
        config["seed"] = int(raw)
    except ValueError:
        raise ConfigError("env.ROBUST_LFD_SEED", f"not an integer: {raw!r}") from None


def _members_for(result: ScenarioResult, variant: VariantResult, count: int, seed: int):
    if result.kind == "tv":
        return tv_members(variant.spec, count, seed)
    if result.kind in ("lower_contamination", "upper_contamination"):
        return contamination_members(variant.spec, count, seed)
    if result.kind == "band":
        return band_members(variant.spec, count, seed)
    return None


def _verify_payload(result: ScenarioResult, config: dict) -> dict:
    opts = config.get("verify", {})
    cfg = TestConfig(
        threshold=float(opts.get("threshold", 0.0)),
        prior0=float(opts.get("prior0", 0.5)),
        sample_size=int(opts.get("sample_size", 1)),
        trials=int(opts.get("trials", 100_000)),
        seed=result.seed,
    )
    reports = []
    for variant in result.variants:
        members = _members_for(result, variant, int(opts.get("members", 50)), result.seed)
        lrf = tabulated_lrf(result.grid, variant.lrf_values)
        report = run_verification(variant.lfd0, variant.lfd1, lrf, cfg, members=members)
        reports.append(
            {
                "params": variant.params,
                "ordering_pass": report.ordering_pass,
                "ordering_margin": report.ordering_margin,
                "separation": list(report.separation),
                "separation_ok": report.separation_ok,
                "exponents": list(report.exponents),
                "mc": {
                    "p_false_alarm": report.mc_errors.p_false_alarm,
                    "p_miss": report.mc_errors.p_miss,
                    "p_error": report.mc_errors.p_error,
                    "se_false_alarm": report.mc_errors.se_false_alarm,
                    "se_miss": report.mc_errors.se_miss,
                },
                "fdiv": {
                    kind: {"solved": pair[0], "sampled_min": pair[1]}
                    for kind, pair in report.fdiv_table.items()
                },
            }
        )
    return {"schema_version": config["schema_version"], "results": reports}


def _execute(config: dict, out_dir: Path, force_verify: bool) -> None:
    _apply_seed_env(config)
    result = run_config(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    multi = len(result.variants) > 1
    solution = {
        "schema_version": config["schema_version"],
        "kind": result.kind,
        "seed": result.seed,
        "grid": config["grid"],
        "results": [],
    }
    x = result.grid.x
    for i, variant in enumerate(result.variants):
        vdir = out_dir / f"variant_{i}" if multi else out_dir
        vdir.mkdir(parents=True, exist_ok=True)
        _write_csv(vdir / "lfd0.csv", "x,density", (x, variant.lfd0.values))
        _write_csv(vdir / "lfd1.csv", "x,density", (x, variant.lfd1.values))
        _write_csv(
            vdir / "lrf.csv",
            "x,robust_lr,nominal_lr",
            (x, variant.lrf_values, variant.nominal_lr),
        )
        solution["results"].append(dict(variant.solution))
    _dump_json(out_dir / "solution.json", solution)
    if force_verify or config.get("verify", {}).get("enabled", False):
        _dump_json(out_dir / "verify.json", _verify_payload(result, config))


@click.group()
def main() -> None:
    """Least favorable densities for robust binary hypothesis testing."""


@main.command("run")
@click.argument("config_path")
@click.option("--out", "out_dir", default=".", show_default=True, help="Output directory.")
@_guarded
def run_cmd(config_path: str, out_dir: str) -> None:
    """Solve the scenario in CONFIG_PATH and write CSV/JSON artifacts."""
    config = _load_config(config_path)
    _execute(config, Path(out_dir), force_verify=False)


@main.command("preset")
@click.argument("name")
@click.option("--out", "out_dir", default=None, help="Output directory [default: ./NAME].")
@_guarded
def preset_cmd(name: str, out_dir: str | None) -> None:
    """Emit a named preset's config and its solved artifacts."""
    config = preset_config(name)
    target = Path(out_dir) if out_dir is not None else Path(name)
    target.mkdir(parents=True, exist_ok=True)
    _dump_json(target / "config.json", config)
    _execute(config, target, force_verify=False)


@main.command("list-presets")
@_guarded
def list_presets_cmd() -> None:
    """Print the preset catalogue, one per line."""
    for name, note in preset_catalogue().items():
        click.echo(f"{name}\t{note}")


@main.command("verify")
@click.argument("config_path")
@click.option("--out", "out_dir", default=".", show_default=True, help="Output directory.")
@_guarded
def verify_cmd(config_path: str, out_dir: str) -> None:
    """Solve CONFIG_PATH and additionally write a verification report."""
    config = _load_config(config_path)
    _execute(config, Path(out_dir), force_verify=True)


if __name__ == "__main__":
    main()
