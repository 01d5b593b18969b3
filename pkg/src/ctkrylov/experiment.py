"""Experiment runner: config parsing, solver sweeps, CSV/manifest output.

A single INI-style config file fully determines an experiment: one
[problem] section, an optional [output] section, and one [solver:NAME]
section per solver run. See README for the grammar. Given (config, seed)
all outputs are byte-identical across runs; per-iteration wall-clock
timings therefore go to the manifest, not the CSV, unless explicitly
requested.
"""

from __future__ import annotations

import configparser
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import ct
from .gk import run_lsqr, run_lsmr
from .gmres import GK_METHODS, GMRES_METHODS, SolverConfig, SolveResult, run_gmres
from .linop import dense_operator, transpose_of

CSV_COLUMNS = ("k", "lambda", "data_residual", "ba_residual", "proj_residual",
               "sol_norm", "rre", "ssim", "elapsed_s")
OUTPUT_ENV_VAR = "CTKRYLOV_OUT"


class ConfigParseError(ValueError):
    """Config file could not be parsed; message carries section/field context."""


@dataclass
class ProblemSpec:
    kind: str = "ct"  # ct | dense
    name: str = "tp2"
    nx: int | None = None
    angles: int | None = None
    det_count: int | None = None
    noise_level: float | None = None
    matched: bool = False
    seed: int = 0
    rows: int = 10  # dense kind only
    cols: int = 10


@dataclass
class ExperimentConfig:
    problem: ProblemSpec
    solvers: list[SolverConfig]
    track_metrics: bool = True
    image_export_stride: int = 0
    out_dir: Path = field(default_factory=lambda: Path("."))
    include_timings: bool = False


def _get(section, key, conv, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigParseError(f"[{section.name}] is missing required field '{key}'")
        return default
    raw = section[key]
    try:
        if conv is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return conv(raw)
    except ValueError as exc:
        raise ConfigParseError(f"[{section.name}] field '{key}': {exc}") from exc


def parse_config(path: str | Path) -> ExperimentConfig:
    """Parse an experiment config file; raises ConfigParseError on problems."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigParseError(f"cannot read config file {path}")
    if "problem" not in parser:
        raise ConfigParseError("config must contain a [problem] section")
    ps = parser["problem"]
    problem = ProblemSpec(
        kind=_get(ps, "kind", str, "ct"),
        name=_get(ps, "name", str, "custom" if "nx" in ps else "tp2"),
        nx=_get(ps, "nx", int),
        angles=_get(ps, "angles", int),
        det_count=_get(ps, "det_count", int),
        noise_level=_get(ps, "noise_level", float),
        matched=_get(ps, "matched", bool, False),
        seed=_get(ps, "seed", int, 0),
        rows=_get(ps, "rows", int, 10),
        cols=_get(ps, "cols", int, 10),
    )
    if problem.kind not in ("ct", "dense"):
        raise ConfigParseError(f"[problem] kind must be 'ct' or 'dense', got {problem.kind!r}")

    track_metrics = True
    stride = 0
    if "output" in parser:
        track_metrics = _get(parser["output"], "track_metrics", bool, True)
        stride = _get(parser["output"], "image_export_stride", int, 0)

    solvers = []
    for section_name in parser.sections():
        if not section_name.startswith("solver:"):
            continue
        s = parser[section_name]
        cfg = SolverConfig(
            method=_get(s, "method", str, required=True),
            max_iter=_get(s, "max_iter", int, 100),
            lambda_strategy=_get(s, "lambda_strategy", str, "none"),
            lambda_value=_get(s, "lambda_value", float),
            stopping_rule=_get(s, "stopping_rule", str, "none"),
            dp_tau=_get(s, "dp_tau", float, 1.01),
            ncp_threshold=_get(s, "ncp_threshold", float, 0.05),
            rns_epsilon=_get(s, "rns_epsilon", float, 1e-4),
            restart_period=_get(s, "restart_period", int, 0),
            reorthogonalize=_get(s, "reorthogonalize", bool, True),
            name=section_name.split(":", 1)[1],
        )
        try:
            # noise_norm for DP is filled in from the problem at run time.
            if cfg.stopping_rule != "dp":
                cfg.validate()
        except ValueError as exc:
            raise ConfigParseError(f"[{section_name}]: {exc}") from exc
        solvers.append(cfg)
    if not solvers:
        raise ConfigParseError("config must contain at least one [solver:NAME] section")
    return ExperimentConfig(problem=problem, solvers=solvers,
                            track_metrics=track_metrics, image_export_stride=stride)


@dataclass
class BuiltProblem:
    A: object
    B: object
    b: np.ndarray
    x_true: np.ndarray | None
    noise_norm: float
    image_shape: tuple[int, int] | None
    ct_problem: ct.CtProblem | None = None


def build_problem(spec: ProblemSpec, seed: int | None = None) -> BuiltProblem:
    seed = spec.seed if seed is None else seed
    if spec.kind == "dense":
        if not spec.matched:
            raise ConfigParseError("dense problems support matched mode only")
        rng = np.random.default_rng(seed)
        mat = rng.standard_normal((spec.rows, spec.cols))
        x_true = rng.standard_normal(spec.cols)
        b_clean = mat @ x_true
        level = spec.noise_level or 0.0
        b, noise_norm = ct.add_noise(b_clean, level, seed + 1)
        return BuiltProblem(dense_operator(mat), transpose_of(mat), b, x_true,
                            noise_norm, None)
    if spec.name in ct.BUILTIN_PROBLEMS:
        prob = ct.build_test_problem(spec.name, spec.matched, seed)
    else:
        if spec.nx is None or spec.angles is None:
            raise ConfigParseError(
                "custom ct problem needs 'nx' and 'angles' (or use a built-in name)"
            )
        prob = ct.make_ct_problem(
            spec.nx, spec.angles, spec.det_count,
            spec.noise_level if spec.noise_level is not None else 0.025,
            seed, spec.matched, spec.name,
        )
    return BuiltProblem(prob.forward, prob.back, prob.b_noisy, prob.x_true,
                        prob.noise_norm, (prob.grid.ny, prob.grid.nx), prob)


def run_solver(built: BuiltProblem, cfg: SolverConfig, track_metrics: bool) -> SolveResult:
    if cfg.stopping_rule == "dp" and cfg.noise_norm is None:
        cfg = replace(cfg, noise_norm=built.noise_norm)
    x_true = built.x_true if track_metrics else None
    if cfg.method in GMRES_METHODS:
        return run_gmres(built.A, built.B, built.b, cfg,
                         x_true=x_true, image_shape=built.image_shape)
    if cfg.method in GK_METHODS:
        runner = run_lsqr if cfg.method.startswith("lsqr") else run_lsmr
        return runner(built.A, built.B, built.b, cfg,
                      x_true=x_true, image_shape=built.image_shape)
    raise ConfigParseError(f"unknown solver method {cfg.method!r}")


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def write_records_csv(path: Path, result: SolveResult, method: str,
                      include_timings: bool = False) -> None:
    ba_like = method.startswith("ba") or method.startswith("lsmr")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(CSV_COLUMNS) + "\n")
        for r in result.records:
            row = [
                str(r.k),
                _fmt(r.lambda_used),
                _fmt(r.data_residual_norm),
                _fmt(r.residual_norm) if ba_like else "",
                _fmt(r.proj_residual_norm),
                _fmt(r.solution_norm),
                _fmt(r.rre),
                _fmt(r.ssim),
                _fmt(r.elapsed) if include_timings else "",
            ]
            f.write(",".join(row) + "\n")


def read_records_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        rows = [line.strip().split(",") for line in f if line.strip()]
    cols = {}
    for i, name in enumerate(header):
        vals = [row[i] for row in rows]
        cols[name] = np.array([float(v) if v else np.nan for v in vals])
    return cols


def run_experiment(config: ExperimentConfig, seed: int | None = None) -> list[Path]:
    """Execute every solver in the config; returns the manifest paths."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    built = build_problem(config.problem, seed)
    actual_seed = config.problem.seed if seed is None else seed
    manifests = []
    for cfg in config.solvers:
        label = cfg.label
        if config.image_export_stride and built.image_shape is not None:
            cfg = replace(cfg, snapshot_stride=config.image_export_stride)
        result = run_solver(built, cfg, config.track_metrics)
        csv_path = out_dir / f"{label}.csv"
        write_records_csv(csv_path, result, cfg.method, config.include_timings)

        image_paths = []
        if built.image_shape is not None:
            window = None
            if built.x_true is not None:
                window = (float(built.x_true.min()), float(built.x_true.max()))
            for k, snap in sorted(result.snapshots.items()):
                snap_pgm = out_dir / f"{label}_k{k:04d}.pgm"
                ct.write_pgm(snap_pgm, snap, built.image_shape, window)
                image_paths.append(str(snap_pgm))
            final_pgm = out_dir / f"{label}_final.pgm"
            ct.write_pgm(final_pgm, result.x, built.image_shape, window)
            image_paths.append(str(final_pgm))

        rres = [r.rre for r in result.records if r.rre is not None]
        min_rre_iter = None
        if rres:
            min_rre_iter = int(np.argmin(rres)) + 1
        last = result.records[-1]
        manifest = {
            "solver": label,
            "method": cfg.method,
            "config": {k: v for k, v in cfg.__dict__.items()
                       if k != "x0" and v is not None},
            "problem": {
                "kind": config.problem.kind,
                "name": config.problem.name,
                "matched": config.problem.matched,
                "noise_norm": built.noise_norm,
            },
            "seed": actual_seed,
            "stop_reason": result.stop_reason,
            "cycles": result.cycles,
            "iterations": len(result.records),
            "min_rre": min(rres) if rres else None,
            "min_rre_iteration": min_rre_iter,
            "final": {
                "data_residual": last.data_residual_norm,
                "rre": last.rre,
                "ssim": last.ssim,
            },
            "elapsed_s": last.elapsed,
            "csv": str(csv_path),
            "images": image_paths,
        }
        manifest_path = out_dir / f"{label}.manifest.json"
        with open(manifest_path, "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")
        manifests.append(manifest_path)
    return manifests


def load_manifest(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    with open(path, encoding="utf-8") as f:
        manifest = json.load(f)
    csv_path = Path(manifest["csv"])
    if not csv_path.is_absolute():
        csv_path = path.parent / csv_path.name
    if not csv_path.exists():
        raise FileNotFoundError(f"CSV referenced by manifest not found: {csv_path}")
    manifest["_csv_path"] = csv_path
    return manifest


def compare_runs(manifest_a: dict, manifest_b: dict) -> str:
    """Aligned text table comparing two finished runs."""
    rows = [("", manifest_a["solver"], manifest_b["solver"])]
    for label, key in (
        ("iterations", "iterations"),
        ("stop reason", "stop_reason"),
        ("cycles", "cycles"),
        ("min RRE", "min_rre"),
        ("iter of min RRE", "min_rre_iteration"),
    ):
        rows.append((label, _show(manifest_a.get(key)), _show(manifest_b.get(key))))
    for label, key in (("final RRE", "rre"), ("final SSIM", "ssim"),
                       ("final residual", "data_residual")):
        rows.append((label, _show(manifest_a["final"].get(key)),
                     _show(manifest_b["final"].get(key))))
    for m, which in ((manifest_a, 1), (manifest_b, 2)):
        cols = read_records_csv(m["_csv_path"])
        ssims = cols.get("ssim")
        val = "" if ssims is None or np.all(np.isnan(ssims)) else _show(np.nanmax(ssims))
        if which == 1:
            max_a = val
        else:
            max_b = val
    rows.append(("max SSIM", max_a, max_b))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    return "\n".join(lines)


def _show(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def default_out_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV_VAR, "."))
