"""Command-line front end: ``latalign edit|sweep|baseline|check``.

Exit codes: 0 success, 1 runtime failure, 2 config error, 3 model or data
file error, 4 failed property check.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .alignment import AlignmentConfig
from .checks import run_checks
from .config import ConfigError, RunConfig, load_config
from .denoiser import GaussianMixtureDenoiser, GuidanceConfig, MixtureSpec, load_mixture
from .editor import EditRequest, UnsupportedCombination, run_edit, run_sdedit_baseline
from .grid import RngStream, load_grid, write_grid_csv, write_pgm
from .metrics import EditReport, make_report, tradeoff_csv, tradeoff_table
from .mixing import load_mask
from .mlp import load_mlp_denoiser
from .presets import layout_spec, separated_1d_spec, three_component_1d_spec
from .schedule import NoiseSchedule, build_schedule, load_schedule_csv

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_MODEL, EXIT_CHECK = 0, 1, 2, 3, 4

PRESET_SPECS = {
    "layout": lambda: layout_spec(shape=(4, 4), class_offset=1.5, variance=0.04),
    "separated-1d": separated_1d_spec,
    "three-component": three_component_1d_spec,
}


class ModelError(Exception):
    """A model, mixture, schedule or grid file exists but cannot be used."""


@dataclass
class Setup:
    schedule: NoiseSchedule
    spec: MixtureSpec
    model: object
    reference: np.ndarray
    mask: np.ndarray | None


def _existing(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} not found: {p}")
    return p


def load_schedule(cfg: RunConfig) -> NoiseSchedule:
    s = cfg.schedule
    if s.file:
        return load_schedule_csv(_existing(s.file, "schedule file"))
    return build_schedule(s.T, s.kind, s.steps, s.beta_start, s.beta_end)


def load_spec(cfg: RunConfig, fallback: str | None = None) -> MixtureSpec:
    src = cfg.source
    if src.mixture_file:
        path = _existing(src.mixture_file, "mixture file")
        try:
            return load_mixture(path)
        except ValueError as exc:
            raise ModelError(str(exc)) from None
    preset = src.mixture_preset or fallback
    if preset is None:
        raise ConfigError("no mixture: set mixture.file or mixture.preset")
    return PRESET_SPECS[preset]()


def build_setup(cfg: RunConfig) -> Setup:
    try:
        schedule = load_schedule(cfg)
    except ValueError as exc:
        raise ModelError(str(exc)) from None
    spec = load_spec(cfg)
    src = cfg.source
    try:
        if src.model_kind == "mlp":
            model = load_mlp_denoiser(_existing(src.model_file, "model file"))
            if tuple(model.shape) != tuple(spec.shape):
                raise ModelError(f"model shape {model.shape} != mixture shape {spec.shape}")
        else:
            model = GaussianMixtureDenoiser(spec)
        if src.reference_file:
            reference = load_grid(_existing(src.reference_file, "reference file"))
            if reference.size != int(np.prod(spec.shape)):
                raise ModelError(f"reference shape {reference.shape} != mixture shape {spec.shape}")
            # A 1-D latent may come from a single-row image.
            reference = reference.reshape(spec.shape)
        else:
            if src.reference_class not in spec.classes:
                raise ConfigError(f"reference.class {src.reference_class} not in mixture classes {spec.classes}")
            reference = spec.sample(RngStream(src.reference_seed), src.reference_class)
        mask = load_mask(_existing(cfg.edit.mask, "mask file"), spec.shape) if cfg.edit.mixing else None
    except ConfigError:
        raise
    except ValueError as exc:  # malformed data files
        raise ModelError(str(exc)) from None
    if cfg.edit.target is not None and cfg.edit.target not in spec.classes:
        raise ConfigError(f"edit.target {cfg.edit.target} not in mixture classes {spec.classes}")
    return Setup(schedule, spec, model, reference, mask)


def make_request(cfg: RunConfig, setup: Setup, alignment: AlignmentConfig, seed: int) -> EditRequest:
    e = cfg.edit
    return EditRequest(reference=setup.reference, target=e.target, guidance=GuidanceConfig(e.guidance),
                       seed=seed, sampler=e.sampler, alignment=alignment, mask=setup.mask,
                       mixing=e.mixing, snapshot_every=e.snapshot_every)


def edit_once(cfg: RunConfig, setup: Setup, alignment: AlignmentConfig, seed: int):
    req = make_request(cfg, setup, alignment, seed)
    t0 = time.perf_counter()
    out, trace = run_edit(req, setup.model, setup.schedule)
    ms = 1000.0 * (time.perf_counter() - t0)
    report = make_report(out, setup.reference, cfg.edit.target, setup.spec, mode=alignment.mode,
                         K=alignment.K, beta=alignment.beta_value, seed=seed, runtime_ms=ms,
                         config=cfg.items())
    return out, trace, report


def sdedit_once(cfg: RunConfig, setup: Setup, t_inject: int, seed: int) -> EditReport:
    t0 = time.perf_counter()
    out = run_sdedit_baseline(setup.reference, t_inject, cfg.edit.target, setup.model, setup.schedule,
                              seed=seed, guidance=GuidanceConfig(cfg.edit.guidance))
    ms = 1000.0 * (time.perf_counter() - t0)
    return make_report(out, setup.reference, cfg.edit.target, setup.spec, mode="sdedit", K=t_inject,
                       beta=0.0, seed=seed, runtime_ms=ms)


# --- output -----------------------------------------------------------------

def prepare_out(out: str | None, overwrite: bool) -> Path:
    if not out:
        raise ConfigError("no output directory: pass --out or set output.dir")
    path = Path(out)
    if path.exists() and not path.is_dir():
        raise ConfigError(f"output path {path} is not a directory")
    if path.exists() and any(path.iterdir()) and not overwrite:
        raise ConfigError(f"output directory {path} is not empty (use --overwrite)")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    return value


def write_report(path: Path, report: EditReport, config_hash: str) -> None:
    data = _json_safe(report.to_dict())
    data["config_hash"] = config_hash
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def write_runs_csv(path: Path, reports, comments) -> None:
    lines = [f"# {c}" for c in comments]
    lines.append("mode,K,beta,seed,mse,psnr,strength")
    for r in reports:
        lines.append(f"{r.mode},{r.K},{r.beta!r},{r.seed},{r.preservation_mse!r},"
                     f"{r.preservation_psnr!r},{r.edit_strength!r}")
    path.write_text("\n".join(lines) + "\n")


# --- commands ---------------------------------------------------------------

def cmd_edit(cfg: RunConfig, out_dir: Path, jobs: int = 1) -> int:
    setup = build_setup(cfg)
    h = cfg.hash()
    out, trace, report = edit_once(cfg, setup, cfg.alignment, cfg.edit.seed)
    tag = [f"config_hash: {h}"]
    write_grid_csv(out_dir / "output.csv", out, tag)
    if out.ndim == 2:
        write_pgm(out_dir / "output.pgm", out, comments=tag)
        snaps = [r for r in trace.records if r.x_t is not None]
        if snaps:
            (out_dir / "snapshots").mkdir(exist_ok=True)
            for r in snaps:
                write_pgm(out_dir / "snapshots" / f"t{r.t:04d}.pgm", r.x_t, comments=tag)
    (out_dir / "trace.csv").write_text(trace.to_csv(tag))
    write_report(out_dir / "report.json", report, h)
    print(report.summary_line())
    return EXIT_OK


_WORKER: dict = {}


def _init_worker(cfg: RunConfig) -> None:
    _WORKER["cfg"] = cfg
    _WORKER["setup"] = build_setup(cfg)


def _edit_task(task):
    mode, K, beta, seed = task
    cfg = _WORKER["cfg"]
    alignment = replace(cfg.alignment, mode=mode, K=K, beta_value=beta)
    return edit_once(cfg, _WORKER["setup"], alignment, seed)[2]


def _sdedit_task(task):
    t_inject, seed = task
    return sdedit_once(_WORKER["cfg"], _WORKER["setup"], t_inject, seed)


def run_tasks(cfg: RunConfig, fn, tasks, jobs: int):
    """Results in task order whatever the parallelism."""
    if jobs <= 1:
        _init_worker(cfg)
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(cfg,)) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def sweep_tasks(cfg: RunConfig):
    sw = cfg.sweep
    return [(m, K, b, s) for m in sw.modes for K in sw.Ks for b in sw.betas for s in sw.seeds]


def cmd_sweep(cfg: RunConfig, out_dir: Path, jobs: int = 1) -> int:
    build_setup(cfg)  # fail fast before spawning workers
    tasks = sweep_tasks(cfg)
    if not tasks:
        raise ConfigError("sweep grid is empty")
    reports = run_tasks(cfg, _edit_task, tasks, jobs)
    _write_table(cfg, out_dir, "tradeoff.csv", reports)
    return EXIT_OK


def baseline_injections(cfg: RunConfig, schedule: NoiseSchedule) -> tuple[int, ...]:
    if cfg.sweep.t_inject is None:
        return tuple(sorted(schedule.step_indices[::5]))
    bad = [t for t in cfg.sweep.t_inject if t not in schedule.step_indices]
    if bad:
        raise ConfigError(f"baseline.t_inject values {bad} are not visited sub-steps")
    return cfg.sweep.t_inject


def cmd_baseline(cfg: RunConfig, out_dir: Path, jobs: int = 1) -> int:
    setup = build_setup(cfg)
    tasks = [(t, s) for t in baseline_injections(cfg, setup.schedule) for s in cfg.sweep.seeds]
    if not tasks:
        raise ConfigError("baseline grid is empty")
    reports = run_tasks(cfg, _sdedit_task, tasks, jobs)
    _write_table(cfg, out_dir, "baseline.csv", reports)
    return EXIT_OK


def _write_table(cfg: RunConfig, out_dir: Path, name: str, reports) -> None:
    h = cfg.hash()
    tag = [f"config_hash: {h}"]
    rows = tradeoff_table(reports)
    (out_dir / name).write_text(tradeoff_csv(rows, tag))
    write_runs_csv(out_dir / "runs.csv", reports, tag)
    (out_dir / "config.txt").write_text(f"# config_hash: {h}\n" + cfg.to_text())
    for row in rows:
        print(f"mode={row['mode']} K={row['K']} beta={row['beta']:g} n={row['n']} "
              f"mse={row['mse_mean']:.6g}+-{row['mse_std']:.3g} "
              f"strength={row['strength_mean']:.6g}+-{row['strength_std']:.3g}")


def cmd_check(cfg: RunConfig) -> int:
    spec = load_spec(cfg, fallback="three-component")
    results = run_checks(lambda: load_schedule(cfg), spec, cfg.check_tolerance)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


# --- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--jobs", type=int, default=1, help="parallel runs for sweeps")
    common.add_argument("--seed", type=int, help="override edit.seed and collapse sweep seeds")
    common.add_argument("--overwrite", action="store_true", help="allow a non-empty output directory")
    parser = argparse.ArgumentParser(prog="latalign", description="Latent spatial alignment editing on toy diffusion models.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("edit", parents=[common], help="run one edit")
    sub.add_parser("sweep", parents=[common], help="sweep mode x K x beta x seed")
    sub.add_parser("baseline", parents=[common], help="sweep the noise-injection baseline")
    sub.add_parser("check", parents=[common], help="run built-in property checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if args.command == "check":
            return cmd_check(cfg)
        out_dir = prepare_out(args.out or cfg.output_dir, args.overwrite)
        command = {"edit": cmd_edit, "sweep": cmd_sweep, "baseline": cmd_baseline}[args.command]
        return command(cfg, out_dir, args.jobs)
    except (ConfigError, UnsupportedCombination) as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelError as exc:
        print(f"error[model]: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (ValueError, FloatingPointError, OSError) as exc:
        print(f"error[runtime]: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
