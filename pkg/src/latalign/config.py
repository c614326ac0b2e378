"""Line-oriented ``key = value`` run configuration.

Blank lines are ignored and ``#`` starts a comment anywhere on a line. Keys carry a section prefix
(``alignment.mode``); every key must appear in :data:`SCHEMA`, and a key may
be set at most once. List values are comma separated, and integer lists also
accept inclusive ranges such as ``0..19``. Relative paths resolve against the
directory of the config file.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Optional

from .alignment import BETA_LAWS, MODES, AlignmentConfig, parse_bool
from .editor import SAMPLERS
from .schedule import SCHEDULE_KINDS

MODEL_KINDS = ("analytic", "mlp")
PRESETS = ("layout", "separated-1d", "three-component")


class ConfigError(ValueError):
    pass


def _int(text: str) -> int:
    return int(text)


def _float(text: str) -> float:
    return float(text)


def _choice(options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


def _optional_int(text: str) -> Optional[int]:
    return None if text.lower() == "none" else int(text)


def _int_list(text: str) -> tuple[int, ...]:
    out: list[int] = []
    for part in _split(text):
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise ValueError(f"empty range {part!r}")
            out.extend(range(lo_i, hi_i + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in _split(text))


def _mode_list(text: str) -> tuple[str, ...]:
    return tuple(_choice(MODES)(p) for p in _split(text))


def _split(text: str) -> list[str]:
    parts = [p.strip() for p in text.split(",")]
    if not parts or any(not p for p in parts):
        raise ValueError("empty list entry")
    return parts


def _path(text: str) -> str:
    if not text:
        raise ValueError("empty path")
    return text


SCHEMA: dict[str, Callable[[str], object]] = {
    "schedule.T": _int,
    "schedule.kind": _choice(SCHEDULE_KINDS),
    "schedule.steps": _int,
    "schedule.beta_start": _float,
    "schedule.beta_end": _float,
    "schedule.file": _path,
    "mixture.file": _path,
    "mixture.preset": _choice(PRESETS),
    "model.kind": _choice(MODEL_KINDS),
    "model.file": _path,
    "reference.file": _path,
    "reference.class": _int,
    "reference.seed": _int,
    "edit.target": _optional_int,
    "edit.guidance": _float,
    "edit.seed": _int,
    "edit.sampler": _choice(SAMPLERS),
    "edit.snapshot_every": _int,
    "alignment.mode": _choice(MODES),
    "alignment.K": _int,
    "alignment.beta.law": _choice(BETA_LAWS),
    "alignment.beta.value": _float,
    "alignment.symmetry_breaking": parse_bool,
    "mixing.enabled": parse_bool,
    "mixing.mask": _path,
    "sweep.mode": _mode_list,
    "sweep.K": _int_list,
    "sweep.beta": _float_list,
    "sweep.seeds": _int_list,
    "baseline.t_inject": _int_list,
    "check.tolerance": _float,
    "output.dir": _path,
}

PATH_KEYS = {k for k, v in SCHEMA.items() if v is _path}


@dataclass(frozen=True)
class ScheduleConfig:
    T: int = 1000
    kind: str = "linear-beta"
    steps: int = 50
    beta_start: float = 1e-4
    beta_end: float = 2e-2
    file: Optional[str] = None


@dataclass(frozen=True)
class SourceConfig:
    """Where the mixture, model and reference come from."""

    mixture_file: Optional[str] = None
    mixture_preset: Optional[str] = None
    model_kind: str = "analytic"
    model_file: Optional[str] = None
    reference_file: Optional[str] = None
    reference_class: int = 0
    reference_seed: int = 0


@dataclass(frozen=True)
class EditConfig:
    target: Optional[int] = 1
    guidance: float = 10.0
    seed: int = 0
    sampler: str = "ddim"
    snapshot_every: int = 0
    mixing: bool = False
    mask: Optional[str] = None


@dataclass(frozen=True)
class SweepConfig:
    modes: tuple[str, ...] = ("pred-x0",)
    Ks: tuple[int, ...] = (200,)
    betas: tuple[float, ...] = (0.3,)
    seeds: tuple[int, ...] = tuple(range(20))
    t_inject: Optional[tuple[int, ...]] = None  # None: every fifth visited sub-step


@dataclass(frozen=True)
class RunConfig:
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    edit: EditConfig = field(default_factory=EditConfig)
    alignment: AlignmentConfig = field(default_factory=AlignmentConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    check_tolerance: float = 1e-5
    output_dir: Optional[str] = None

    def items(self) -> dict[str, str]:
        """Every key of the schema with its effective value, as text."""
        s, src, e, sw = self.schedule, self.source, self.edit, self.sweep
        out = {
            "schedule.T": str(s.T), "schedule.kind": s.kind, "schedule.steps": str(s.steps),
            "schedule.beta_start": repr(s.beta_start), "schedule.beta_end": repr(s.beta_end),
            "schedule.file": s.file or "",
            "mixture.file": src.mixture_file or "", "mixture.preset": src.mixture_preset or "",
            "model.kind": src.model_kind, "model.file": src.model_file or "",
            "reference.file": src.reference_file or "",
            "reference.class": str(src.reference_class), "reference.seed": str(src.reference_seed),
            "edit.target": "none" if e.target is None else str(e.target),
            "edit.guidance": repr(e.guidance), "edit.seed": str(e.seed), "edit.sampler": e.sampler,
            "edit.snapshot_every": str(e.snapshot_every),
            "mixing.enabled": "true" if e.mixing else "false", "mixing.mask": e.mask or "",
            "sweep.mode": ",".join(sw.modes), "sweep.K": ",".join(map(str, sw.Ks)),
            "sweep.beta": ",".join(map(repr, sw.betas)), "sweep.seeds": ",".join(map(str, sw.seeds)),
            "baseline.t_inject": "" if sw.t_inject is None else ",".join(map(str, sw.t_inject)),
            "check.tolerance": repr(self.check_tolerance),
            "output.dir": self.output_dir or "",
        }
        out.update({f"alignment.{k}": v for k, v in self.alignment.to_items().items()})
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in sorted(self.items().items()))

    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    def with_seed(self, seed: int) -> "RunConfig":
        """Override the edit seed and collapse sweep seeds to ``[seed]``."""
        return replace(self, edit=replace(self.edit, seed=seed),
                       sweep=replace(self.sweep, seeds=(seed,)))


def parse_items(text: str, source: str = "<config>") -> dict[str, object]:
    """Parse and type-check every line; unknown or repeated keys are errors."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: key {key!r} set twice")
        try:
            values[key] = SCHEMA[key](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return values


def build_config(values: dict[str, object], base_dir: Path | str = ".") -> RunConfig:
    base = Path(base_dir)
    v = {k: (str((base / val).resolve()) if k in PATH_KEYS else val) for k, val in values.items()}

    def pick(cls, mapping):
        kw = {name: v[key] for key, name in mapping.items() if key in v}
        return cls(**kw)

    schedule = pick(ScheduleConfig, {"schedule.T": "T", "schedule.kind": "kind", "schedule.steps": "steps",
                                     "schedule.beta_start": "beta_start", "schedule.beta_end": "beta_end",
                                     "schedule.file": "file"})
    source = pick(SourceConfig, {"mixture.file": "mixture_file", "mixture.preset": "mixture_preset",
                                 "model.kind": "model_kind", "model.file": "model_file",
                                 "reference.file": "reference_file", "reference.class": "reference_class",
                                 "reference.seed": "reference_seed"})
    edit = pick(EditConfig, {"edit.target": "target", "edit.guidance": "guidance", "edit.seed": "seed",
                             "edit.sampler": "sampler", "edit.snapshot_every": "snapshot_every",
                             "mixing.enabled": "mixing", "mixing.mask": "mask"})
    sweep = pick(SweepConfig, {"sweep.mode": "modes", "sweep.K": "Ks", "sweep.beta": "betas",
                               "sweep.seeds": "seeds", "baseline.t_inject": "t_inject"})
    try:
        alignment = AlignmentConfig.from_items({k[len("alignment."):]: _raw(values[k]) for k in values
                                                if k.startswith("alignment.")})
        alignment.validate_for(schedule.T)
        for K in sweep.Ks:
            replace(alignment, K=K).validate_for(schedule.T)
        for b in sweep.betas:
            replace(alignment, beta_value=b)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg = RunConfig(schedule=schedule, source=source, edit=edit, alignment=alignment, sweep=sweep,
                    check_tolerance=v.get("check.tolerance", 1e-5), output_dir=v.get("output.dir"))
    _cross_check(cfg)
    return cfg


def _raw(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _cross_check(cfg: RunConfig) -> None:
    s, src, e = cfg.schedule, cfg.source, cfg.edit
    if s.T < 1 or not 1 <= s.steps <= s.T:
        raise ConfigError(f"need 1 <= schedule.steps <= schedule.T, got steps={s.steps} T={s.T}")
    if src.mixture_file and src.mixture_preset:
        raise ConfigError("set at most one of mixture.file and mixture.preset")
    if src.model_kind == "mlp" and not src.model_file:
        raise ConfigError("model.kind = mlp needs model.file")
    if e.snapshot_every < 0:
        raise ConfigError("edit.snapshot_every must be >= 0")
    if e.mixing and not e.mask:
        raise ConfigError("mixing.enabled = true needs mixing.mask")
    if not cfg.check_tolerance >= 0:
        raise ConfigError("check.tolerance must be >= 0")


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return build_config(parse_items(text, str(path)), path.parent)


def config_from_text(text: str, base_dir: Path | str = ".") -> RunConfig:
    return build_config(parse_items(text), base_dir)


__all__ = [
    "RunConfig", "ScheduleConfig", "SourceConfig", "EditConfig", "SweepConfig", "ConfigError",
    "SCHEMA", "load_config", "config_from_text", "parse_items", "build_config",
]
