"""Desk-scale evaluation proxies and tradeoff summaries.

``preservation`` (MSE/PSNR against the reference) stands in for a perceptual
image distance, and ``edit_strength`` (posterior of the target class under
the clean mixture) stands in for a text-image similarity score. Neither is a
reproduction of those network-based metrics.
"""
from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import spearmanr

from .denoiser import MixtureSpec, gm_class_posterior

TRADEOFF_SCHEMA = "latalign-tradeoff/1"
PROXY_NOTE = "proxies: preservation=MSE/PSNR vs reference, edit_strength=analytic target-class posterior"


def preservation(x_out: np.ndarray, enc_I: np.ndarray, dynamic_range: float = 1.0):
    """Return ``(mse, psnr)``; psnr is ``inf`` when the grids are identical."""
    if x_out.shape != enc_I.shape:
        raise ValueError(f"shape mismatch: {x_out.shape} vs {enc_I.shape}")
    mse = float(np.mean((np.asarray(x_out) - np.asarray(enc_I)) ** 2))
    psnr = math.inf if mse == 0 else 10.0 * math.log10(dynamic_range ** 2 / mse)
    return mse, psnr


def edit_strength(x_out: np.ndarray, target: int, spec: MixtureSpec) -> float:
    return gm_class_posterior(x_out, target, spec)


@dataclass
class EditReport:
    mode: str
    K: int
    beta: float
    seed: int
    preservation_mse: float
    preservation_psnr: float
    edit_strength: float
    dynamic_range: float
    runtime_ms: float = 0.0
    config: dict = field(default_factory=dict)

    def summary_line(self) -> str:
        return (f"mode={self.mode} K={self.K} beta={self.beta:g} seed={self.seed} "
                f"mse={self.preservation_mse:.6g} psnr={self.preservation_psnr:.4g} "
                f"strength={self.edit_strength:.6g} runtime_ms={self.runtime_ms:.1f}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["proxies"] = PROXY_NOTE
        return d


def make_report(x_out, reference, target, spec, *, mode, K, beta, seed,
                dynamic_range=None, runtime_ms=0.0, config=None) -> EditReport:
    rng_ = spec.mean_spread() if dynamic_range is None else dynamic_range
    mse, psnr = preservation(x_out, reference, rng_)
    strength = edit_strength(x_out, target, spec) if target is not None else float("nan")
    return EditReport(mode, K, beta, seed, mse, psnr, strength, rng_, runtime_ms, dict(config or {}))


TRADEOFF_COLUMNS = ["mode", "K", "beta", "n", "mse_mean", "mse_std", "psnr_mean",
                    "psnr_std", "strength_mean", "strength_std"]


def _mean_std(values):
    arr = np.asarray(values, dtype=np.float64)
    if np.all(np.isinf(arr)) and np.all(arr > 0):
        return math.inf, 0.0
    # Population standard deviation: a single run has spread 0.
    return float(arr.mean()), float(arr.std())


def tradeoff_table(runs: Sequence[EditReport]) -> list[dict]:
    """Group reports by ``(mode, K, beta)`` into mean/std rows, sorted."""
    if not runs:
        raise ValueError("tradeoff table needs at least one run")
    groups = defaultdict(list)
    for r in runs:
        groups[(r.mode, r.K, r.beta)].append(r)
    rows = []
    for (mode, K, beta) in sorted(groups):
        g = groups[(mode, K, beta)]
        mse_m, mse_s = _mean_std([r.preservation_mse for r in g])
        psnr_m, psnr_s = _mean_std([r.preservation_psnr for r in g])
        st_m, st_s = _mean_std([r.edit_strength for r in g])
        rows.append(dict(mode=mode, K=K, beta=beta, n=len(g), mse_mean=mse_m, mse_std=mse_s,
                         psnr_mean=psnr_m, psnr_std=psnr_s, strength_mean=st_m, strength_std=st_s))
    return rows


def tradeoff_csv(rows: Iterable[dict], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {TRADEOFF_SCHEMA}\n# {PROXY_NOTE}\n")
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.DictWriter(buf, TRADEOFF_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def read_tradeoff_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = []
    for row in csv.DictReader(lines):
        rows.append({k: (v if k == "mode" else int(v) if k in ("K", "n") else float(v))
                     for k, v in row.items()})
    return rows


def hypervolume(points: Sequence[tuple[float, float]], ref_error: float, ref_strength: float = 0.0) -> float:
    """Area dominated by ``(error, strength)`` points (minimise error, maximise
    strength) inside the box bounded by ``ref_error`` and ``ref_strength``."""
    pts = sorted((e, s) for e, s in points if e < ref_error and s > ref_strength)
    area = 0.0
    best = ref_strength
    # Sweep by increasing error; each point adds the strip it newly dominates.
    for i, (e, s) in enumerate(pts):
        best = max(best, s)
        e_next = pts[i + 1][0] if i + 1 < len(pts) else ref_error
        area += (e_next - e) * (best - ref_strength)
    return area


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    rho = spearmanr(x, y).statistic
    return float(rho)


__all__ = [
    "preservation", "edit_strength", "EditReport", "make_report", "tradeoff_table",
    "tradeoff_csv", "read_tradeoff_csv", "hypervolume", "spearman", "TRADEOFF_SCHEMA",
    "TRADEOFF_COLUMNS",
]
