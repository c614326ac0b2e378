"""Reusable experiment harness on the layout toy.

Each helper runs a batch of seeded edits (reference drawn from class 0,
target class 1) and returns mean preservation error and mean edit strength,
so acceptance tests and scripts share one definition of every sweep.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .alignment import AlignmentConfig
from .denoiser import GaussianMixtureDenoiser, GuidanceConfig, MixtureSpec
from .editor import EditRequest, run_edit, run_sdedit_baseline
from .grid import RngStream
from .metrics import EditReport, make_report
from .presets import layout_spec
from .schedule import NoiseSchedule, build_schedule

SOURCE, TARGET = 0, 1


@dataclass
class ToyBench:
    """A fixed spec, schedule and set of references to run sweeps against."""

    spec: MixtureSpec = field(default_factory=lambda: layout_spec(shape=(4, 4), class_offset=1.5, variance=0.04))
    schedule: NoiseSchedule = field(default_factory=build_schedule)
    guidance: GuidanceConfig = field(default_factory=lambda: GuidanceConfig(3.0))
    n_seeds: int = 20
    reference_seed: int = 1000

    def __post_init__(self):
        self.model = GaussianMixtureDenoiser(self.spec)
        self.references = [self.spec.sample(RngStream(self.reference_seed + i), SOURCE)
                           for i in range(self.n_seeds)]

    def report(self, out, i, mode, K, beta) -> EditReport:
        return make_report(out, self.references[i], TARGET, self.spec, mode=mode, K=K, beta=beta, seed=i)

    def edits(self, alignment: AlignmentConfig) -> list[EditReport]:
        reports = []
        for i, ref in enumerate(self.references):
            req = EditRequest(reference=ref, target=TARGET, guidance=self.guidance, seed=i,
                              alignment=alignment)
            out, _ = run_edit(req, self.model, self.schedule)
            reports.append(self.report(out, i, alignment.mode, alignment.K, alignment.beta_value))
        return reports

    def sdedit(self, t_inject: int) -> list[EditReport]:
        reports = []
        for i, ref in enumerate(self.references):
            out = run_sdedit_baseline(ref, t_inject, TARGET, self.model, self.schedule, seed=i,
                                      guidance=self.guidance)
            reports.append(self.report(out, i, "sdedit", t_inject, 0.0))
        return reports


def summarize(reports: list[EditReport]) -> tuple[float, float]:
    """``(mean preservation mse, mean edit strength)``."""
    return (float(np.mean([r.preservation_mse for r in reports])),
            float(np.mean([r.edit_strength for r in reports])))


def sweep_K(bench: ToyBench, Ks, base: AlignmentConfig | None = None):
    base = base or AlignmentConfig()
    return [summarize(bench.edits(replace(base, K=int(k)))) for k in Ks]


def sweep_beta(bench: ToyBench, betas, base: AlignmentConfig | None = None):
    base = base or AlignmentConfig()
    return [summarize(bench.edits(replace(base, beta_value=float(b)))) for b in betas]


def sweep_sdedit(bench: ToyBench, t_injects):
    return [summarize(bench.sdedit(int(t))) for t in t_injects]


__all__ = ["ToyBench", "summarize", "sweep_K", "sweep_beta", "sweep_sdedit", "SOURCE", "TARGET"]
