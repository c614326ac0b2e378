"""Editing runs: the reverse-diffusion loop with alignment injected per mode.

Injection points inside one reverse step from ``t`` to ``t_prev``:

* ``input``: the state entering the sampler is blended with a stochastic
  inverse of the reference. The initial ``x_T`` is aligned at the first
  sub-step, and the state produced by every aligned step is aligned again at
  its own noise level, so a step with ``t > K`` leaves behind an aligned
  ``x_{t_prev}`` (including the final output when the last step is aligned).
* ``epsilon`` / ``epsilon-scaled``: the guided noise estimate is blended after
  classifier-free guidance.
* ``pred-x0``: the x0 prediction is blended inside the DDIM update while the
  direction term keeps the guided noise estimate.

``symmetry_breaking`` only matters for the epsilon modes: the aligned estimate
then shapes the x0 prediction and the unaligned one drives the direction term.
The pred-x0 update already has that split.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .alignment import (AlignmentConfig, align_epsilon, align_epsilon_scaled, align_input,
                        align_pred_x0, effective_beta, is_active)
from .denoiser import Condition, EpsilonModel, GuidanceConfig, cfg_combine
from .grid import RngStream, decode, encode, gaussian_grid
from .mixing import check_mask, mix_latents
from .schedule import NoiseSchedule, ddim_from_pred, ddpm_step, pred_x0, stochastic_inverse

SAMPLERS = ("ddim", "ddpm")


class UnsupportedCombination(ValueError):
    pass


@dataclass(frozen=True)
class EditRequest:
    reference: np.ndarray
    target: Condition = None
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    seed: int = 0
    sampler: str = "ddim"
    alignment: AlignmentConfig = field(default_factory=AlignmentConfig)
    mask: np.ndarray | None = None
    mixing: bool = False
    snapshot_every: int = 0  # keep x_t every n-th sub-step; 0 disables


@dataclass
class StepRecord:
    t: int
    alpha_bar: float
    beta: float
    pred_x0: np.ndarray
    eps_raw: np.ndarray
    eps_used: np.ndarray
    preservation: float
    x_t: np.ndarray | None = None


@dataclass
class EditTrace:
    records: list[StepRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def to_csv(self, comments=()) -> str:
        buf = io.StringIO()
        for c in comments:
            buf.write(f"# {c}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "t", "alpha_bar", "beta", "preservation_mse"])
        for i, r in enumerate(self.records):
            w.writerow([i, r.t, repr(r.alpha_bar), repr(r.beta), repr(r.preservation)])
        return buf.getvalue()


def guided_epsilon(model: EpsilonModel, x, t, alpha_bar_t, cond: Condition, g: GuidanceConfig):
    eps_u = model.predict(x, t, None, alpha_bar_t)
    if cond is None:
        return eps_u
    return cfg_combine(eps_u, model.predict(x, t, cond, alpha_bar_t), g)


def _mse(a, b) -> float:
    return float(np.mean((a - b) ** 2))


def _validate(req: EditRequest, model: EpsilonModel, schedule: NoiseSchedule) -> None:
    if req.sampler not in SAMPLERS:
        raise ValueError(f"unknown sampler {req.sampler!r}")
    if tuple(req.reference.shape) != tuple(model.shape):
        raise ValueError(f"reference shape {req.reference.shape} != model shape {model.shape}")
    req.alignment.validate_for(schedule.T)
    if req.alignment.mode == "pred-x0" and req.sampler == "ddpm":
        raise UnsupportedCombination("pred-x0 alignment requires the DDIM sampler")


class _Run:
    """State shared by the steps of one trajectory."""

    def __init__(self, req, model, schedule, rng, reference, alignment):
        self.req = req
        self.model = model
        self.schedule = schedule
        self.rng = rng
        self.ref = reference
        self.cfg = alignment
        self.trace = EditTrace()

    def align_state(self, x, gate_t, alpha_bar_state):
        """Input alignment of a state whose noise level is ``alpha_bar_state``,
        gated and weighted by the sub-step ``gate_t``."""
        cfg = self.cfg
        if cfg.mode != "input" or not is_active(gate_t, cfg):
            return x
        beta = effective_beta(gate_t, self.schedule.T, cfg)
        z = gaussian_grid(self.rng, x.shape)
        return align_input(x, stochastic_inverse(self.ref, z, alpha_bar_state), gate_t, cfg.K, beta)

    def step(self, x, t, t_prev):
        req, cfg, sched = self.req, self.cfg, self.schedule
        a_t = float(sched.alpha_bar[t])
        a_prev = float(sched.alpha_bar[t_prev])
        beta = effective_beta(t, sched.T, cfg)
        eps_raw = guided_epsilon(self.model, x, t, a_t, req.target, req.guidance)
        eps = eps_raw
        if cfg.mode == "epsilon":
            eps = align_epsilon(eps_raw, x, self.ref, t, cfg.K, beta)
        elif cfg.mode == "epsilon-scaled":
            eps = align_epsilon_scaled(eps_raw, x, self.ref, a_t, t, cfg.K, beta)
        pred = pred_x0(x, eps, a_t)
        if cfg.mode == "pred-x0":
            # Only the prediction is aligned; the direction keeps the guided estimate.
            pred = align_pred_x0(pred, self.ref, t, cfg.K, beta)
        eps_dir = eps_raw if cfg.symmetry_breaking else eps
        if req.sampler == "ddim":
            x_next = ddim_from_pred(pred, eps_dir, a_prev)
        else:
            x_next = ddpm_step(x, eps, t, sched, self.rng, t_prev)
        x_next = self.align_state(x_next, t, a_prev)
        i = len(self.trace.records)
        snap = req.snapshot_every and i % req.snapshot_every == 0
        self.trace.records.append(StepRecord(
            t=t, alpha_bar=a_t, beta=beta, pred_x0=pred, eps_raw=eps_raw, eps_used=eps,
            preservation=_mse(pred, self.ref), x_t=x if snap else None))
        return x_next


def run_edit(req: EditRequest, model: EpsilonModel, schedule: NoiseSchedule):
    """One editing run. Returns ``(output, trace)``; deterministic per seed."""
    _validate(req, model, schedule)
    if req.mixing:
        return run_mixed_edit(req, model, schedule)
    rng = RngStream(req.seed)
    run = _Run(req, model, schedule, rng, encode(req.reference), req.alignment)
    pairs = schedule.pairs()
    x = gaussian_grid(rng, model.shape)
    x = run.align_state(x, pairs[0][0], float(schedule.alpha_bar[pairs[0][0]]))
    for t, t_prev in pairs:
        x = run.step(x, t, t_prev)
    return decode(x), run.trace


def reconstruction_config(mode: str) -> AlignmentConfig:
    return AlignmentConfig(mode=mode, K=0, beta_law="constant", beta_value=1.0)


def run_reconstruction(reference, model, schedule, mode="pred-x0", seed=0,
                       target: Condition = None, guidance: GuidanceConfig | None = None):
    """Full-strength alignment over every sub-step (``beta = 1``, ``K = 0``)."""
    req = EditRequest(reference=reference, target=target,
                      guidance=guidance or GuidanceConfig(), seed=seed,
                      alignment=reconstruction_config(mode))
    out, _ = run_edit(req, model, schedule)
    return out


def run_sdedit_baseline(reference, t_inject, target: Condition, model, schedule, seed=0,
                        guidance: GuidanceConfig | None = None):
    """Noise the reference once to ``t_inject``, then denoise with plain guided DDIM."""
    if t_inject not in schedule.step_indices:
        raise ValueError(f"t_inject={t_inject} is not a visited sub-step")
    req = EditRequest(reference=reference, target=target,
                      guidance=guidance or GuidanceConfig(), seed=seed,
                      alignment=AlignmentConfig(mode="none", K=0))
    _validate(req, model, schedule)
    rng = RngStream(seed)
    ref = encode(reference)
    run = _Run(req, model, schedule, rng, ref, req.alignment)
    z = gaussian_grid(rng, model.shape)
    x = stochastic_inverse(ref, z, float(schedule.alpha_bar[t_inject]))
    for t, t_prev in schedule.pairs(start=t_inject):
        x = run.step(x, t, t_prev)
    return decode(x)


def run_mixed_edit(req: EditRequest, model, schedule):
    """Aligned and free trajectories side by side, mixed through ``req.mask``.

    The aligned branch is exactly :func:`run_edit` without mixing. The free
    branch follows the same condition unaligned; whenever the aligned branch
    is inside the alignment interval its state is mixed into the free branch.
    The free (mixed) branch is returned.
    """
    if req.mask is None:
        raise ValueError("mixed edit needs a mask")
    _validate(req, model, schedule)
    if req.sampler != "ddim":
        raise UnsupportedCombination("semantic mixing runs on the DDIM sampler")
    mask = check_mask(req.mask, model.shape)
    cfg = req.alignment
    rng = RngStream(req.seed)
    ref = encode(req.reference)
    aligned = _Run(req, model, schedule, rng, ref, cfg)
    free_req = replace(req, alignment=replace(cfg, mode="none"))
    free = _Run(free_req, model, schedule, None, ref, free_req.alignment)
    pairs = schedule.pairs()
    t0 = pairs[0][0]
    x_free = gaussian_grid(rng, model.shape)
    x_al = aligned.align_state(x_free, t0, float(schedule.alpha_bar[t0]))
    if is_active(t0, cfg):
        x_free = mix_latents(x_al, x_free, mask, t0, cfg.K)
    for t, t_prev in pairs:
        x_al = aligned.step(x_al, t, t_prev)
        x_free = free.step(x_free, t, t_prev)
        if is_active(t, cfg):
            x_free = mix_latents(x_al, x_free, mask, t, cfg.K)
    return decode(x_free), free.trace


__all__ = [
    "EditRequest", "EditTrace", "StepRecord", "UnsupportedCombination", "SAMPLERS",
    "guided_epsilon", "run_edit", "run_reconstruction", "run_sdedit_baseline",
    "run_mixed_edit", "reconstruction_config",
]
