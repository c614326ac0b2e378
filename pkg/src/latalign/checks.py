"""Built-in self-checks: residuals of known identities on the configured setup."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .alignment import align_epsilon_scaled, align_input, align_pred_x0
from .denoiser import GaussianMixtureDenoiser, MixtureSpec, gm_epsilon, gm_log_density
from .editor import run_reconstruction
from .grid import RngStream, gaussian_grid, lerp
from .schedule import NoiseSchedule, ddim_step, forward_diffuse, pred_x0

RECONSTRUCTION_MODES = ("pred-x0", "input", "epsilon-scaled")


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tolerance: float
    message: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual)) and self.residual <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.message})" if self.message else ""
        return f"check {self.name}: residual={self.residual:.3e} tol={self.tolerance:.1e} {status}{extra}"


def fd_epsilon(x: np.ndarray, alpha_bar: float, spec: MixtureSpec, cond=None, h: float = 1e-5) -> np.ndarray:
    """``-sqrt(1 - a) * grad log p_a(x)`` by central differences."""
    grad = np.empty_like(x, dtype=np.float64)
    flat = grad.reshape(-1)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        e = e.reshape(x.shape)
        flat[i] = (gm_log_density(x + e, alpha_bar, cond, spec)
                   - gm_log_density(x - e, alpha_bar, cond, spec)) / (2 * h)
    return -np.sqrt(1.0 - alpha_bar) * grad


def check_denoiser(spec: MixtureSpec, tol: float, n_x: int = 12, n_alpha: int = 6) -> CheckResult:
    """Analytic noise estimate against the finite-difference score oracle."""
    rng = RngStream(7)
    spread = spec.mean_spread()
    worst = 0.0
    for a in np.linspace(0.05, 0.95, n_alpha):
        for _ in range(n_x):
            x = 1.5 * spread * gaussian_grid(rng, spec.shape)
            diff = np.abs(gm_epsilon(x, float(a), None, spec) - fd_epsilon(x, float(a), spec))
            worst = max(worst, float(diff.max()))
    return CheckResult("denoiser-fd", worst, tol)


def check_reconstruction(spec: MixtureSpec, schedule: NoiseSchedule, tol: float, seeds=range(3)) -> CheckResult:
    model = GaussianMixtureDenoiser(spec)
    worst = 0.0
    for seed in seeds:
        ref = spec.sample(RngStream(100 + seed), None)
        for mode in RECONSTRUCTION_MODES:
            out = run_reconstruction(ref, model, schedule, mode=mode, seed=seed)
            worst = max(worst, float(np.max(np.abs(out - ref))))
    return CheckResult("reconstruction", worst, tol, "modes " + ",".join(RECONSTRUCTION_MODES))


def check_identities(schedule: NoiseSchedule, shape, tol: float) -> CheckResult:
    """Algebraic round trips of the step kernels and alignment rules."""
    rng = RngStream(11)
    x0 = gaussian_grid(rng, shape)
    eps = gaussian_grid(rng, shape)
    other = gaussian_grid(rng, shape)
    res = [np.abs(lerp(x0, other, 1.0) - x0).max(), np.abs(lerp(x0, other, 0.0) - other).max()]
    for t, t_prev in schedule.pairs():
        a, a_prev = float(schedule.alpha_bar[t]), float(schedule.alpha_bar[t_prev])
        x_t = forward_diffuse(x0, eps, a)
        res.append(np.abs(pred_x0(x_t, eps, a) - x0).max())
        res.append(np.abs(ddim_step(x_t, eps, a, a_prev) - forward_diffuse(x0, eps, a_prev)).max())
        res.append(np.abs(align_pred_x0(other, x0, t, -1, 1.0) - x0).max())
        res.append(np.abs(align_input(x_t, other, t, -1, 0.0) - x_t).max())
        if a < 1.0:
            res.append(np.abs(align_epsilon_scaled(other, x_t, x0, a, t, -1, 1.0) - eps).max())
    return CheckResult("identities", float(max(res)), tol)


def check_schedule(load: Callable[[], NoiseSchedule]) -> tuple[CheckResult, NoiseSchedule | None]:
    try:
        schedule = load()
    except (ValueError, OSError) as exc:
        return CheckResult("schedule", float("inf"), 0.0, str(exc)), None
    return CheckResult("schedule", 0.0, 0.0, f"T={schedule.T}, {len(schedule.step_indices)} sub-steps"), schedule


def run_checks(load_schedule: Callable[[], NoiseSchedule], spec: MixtureSpec, tol: float) -> list[CheckResult]:
    """All checks; identity-type checks use ``min(tol, 1e-10)`` so a loose
    oracle tolerance never hides an algebra error."""
    results = []
    sched_result, schedule = check_schedule(load_schedule)
    results.append(sched_result)
    results.append(check_denoiser(spec, tol))
    if schedule is not None:
        strict = min(tol, 1e-10)
        results.append(check_identities(schedule, spec.shape, strict))
        results.append(check_reconstruction(spec, schedule, min(tol, 1e-8)))
    return results


__all__ = ["CheckResult", "fd_epsilon", "run_checks", "check_denoiser", "check_reconstruction",
           "check_identities", "check_schedule"]
