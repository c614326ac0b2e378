"""Noise schedules, forward diffusion and reverse-step kernels.

``alpha_bar[t]`` is the cumulative signal weight: a clean sample ``x0``
diffused to timestep ``t`` is ``sqrt(alpha_bar[t]) x0 + sqrt(1 - alpha_bar[t]) eps``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import RngStream, checked, gaussian_grid, same_shape

COSINE_OFFSET = 0.008
COSINE_MAX_BETA = 0.999
SCHEDULE_KINDS = ("linear-beta", "cosine")


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    alpha_bar: np.ndarray
    step_indices: tuple[int, ...]
    kind: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        ab = np.asarray(self.alpha_bar, dtype=np.float64)
        ab.setflags(write=False)
        object.__setattr__(self, "alpha_bar", ab)
        object.__setattr__(self, "step_indices", tuple(int(i) for i in self.step_indices))
        validate_schedule(self)

    def pairs(self, start: int | None = None):
        """Consecutive ``(t, t_prev)`` pairs of the reverse pass, optionally
        starting from the visited sub-step ``start``."""
        idx = self.step_indices
        if start is not None:
            idx = idx[idx.index(start):]
        return list(zip(idx[:-1], idx[1:]))


def validate_schedule(s: NoiseSchedule) -> None:
    ab = s.alpha_bar
    if s.T < 1:
        raise ValueError("schedule needs T >= 1")
    if ab.shape != (s.T + 1,):
        raise ValueError(f"alpha_bar must have T+1={s.T + 1} entries, got {ab.shape}")
    if not np.all(np.isfinite(ab)):
        raise ValueError("alpha_bar contains non-finite values")
    if ab[0] != 1.0:
        raise ValueError(f"alpha_bar[0] must be exactly 1, got {ab[0]!r}")
    if np.any(ab <= 0) or np.any(ab > 1):
        raise ValueError("alpha_bar values must lie in (0, 1]")
    if np.any(np.diff(ab) >= 0):
        bad = int(np.argmax(np.diff(ab) >= 0)) + 1
        raise ValueError(f"alpha_bar must be strictly decreasing (violated at t={bad})")
    idx = s.step_indices
    if len(idx) < 2:
        raise ValueError("step_indices needs at least two entries")
    if idx[-1] != 0 or idx[0] > s.T:
        raise ValueError("step_indices must start at or below T and end at 0")
    if any(a <= b for a, b in zip(idx, idx[1:])):
        raise ValueError("step_indices must be strictly decreasing")


def uniform_steps(T: int, steps: int) -> tuple[int, ...]:
    """``steps`` sub-steps from T down to 0 on an evenly spaced grid.

    With ``steps == 1`` the single reverse transition is ``T -> 0``.
    """
    if steps == 1:
        return (T, 0)
    return tuple(int(i) for i in np.round(np.linspace(T, 0, steps)))


def build_schedule(T: int = 1000, kind: str = "linear-beta", steps: int = 50,
                   beta_start: float = 1e-4, beta_end: float = 2e-2) -> NoiseSchedule:
    """Build a schedule with ``alpha_bar[0] == 1`` and ``steps`` sub-steps.

    ``linear-beta``: betas linearly spaced over t = 1..T, ``alpha_bar[t] = prod(1 - beta_i)``.
    ``cosine``: ``f(t) = cos(((t/T) + 0.008) / 1.008 * pi/2)**2``; betas
    ``1 - f(t)/f(t-1)`` clipped to at most 0.999, then accumulated the same way.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    if not 1 <= steps <= T:
        raise ValueError(f"steps must lie in [1, T], got {steps}")
    if kind == "linear-beta":
        if not 0 < beta_start <= beta_end < 1:
            raise ValueError("need 0 < beta_start <= beta_end < 1")
        betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    elif kind == "cosine":
        t = np.arange(T + 1, dtype=np.float64) / T
        f = np.cos((t + COSINE_OFFSET) / (1 + COSINE_OFFSET) * math.pi / 2) ** 2
        betas = np.clip(1.0 - f[1:] / f[:-1], 0.0, COSINE_MAX_BETA)
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
    meta = {"beta_start": beta_start, "beta_end": beta_end} if kind == "linear-beta" else {}
    return NoiseSchedule(T, alpha_bar, uniform_steps(T, steps), kind, meta)


def dump_schedule_csv(schedule: NoiseSchedule, path) -> None:
    """``t,alpha_bar`` rows; the visited sub-steps go in a ``# steps`` comment."""
    lines = ["# steps " + " ".join(str(i) for i in schedule.step_indices), "t,alpha_bar"]
    lines += [f"{t},{a!r}" for t, a in enumerate(schedule.alpha_bar.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def load_schedule_csv(path, steps: int | None = None) -> NoiseSchedule:
    """Load a schedule dump; raises ``ValueError`` on malformed or invalid data."""
    step_line = None
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] == "steps":
                step_line = [int(p) for p in parts[1:]]
            continue
        if line == "t,alpha_bar":
            continue
        try:
            t_s, a_s = line.split(",")
            rows.append((int(t_s), float(a_s)))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: malformed schedule row {line!r}") from exc
    if not rows:
        raise ValueError(f"{path}: empty schedule")
    ts = [r[0] for r in rows]
    if ts != list(range(len(rows))):
        raise ValueError(f"{path}: timesteps must run 0..T without gaps")
    T = len(rows) - 1
    alpha_bar = np.array([r[1] for r in rows])
    if steps is not None:
        idx = uniform_steps(T, steps)
    elif step_line is not None:
        idx = tuple(step_line)
    else:
        idx = uniform_steps(T, min(50, T))
    return NoiseSchedule(T, alpha_bar, idx, "file")


# --- kernels ----------------------------------------------------------------

def _check_alpha(a: float, name: str = "alpha_bar_t") -> float:
    a = float(a)
    if not 0.0 < a <= 1.0:
        raise ValueError(f"{name} must lie in (0, 1], got {a}")
    return a


def forward_diffuse(x0: np.ndarray, eps: np.ndarray, alpha_bar_t: float) -> np.ndarray:
    same_shape(x0, eps)
    a = _check_alpha(alpha_bar_t)
    return checked(math.sqrt(a) * x0 + math.sqrt(1.0 - a) * eps)


def stochastic_inverse(enc_I: np.ndarray, z: np.ndarray, alpha_bar_t: float) -> np.ndarray:
    """Reference latent noised to ``alpha_bar_t`` with fresh noise ``z``."""
    return forward_diffuse(enc_I, z, alpha_bar_t)


def pred_x0(x_t: np.ndarray, eps: np.ndarray, alpha_bar_t: float) -> np.ndarray:
    same_shape(x_t, eps)
    a = _check_alpha(alpha_bar_t)
    return checked((x_t - math.sqrt(1.0 - a) * eps) / math.sqrt(a))


def ddim_step_split(x_t, eps_for_pred, eps_for_direction, alpha_bar_t, alpha_bar_prev):
    """Deterministic DDIM update where the x0 prediction and the direction
    term may use different noise estimates."""
    same_shape(x_t, eps_for_pred, eps_for_direction)
    a_t = _check_alpha(alpha_bar_t)
    a_prev = _check_alpha(alpha_bar_prev, "alpha_bar_prev")
    if a_prev < a_t:
        raise ValueError("alpha_bar_prev must be >= alpha_bar_t")
    x0 = pred_x0(x_t, eps_for_pred, a_t)
    return ddim_from_pred(x0, eps_for_direction, a_prev)


def ddim_step(x_t, eps, alpha_bar_t, alpha_bar_prev):
    return ddim_step_split(x_t, eps, eps, alpha_bar_t, alpha_bar_prev)


def ddim_from_pred(x0_hat: np.ndarray, eps_dir: np.ndarray, alpha_bar_prev: float) -> np.ndarray:
    """``sqrt(a_prev) * x0_hat + sqrt(1 - a_prev) * eps_dir``."""
    same_shape(x0_hat, eps_dir)
    a_prev = _check_alpha(alpha_bar_prev, "alpha_bar_prev")
    return checked(math.sqrt(a_prev) * x0_hat + math.sqrt(1.0 - a_prev) * eps_dir)


def ddpm_posterior(alpha_bar_t: float, alpha_bar_prev: float) -> tuple[float, float, float]:
    """Coefficients of q(x_prev | x_t, x0) between two (possibly strided) timesteps.

    Returns ``(coef_x0, coef_xt, variance)`` such that the posterior mean is
    ``coef_x0 * x0 + coef_xt * x_t``.
    """
    a_t, a_prev = alpha_bar_t, alpha_bar_prev
    alpha = a_t / a_prev
    beta = 1.0 - alpha
    coef_x0 = math.sqrt(a_prev) * beta / (1.0 - a_t)
    coef_xt = math.sqrt(alpha) * (1.0 - a_prev) / (1.0 - a_t)
    var = (1.0 - a_prev) / (1.0 - a_t) * beta
    return coef_x0, coef_xt, var


def ddpm_step(x_t: np.ndarray, eps: np.ndarray, t: int, schedule: NoiseSchedule,
              rng: RngStream, t_prev: int | None = None) -> np.ndarray:
    """Ancestral step from ``t`` to ``t_prev`` (default ``t - 1``).

    Noise is drawn from ``rng`` only when the posterior variance is non-zero.
    """
    if t < 1 or t > schedule.T:
        raise ValueError(f"ddpm_step needs 1 <= t <= T, got t={t}")
    t_prev = t - 1 if t_prev is None else t_prev
    if not 0 <= t_prev < t:
        raise ValueError("t_prev must lie in [0, t)")
    a_t = float(schedule.alpha_bar[t])
    a_prev = float(schedule.alpha_bar[t_prev])
    x0 = pred_x0(x_t, eps, a_t)
    c0, ct, var = ddpm_posterior(a_t, a_prev)
    mean = c0 * x0 + ct * x_t
    if var <= 0.0:
        return checked(mean)
    return checked(mean + math.sqrt(var) * gaussian_grid(rng, x_t.shape))
