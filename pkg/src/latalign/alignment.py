"""Latent spatial alignment rules and their strength schedule.

Every rule blends a reconstruction-driving quantity built from the reference
latent into the sampler's own quantity with weight ``beta_t``, but only while
the current timestep ``t`` is above the cutoff ``K``:

* ``input``: the sampler state ``x_t`` is pulled toward a freshly noised copy
  of the reference.
* ``epsilon``: the noise estimate is pulled toward ``x_t - ref``.
* ``epsilon-scaled``: the noise estimate is pulled toward the exact noise that
  maps ``ref`` to ``x_t``, ``(x_t - sqrt(a) ref) / sqrt(1 - a)``.
* ``pred-x0``: the x0 prediction is pulled toward ``ref``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .grid import checked, lerp, same_shape

MODES = ("none", "input", "epsilon", "epsilon-scaled", "pred-x0")
BETA_LAWS = ("constant", "linear")


@dataclass(frozen=True)
class AlignmentConfig:
    """Which quantity to align, the cutoff ``K`` and the strength law.

    ``beta_law="constant"`` gives ``beta_t = beta_value``; ``"linear"`` gives
    ``beta_t = beta_value * t / T``. ``symmetry_breaking`` keeps the unaligned
    noise estimate in the DDIM direction term for the epsilon modes.
    """

    mode: str = "pred-x0"
    K: int = 200
    beta_law: str = "constant"
    beta_value: float = 0.3
    symmetry_breaking: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown alignment mode {self.mode!r}; expected one of {MODES}")
        if self.beta_law not in BETA_LAWS:
            raise ValueError(f"unknown beta law {self.beta_law!r}")
        if not 0.0 <= self.beta_value <= 1.0:
            raise ValueError("beta value must lie in [0, 1]")
        if self.K < 0:
            raise ValueError("K must be >= 0")

    def validate_for(self, T: int) -> None:
        if not 0 <= self.K <= T:
            raise ValueError(f"K={self.K} outside [0, T={T}]")

    def to_items(self) -> dict[str, str]:
        return {
            "mode": self.mode,
            "K": str(self.K),
            "beta.law": self.beta_law,
            "beta.value": repr(self.beta_value),
            "symmetry_breaking": "true" if self.symmetry_breaking else "false",
        }

    @classmethod
    def from_items(cls, items: dict[str, str]) -> "AlignmentConfig":
        known = {"mode", "K", "beta.law", "beta.value", "symmetry_breaking"}
        unknown = set(items) - known
        if unknown:
            raise ValueError(f"unknown alignment keys {sorted(unknown)}")
        kwargs = {}
        if "mode" in items:
            kwargs["mode"] = items["mode"]
        if "K" in items:
            kwargs["K"] = int(items["K"])
        if "beta.law" in items:
            kwargs["beta_law"] = items["beta.law"]
        if "beta.value" in items:
            kwargs["beta_value"] = float(items["beta.value"])
        if "symmetry_breaking" in items:
            kwargs["symmetry_breaking"] = parse_bool(items["symmetry_breaking"])
        return cls(**kwargs)


def parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("true", "yes", "1", "on"):
        return True
    if value in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def beta_at(t: int, T: int, cfg: AlignmentConfig) -> float:
    if cfg.beta_law == "constant":
        return cfg.beta_value
    return cfg.beta_value * t / T


def align_input(x_t, stoch_inv, t, K, beta_t):
    same_shape(x_t, stoch_inv)
    if t <= K:
        return x_t
    return lerp(stoch_inv, x_t, beta_t)


def align_epsilon(eps_theta, x_t, enc_I, t, K, beta_t):
    """Blend the noise estimate toward the raw residual ``x_t - enc_I``."""
    same_shape(eps_theta, x_t, enc_I)
    if t <= K:
        return eps_theta
    return lerp(checked(x_t - enc_I), eps_theta, beta_t)


def scaled_residual(x_t, enc_I, alpha_bar_t):
    return checked((x_t - math.sqrt(alpha_bar_t) * enc_I) / math.sqrt(1.0 - alpha_bar_t))


def align_epsilon_scaled(eps_theta, x_t, enc_I, alpha_bar_t, t, K, beta_t):
    same_shape(eps_theta, x_t, enc_I)
    if not 0.0 < alpha_bar_t < 1.0:
        raise ValueError(f"alpha_bar_t must lie in (0, 1), got {alpha_bar_t}")
    if t <= K:
        return eps_theta
    return lerp(scaled_residual(x_t, enc_I, alpha_bar_t), eps_theta, beta_t)


def align_pred_x0(pred, enc_I, t, K, beta_t):
    same_shape(pred, enc_I)
    if t <= K:
        return pred
    return lerp(enc_I, pred, beta_t)


def is_active(t: int, cfg: AlignmentConfig) -> bool:
    return cfg.mode != "none" and t > cfg.K


def effective_beta(t: int, T: int, cfg: AlignmentConfig) -> float:
    """``beta_t`` actually applied at ``t`` (0 outside the alignment interval)."""
    return beta_at(t, T, cfg) if is_active(t, cfg) else 0.0


__all__ = [
    "AlignmentConfig", "MODES", "BETA_LAWS", "beta_at", "effective_beta", "is_active",
    "align_input", "align_epsilon", "align_epsilon_scaled", "align_pred_x0",
    "scaled_residual", "parse_bool",
]
