"""Training-free diffusion editing by latent spatial alignment, on analytic toy models."""
from .alignment import AlignmentConfig
from .denoiser import Component, GaussianMixtureDenoiser, GuidanceConfig, MixtureSpec
from .editor import EditRequest, run_edit, run_mixed_edit, run_reconstruction, run_sdedit_baseline
from .schedule import NoiseSchedule, build_schedule

__all__ = [
    "AlignmentConfig", "Component", "GaussianMixtureDenoiser", "GuidanceConfig", "MixtureSpec",
    "EditRequest", "run_edit", "run_mixed_edit", "run_reconstruction", "run_sdedit_baseline",
    "NoiseSchedule", "build_schedule",
]
