"""Complex-valued diffusion for MRI phase synthesis, with k-Space tooling and metrics."""

from .core import PolarImage, from_polar, make_rng, sample_unit_phase_noise, to_polar, wrap_phase
from .diffusion import DiffusionConfig, NoiseSchedule, cosine_schedule, forward_step, q_sample, reverse_step
from .estimators import DCReconstructor, NaivePhase, PhaseGen
from .kspace import SamplingMask, apply_mask, data_consistency, fft2c, ifft2c, make_cartesian_mask, zerofill_recon
from .metrics import MetricReport, circular_rmse, dice, hausdorff, laplacian_unwrap, mse, nrmse, psnr, ssim
from .phantom import PhantomRecord, generate_phantom, phantom_dataset
from .pipelines import TrainConfig, get_preset, mix_datasets, naive_phase, sample_phase, train_phasegen, train_recon

__version__ = "0.1.0"

__all__ = [
    "DCReconstructor",
    "DiffusionConfig",
    "MetricReport",
    "NaivePhase",
    "NoiseSchedule",
    "PhantomRecord",
    "PhaseGen",
    "PolarImage",
    "SamplingMask",
    "TrainConfig",
    "apply_mask",
    "circular_rmse",
    "cosine_schedule",
    "data_consistency",
    "dice",
    "fft2c",
    "forward_step",
    "from_polar",
    "generate_phantom",
    "get_preset",
    "hausdorff",
    "ifft2c",
    "laplacian_unwrap",
    "make_cartesian_mask",
    "make_rng",
    "mix_datasets",
    "mse",
    "naive_phase",
    "nrmse",
    "phantom_dataset",
    "psnr",
    "q_sample",
    "reverse_step",
    "sample_phase",
    "sample_unit_phase_noise",
    "ssim",
    "to_polar",
    "train_phasegen",
    "train_recon",
    "wrap_phase",
    "zerofill_recon",
]
