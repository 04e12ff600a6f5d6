"""Training and sampling procedures, the naive phase baseline and dataset mixing."""

import logging
from dataclasses import asdict, dataclass, replace

import numpy as np

from .core import PolarImage, make_rng, principal_angle, unit_phase_noise, wrap_phase
from .cvnn import CvUNet, CvUNetConfig, OptimizerState, adam_step, loss_mse_complex, loss_mse_complex_grad
from .diffusion import DiffusionConfig, q_sample, reverse_step
from .kspace import apply_mask, fft2c, ifft2c, make_cartesian_mask

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Settings shared by PhaseGen and reconstruction training.

    ``n_steps`` overrides ``epochs`` when set. The learning rate decays by
    ``gamma`` at every epoch boundary.
    """

    preset: str = "toy"
    image_size: int = 32
    epochs: int = 200
    n_steps: int | None = None
    batch_size: int = 16
    learning_rate: float = 1e-4
    gamma: float = 0.995
    beta1: float = 0.9
    beta2: float = 0.99
    adam_eps: float = 1e-8
    dropout: float = 0.2
    depth: int = 2
    base_channels: int = 16
    kernel_size: int = 3
    schedule: str = "cosine"
    T: int = 1000
    cosine_offset: float = 0.008
    sigma_rule: str = "fixed-beta"
    noise_law: str = "uniform"
    closed_form: str = "polar"
    magnitude_projection: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("image_size", "epochs", "batch_size", "depth", "base_channels", "T"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_steps is not None and self.n_steps < 1:
            raise ValueError("n_steps must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.preset == "toy" and (self.image_size > 64 or self.T > 200):
            raise ValueError("toy preset is limited to 64x64 images and T <= 200")

    @property
    def diffusion(self):
        return DiffusionConfig(schedule=self.schedule, T=self.T, cosine_offset=self.cosine_offset,
                               sigma_rule=self.sigma_rule, noise_law=self.noise_law,
                               closed_form=self.closed_form)

    def unet_config(self, in_channels=3, residual_input=False, data_consistency=False):
        return CvUNetConfig(in_channels=in_channels, out_channels=1, depth=self.depth,
                            base_channels=self.base_channels, kernel_size=self.kernel_size,
                            dropout=self.dropout, zero_init_head=True,
                            residual_input=residual_input, data_consistency=data_consistency)

    def as_dict(self):
        return asdict(self)


PRESETS = {
    # full-scale values; the published model reports 30.4M (33.5M in an appendix table) parameters
    "paper-full": TrainConfig(preset="paper-full", image_size=256, epochs=200, batch_size=128,
                              learning_rate=1e-4, gamma=0.995, dropout=0.2, depth=5, base_channels=32,
                              T=1000, cosine_offset=0.008),
    "toy": TrainConfig(preset="toy", image_size=32, epochs=200, n_steps=200, batch_size=16,
                       learning_rate=2e-3, gamma=0.995, dropout=0.2, depth=2, base_channels=16,
                       T=50, cosine_offset=0.008),
}

PARAMETER_TARGETS = {"phasegen": 30_400_000, "phasegen-appendix": 33_500_000,
                     "recon-small": 209_000, "recon-large": 3_300_000}


def get_preset(name, **overrides):
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return replace(PRESETS[name], **overrides)


def _batches(n, batch_size, rng):
    """Endless stream of (index array, epoch_done) over shuffled epochs."""
    while True:
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            yield idx, start + batch_size >= n


def _total_steps(config, n):
    if config.n_steps is not None:
        return config.n_steps
    return config.epochs * -(-n // config.batch_size)


def network_input(z_t, magnitude, t, T):
    """Stack (z_t, conditioning magnitude, t/T) into an (N, 3, H, W) batch."""
    z_t = np.asarray(z_t)
    t_chan = np.broadcast_to(np.asarray(t, dtype=np.float64).reshape(-1, 1, 1) / T, z_t.shape)
    return np.stack([z_t, np.broadcast_to(magnitude, z_t.shape), t_chan], axis=1).astype(z_t.dtype)


@dataclass
class TrainResult:
    net: CvUNet
    losses: list
    lrs: list
    optimizer: OptimizerState


def train_phasegen(dataset, config, net=None):
    """Noise-prediction training on complex images (N, H, W).

    Each step draws a batch z0, timesteps t uniform on 1..T and unit-modulus
    noise, builds z_t with :func:`q_sample` and minimises the complex MSE
    between the noise and the network's prediction.
    """
    z0_all = np.asarray(dataset)
    if z0_all.ndim != 3 or len(z0_all) == 0:
        raise ValueError(f"dataset must be a non-empty (N, H, W) stack, got shape {z0_all.shape}")
    z0_all = z0_all.astype(np.complex64)
    schedule = config.diffusion.make_schedule()
    rng = make_rng(config.seed, 1)
    if net is None:
        net = CvUNet(config.unet_config(in_channels=3), rng=make_rng(config.seed, 0))
    state = OptimizerState(lr=config.learning_rate, gamma=config.gamma, beta1=config.beta1,
                           beta2=config.beta2, eps=config.adam_eps)
    names = [n for n, _ in net.named_params()]
    params = net.parameters()
    losses, lrs = [], []
    batches = _batches(len(z0_all), config.batch_size, rng)
    for step in range(_total_steps(config, len(z0_all))):
        idx, epoch_done = next(batches)
        z0 = z0_all[idx]
        t = rng.integers(1, schedule.T + 1, size=len(idx))
        eps = unit_phase_noise(z0.shape, rng, config.noise_law)
        z_t = q_sample(z0, t, eps, schedule, form=config.closed_form)
        x = network_input(z_t, np.abs(z0), t, schedule.T)
        eps_hat = net.forward(x, training=True)[:, 0]
        loss = loss_mse_complex(eps, eps_hat)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite loss at step {step}")
        net.backward(loss_mse_complex_grad(eps, eps_hat)[:, None])
        losses.append(loss)
        lrs.append(state.lr)
        adam_step(params, net.gradients(), state, names)
        if epoch_done:
            state.end_epoch()
        if step % 50 == 0:
            log.info("phasegen step %d loss %.4f lr %.3g", step, loss, state.lr)
    return TrainResult(net, losses, lrs, state)


def sample_phase(magnitude, net, config, rng, return_trace=False):
    """Generate a phase for each magnitude image by running the reverse process.

    The magnitude channel is held fixed at every step. With
    ``config.magnitude_projection`` the sample's magnitude is reset after each
    step to the forward marginal sqrt(abar) * m + sqrt(1 - abar), which is
    what the network saw in training; only the phase is carried forward.
    The returned magnitude is the input magnitude, unchanged.
    """
    mag = np.asarray(magnitude, dtype=np.float32)
    single = mag.ndim == 2
    if single:
        mag = mag[None]
    if mag.ndim != 3:
        raise ValueError(f"magnitude must be (H, W) or (N, H, W), got {np.shape(magnitude)}")
    if mag.min() < 0 or mag.max() > 1:
        raise ValueError("magnitude must be normalised to [0, 1]")
    rng = make_rng(rng)
    dcfg = config.diffusion
    schedule = dcfg.make_schedule()
    T = schedule.T
    z = unit_phase_noise(mag.shape, rng, dcfg.noise_law)
    if config.magnitude_projection:
        abar = schedule.alpha_bar_at(T)
        z = ((np.sqrt(abar) * mag + np.sqrt(1 - abar)) * z).astype(np.complex64)
    trace = []
    phase = principal_angle(z)
    for t in range(T, 0, -1):
        eps_hat = net.forward(network_input(z, mag, np.full(len(mag), t), T), training=False)[:, 0]
        eta = unit_phase_noise(mag.shape, rng, dcfg.noise_law) if t > 1 else None
        z = reverse_step(z, eps_hat, t, schedule, eta=eta, sigma_rule=dcfg.sigma_rule, form=dcfg.closed_form)
        phase = principal_angle(z)
        if config.magnitude_projection:
            abar = schedule.alpha_bar_at(t - 1)
            z = ((np.sqrt(abar) * mag + np.sqrt(1 - abar)) * np.exp(1j * phase)).astype(np.complex64)
        if return_trace:
            trace.append(phase.copy())
    out = PolarImage(mag[0] if single else mag, phase[0] if single else phase)
    return (out, trace) if return_trace else out


def normalize_minmax(magnitude):
    mag = np.asarray(magnitude, dtype=np.float64)
    lo, hi = mag.min(axis=(-2, -1), keepdims=True), mag.max(axis=(-2, -1), keepdims=True)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (mag - lo) / span


def naive_phase(magnitude, sigma=0.05, rng=None):
    """Sinusoidal phase modulated by the min-max normalised magnitude, plus Gaussian noise.

    phi(x, y) = [sin(2 pi x / N) + cos(2 pi y / N)] * M(x, y) + noise, wrapped to
    (-pi, pi]; x is the column index and y the row index.
    """
    mag = np.asarray(magnitude, dtype=np.float32)
    if mag.ndim < 2 or mag.shape[-1] != mag.shape[-2]:
        raise ValueError(f"naive phase needs square images, got shape {mag.shape}")
    if not np.isfinite(mag).all():
        raise ValueError("magnitude contains non-finite values")
    n = mag.shape[-1]
    yy, xx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    clean = (np.sin(2 * np.pi * xx / n) + np.cos(2 * np.pi * yy / n)) * normalize_minmax(mag)
    naive_noise = sigma * make_rng(rng).standard_normal(mag.shape) if sigma > 0 else 0.0
    return PolarImage(mag, wrap_phase((clean + naive_noise).astype(np.float32)))


@dataclass(frozen=True)
class MixSpec:
    real_fraction: float
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.real_fraction <= 1:
            raise ValueError(f"real_fraction must be in [0, 1], got {self.real_fraction}")


@dataclass(frozen=True)
class MixEntry:
    id: str
    role: str
    index: int


def mix_datasets(real_set, synthetic_set, spec, ids=None):
    """Combine original-phase and synthetic-phase records for a real-fraction run.

    The mixed set has ``len(synthetic_set)`` records, of which
    ``round(fraction * total)`` come from ``real_set`` (seeded, without
    replacement). When both sets have equal length they are treated as two
    versions of the same records and the rest is the complementary synthetic
    subset; otherwise the rest is drawn from ``synthetic_set``. Returns the
    mixed list and its manifest of :class:`MixEntry`.
    """
    total = len(synthetic_set)
    n_real = int(np.floor(spec.real_fraction * total + 0.5))
    n_syn = total - n_real
    if n_real > len(real_set):
        raise ValueError(f"fraction needs {n_real} real records but only {len(real_set)} exist")
    rng = make_rng(spec.seed)
    real_idx = np.sort(rng.choice(len(real_set), size=n_real, replace=False))
    aligned = len(synthetic_set) == len(real_set)
    if aligned:
        syn_idx = np.setdiff1d(np.arange(total), real_idx)
    else:
        syn_idx = np.sort(rng.choice(len(synthetic_set), size=n_syn, replace=False))
    if ids is None:
        ids = [f"rec{i:05d}" for i in range(len(real_set))]
    manifest = [MixEntry(ids[i], "real", int(i)) for i in real_idx]
    manifest += [MixEntry(ids[i] if aligned else f"syn{i:05d}", "synthetic", int(i)) for i in syn_idx]
    mixed = [real_set[i] for i in real_idx] + [synthetic_set[i] for i in syn_idx]
    return mixed, manifest


def recon_masks(n, width, acceleration, center_fraction, seed, epoch=None):
    """One mask per sample, seeded by sample index (and epoch when re-drawing)."""
    stream = () if epoch is None else (epoch,)
    return [make_cartesian_mask(width, acceleration, center_fraction, make_rng(seed, 7, i, *stream))
            for i in range(n)]


def undersample(images, masks):
    """Masked k-Space and zerofilled images for a stack of complex images."""
    k = fft2c(images)
    masked = np.stack([apply_mask(k[i], m) for i, m in enumerate(masks)])
    return masked, ifft2c(masked)


def recon_forward(net, masked_kspace, masks, training=False, return_kspace=False):
    """Run a data-consistency network on masked k-Space; returns complex images (N, H, W).

    With ``return_kspace`` also returns the k-Space of the final consistency
    step, whose acquired columns equal ``masked_kspace`` bit for bit.
    """
    kept = np.stack([m.kept for m in masks])[:, None, None, :]
    x = ifft2c(masked_kspace)[:, None]
    out = net.forward(x, training=training, acquired=masked_kspace, mask=kept)[:, 0]
    if return_kspace:
        return out, net.out_dc.kspace[:, 0]
    return out


def train_recon(dataset, masks, config, net=None, redraw_masks=False, acceleration=4.0, center_fraction=0.08):
    """Supervised reconstruction training from zerofilled inputs to fully sampled images.

    ``masks`` holds one SamplingMask per image. With ``redraw_masks`` new
    masks are drawn every epoch from ``acceleration``/``center_fraction``.
    """
    images = np.asarray(dataset, dtype=np.complex64)
    if images.ndim != 3 or len(images) == 0:
        raise ValueError(f"dataset must be a non-empty (N, H, W) stack, got shape {images.shape}")
    if len(masks) != len(images):
        raise ValueError(f"{len(masks)} masks for {len(images)} images")
    rng = make_rng(config.seed, 1)
    if net is None:
        net = CvUNet(config.unet_config(in_channels=1, residual_input=True, data_consistency=True),
                     rng=make_rng(config.seed, 0))
    state = OptimizerState(lr=config.learning_rate, gamma=config.gamma, beta1=config.beta1,
                           beta2=config.beta2, eps=config.adam_eps)
    names = [n for n, _ in net.named_params()]
    params = net.parameters()
    masks = list(masks)
    masked, _ = undersample(images, masks)
    losses, lrs = [], []
    batches = _batches(len(images), config.batch_size, rng)
    for step in range(_total_steps(config, len(images))):
        idx, epoch_done = next(batches)
        batch_masks = [masks[i] for i in idx]
        out = recon_forward(net, masked[idx], batch_masks, training=True)
        target = images[idx]
        loss = loss_mse_complex(target, out)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite loss at step {step}")
        net.backward(loss_mse_complex_grad(target, out)[:, None])
        losses.append(loss)
        lrs.append(state.lr)
        adam_step(params, net.gradients(), state, names)
        if epoch_done:
            state.end_epoch()
            if redraw_masks:
                masks = recon_masks(len(images), images.shape[-1], acceleration, center_fraction,
                                    config.seed, epoch=state.epoch)
                masked, _ = undersample(images, masks)
        if step % 50 == 0:
            log.info("recon step %d loss %.5f lr %.3g", step, loss, state.lr)
    return TrainResult(net, losses, lrs, state)
