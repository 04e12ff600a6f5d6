"""Noise schedules and the polar complex-valued diffusion steps.

The forward process mixes magnitudes with the (unit) noise magnitude and
perturbs the phase additively by a scaled noise angle::

    |z_t| = sqrt(a) |z_prev| + sqrt(1 - a) |eps|
    arg z_t = arg z_prev + sqrt(1 - a) arg eps

Phase shifts are applied as multiplications by unit complex numbers, so the
result is wrapped automatically.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import check_complex_image, check_positive_int
from .core import NOISE_LAWS, principal_angle

BETA_MAX = 0.999
SIGMA_RULES = ("fixed-beta", "zero")
CLOSED_FORMS = ("polar", "additive")
UNIT_TOLERANCE = 1e-5


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-timestep beta, alpha and cumulative alpha_bar for t = 1..T.

    Arrays are indexed by ``t - 1``; use :meth:`alpha_bar_at` for the
    ``t = 0`` baseline of 1.
    """

    beta: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.ndim != 1 or beta.size == 0:
            raise ValueError("beta must be a non-empty 1D array")
        if not ((beta > 0) & (beta <= BETA_MAX)).all():
            raise ValueError(f"every beta must lie in (0, {BETA_MAX}]")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        alpha = 1.0 - beta
        alpha.setflags(write=False)
        alpha_bar = np.cumprod(alpha)
        alpha_bar.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "alpha_bar", alpha_bar)

    @property
    def T(self):
        return self.beta.size

    def _index(self, t):
        if not 1 <= t <= self.T:
            raise ValueError(f"timestep {t} outside 1..{self.T}")
        return int(t) - 1

    def beta_at(self, t):
        return float(self.beta[self._index(t)])

    def alpha_at(self, t):
        return float(self.alpha[self._index(t)])

    def alpha_bar_at(self, t):
        if t == 0:
            return 1.0
        return float(self.alpha_bar[self._index(t)])

    def to_table(self):
        lines = ["t,beta,alpha,alpha_bar"]
        for t in range(1, self.T + 1):
            i = t - 1
            lines.append(f"{t},{float(self.beta[i])!r},{float(self.alpha[i])!r},{float(self.alpha_bar[i])!r}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_table())

    @classmethod
    def load(cls, path):
        rows = Path(path).read_text().splitlines()
        if not rows or rows[0] != "t,beta,alpha,alpha_bar":
            raise ValueError(f"{path}: not a schedule table")
        beta = [float(r.split(",")[1]) for r in rows[1:] if r]
        return cls(np.array(beta))


@dataclass(frozen=True)
class DiffusionConfig:
    schedule: str = "cosine"
    T: int = 1000
    cosine_offset: float = 0.008
    beta_start: float = 1e-4
    beta_end: float = 0.02
    sigma_rule: str = "fixed-beta"
    noise_law: str = "uniform"
    closed_form: str = "polar"

    def __post_init__(self):
        check_positive_int(self.T, "T")
        if self.schedule not in ("cosine", "linear"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if not self.cosine_offset > 0:
            raise ValueError("cosine_offset must be > 0")
        if self.sigma_rule not in SIGMA_RULES:
            raise ValueError(f"sigma_rule must be one of {SIGMA_RULES}")
        if self.noise_law not in NOISE_LAWS:
            raise ValueError(f"noise_law must be one of {NOISE_LAWS}")
        if self.closed_form not in CLOSED_FORMS:
            raise ValueError(f"closed_form must be one of {CLOSED_FORMS}")

    def make_schedule(self):
        if self.schedule == "cosine":
            return cosine_schedule(self.T, self.cosine_offset)
        return linear_schedule(self.T, self.beta_start, self.beta_end)


def cosine_schedule(T, s=0.008):
    """Cosine schedule; betas are clipped at 0.999 and alpha_bar is their cumulative product."""
    T = check_positive_int(T, "T")
    if not s > 0:
        raise ValueError(f"cosine offset s must be > 0, got {s}")
    t = np.arange(T + 1, dtype=np.float64)
    f = np.cos((t / T + s) / (1 + s) * np.pi / 2) ** 2
    abar = f / f[0]
    beta = 1.0 - abar[1:] / abar[:-1]
    return NoiseSchedule(np.clip(beta, None, BETA_MAX))


def linear_schedule(T, beta_start=1e-4, beta_end=0.02):
    T = check_positive_int(T, "T")
    if not 0 < beta_start <= beta_end < 1:
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    if beta_end > BETA_MAX:
        raise ValueError(f"beta_end above {BETA_MAX}")
    return NoiseSchedule(np.linspace(beta_start, beta_end, T))


def snr_trace(schedule):
    """sqrt(alpha_bar) / sqrt(1 - alpha_bar) per timestep."""
    abar = schedule.alpha_bar
    return np.sqrt(abar) / np.sqrt(1.0 - abar)


def _check_unit(eps):
    dev = np.abs(np.abs(eps) - 1.0).max()
    if dev > UNIT_TOLERANCE:
        raise ValueError(f"noise must have unit modulus; max deviation {dev:.3g}")


def _polar_mix(z, eps, keep, mix):
    """|z| * keep + |eps| * mix, with the phase of z rotated by mix * arg(eps)."""
    mag = np.abs(z).astype(np.float64) * keep + np.abs(eps).astype(np.float64) * mix
    rot = np.exp(1j * (principal_angle(z).astype(np.float64) + mix * principal_angle(eps).astype(np.float64)))
    return (mag * rot).astype(z.dtype)


def forward_step(z_prev, eps, alpha_t):
    """One polar forward diffusion step with unit-modulus noise ``eps``."""
    z_prev = check_complex_image(z_prev, "z_prev", allow_batch=True)
    eps = check_complex_image(eps, "eps", allow_batch=True)
    if z_prev.shape != eps.shape:
        raise ValueError(f"shape mismatch: z_prev {z_prev.shape} vs eps {eps.shape}")
    if not 0 < alpha_t <= 1:
        raise ValueError(f"alpha_t must lie in (0, 1], got {alpha_t}")
    _check_unit(eps)
    return _polar_mix(z_prev, eps, np.sqrt(alpha_t), np.sqrt(1.0 - alpha_t))


def q_sample(z0, t, eps, schedule, form="polar"):
    """Closed-form noising of ``z0`` to timestep ``t`` (1-based).

    ``t`` may be an int or an array with one entry per leading batch element.
    ``form="additive"`` uses sqrt(abar) z0 + sqrt(1 - abar) eps instead of the
    polar composition.
    """
    z0 = check_complex_image(z0, "z0", allow_batch=True)
    eps = check_complex_image(eps, "eps", allow_batch=True)
    if z0.shape != eps.shape:
        raise ValueError(f"shape mismatch: z0 {z0.shape} vs eps {eps.shape}")
    _check_unit(eps)
    abar = _alpha_bar_for(schedule, t, z0.ndim)
    keep, mix = np.sqrt(abar), np.sqrt(1.0 - abar)
    if form == "polar":
        return _polar_mix(z0, eps, keep, mix)
    if form == "additive":
        return (keep * z0 + mix * eps).astype(z0.dtype)
    raise ValueError(f"unknown closed form {form!r}")


def _alpha_bar_for(schedule, t, ndim):
    t_arr = np.asarray(t)
    if not np.issubdtype(t_arr.dtype, np.integer):
        raise TypeError("timestep must be integer")
    if ((t_arr < 1) | (t_arr > schedule.T)).any():
        raise ValueError(f"timestep outside 1..{schedule.T}")
    abar = schedule.alpha_bar[t_arr - 1]
    if t_arr.ndim == 1:
        abar = abar.reshape((-1,) + (1,) * (ndim - 1))
    return abar


def sigma_at(schedule, t, sigma_rule="fixed-beta"):
    if sigma_rule == "fixed-beta":
        return float(np.sqrt(schedule.beta_at(t)))
    if sigma_rule == "zero":
        schedule._index(t)
        return 0.0
    raise ValueError(f"sigma_rule must be one of {SIGMA_RULES}")


def reverse_step(z_t, eps_hat, t, schedule, eta=None, sigma_rule="fixed-beta", form="polar"):
    """One ancestral sampling step from ``t`` to ``t - 1`` in polar coordinates.

    Magnitude::

        (|z_t| - c |eps_hat|) / sqrt(alpha_t) + sigma_t |eta|

    Phase::

        arg z_t - c arg eps_hat + sigma_t arg eta

    with ``c = (1 - alpha_t) / sqrt(1 - alpha_bar_t)``. The phase is not divided
    by sqrt(alpha_t) because the forward phase is never scaled. ``eta=None``
    (and always at ``t == 1``) means no sampler noise. The magnitude is not
    clipped and may come out negative, which flips the sample by pi.
    """
    z_t = check_complex_image(z_t, "z_t", allow_batch=True)
    eps_hat = check_complex_image(eps_hat, "eps_hat", allow_batch=True)
    if z_t.shape != eps_hat.shape:
        raise ValueError(f"shape mismatch: z_t {z_t.shape} vs eps_hat {eps_hat.shape}")
    alpha = schedule.alpha_at(t)
    abar = schedule.alpha_bar_at(t)
    sigma = sigma_at(schedule, t, sigma_rule)
    coef = (1.0 - alpha) / np.sqrt(1.0 - abar)

    if form == "additive":
        out = (z_t - coef * eps_hat) / np.sqrt(alpha)
        if eta is not None and t > 1 and sigma > 0:
            out = out + sigma * check_complex_image(eta, "eta", allow_batch=True)
        return out.astype(z_t.dtype)
    if form != "polar":
        raise ValueError(f"unknown closed form {form!r}")

    mag = (np.abs(z_t).astype(np.float64) - coef * np.abs(eps_hat)) / np.sqrt(alpha)
    phase = principal_angle(z_t).astype(np.float64) - coef * principal_angle(eps_hat)
    if eta is not None and t > 1 and sigma > 0:
        eta = check_complex_image(eta, "eta", allow_batch=True)
        if eta.shape != z_t.shape:
            raise ValueError(f"shape mismatch: eta {eta.shape} vs z_t {z_t.shape}")
        mag = mag + sigma * np.abs(eta)
        phase = phase + sigma * principal_angle(eta)
    return (mag * np.exp(1j * phase)).astype(z_t.dtype)
