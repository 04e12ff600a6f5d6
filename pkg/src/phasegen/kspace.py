"""Centered orthonormal FFTs, Cartesian column masks, zerofilling and data consistency.

All operations act on the last two axes, so batches of shape ``(..., H, W)``
pass through unchanged. Masks select k-Space columns (the last axis).
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import check_complex_image, check_positive_int
from .core import make_rng, to_polar
from .tensorio import read_tensor, write_tensor


def fft2c(image):
    """Centered, orthonormal 2D DFT over the last two axes."""
    x = check_complex_image(image, "image", allow_batch=True)
    out = np.fft.ifftshift(x, axes=(-2, -1))
    out = np.fft.fft2(out, axes=(-2, -1), norm="ortho")
    return np.fft.fftshift(out, axes=(-2, -1)).astype(x.dtype, copy=False)


def ifft2c(kspace):
    """Inverse of :func:`fft2c`."""
    k = check_complex_image(kspace, "kspace", allow_batch=True)
    out = np.fft.ifftshift(k, axes=(-2, -1))
    out = np.fft.ifft2(out, axes=(-2, -1), norm="ortho")
    return np.fft.fftshift(out, axes=(-2, -1)).astype(k.dtype, copy=False)


def center_count(width, center_fraction):
    # round half away from zero; python's round() would round 0.5 to even
    return int(math.floor(center_fraction * width + 0.5))


@dataclass(frozen=True)
class SamplingMask:
    """Boolean per-column k-Space mask with its generation parameters."""

    kept: np.ndarray
    acceleration: float
    center_fraction: float
    seed: int | None = None

    def __post_init__(self):
        kept = np.asarray(self.kept, dtype=bool)
        if kept.ndim != 1 or kept.size == 0:
            raise ValueError(f"mask must be a non-empty 1D column array, got shape {kept.shape}")
        object.__setattr__(self, "kept", kept)

    @property
    def width(self):
        return self.kept.size

    @property
    def num_center(self):
        return center_count(self.width, self.center_fraction)

    @property
    def center_slice(self):
        n = self.num_center
        start = (self.width - n + 1) // 2
        return slice(start, start + n)

    @property
    def num_kept(self):
        return int(self.kept.sum())

    def as_columns(self, dtype=np.float32):
        return self.kept.astype(dtype)


def make_cartesian_mask(width, acceleration, center_fraction, rng=None):
    """Random Cartesian mask: a fully kept center block plus Bernoulli outer columns.

    Outer columns are kept with probability chosen so the expected number of
    kept columns is ``width / acceleration``.
    """
    width = check_positive_int(width, "width")
    if not acceleration >= 1:
        raise ValueError(f"acceleration must be >= 1, got {acceleration}")
    if not 0 < center_fraction < 1:
        raise ValueError(f"center_fraction must be in (0, 1), got {center_fraction}")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = make_rng(0 if rng is None else rng)

    n_center = center_count(width, center_fraction)
    if n_center < width:
        prob = (width / acceleration - n_center) / (width - n_center)
        prob = min(max(prob, 0.0), 1.0)
    else:
        prob = 1.0
    kept = rng.uniform(size=width) < prob
    start = (width - n_center + 1) // 2
    kept[start:start + n_center] = True
    return SamplingMask(kept, float(acceleration), float(center_fraction), seed)


def _check_mask_width(mask, data, name):
    if mask.width != data.shape[-1]:
        raise ValueError(f"mask width {mask.width} does not match {name} width {data.shape[-1]}")


def apply_mask(kspace, mask):
    """Zero every column the mask drops; kept columns are copied unchanged."""
    k = check_complex_image(kspace, "kspace", allow_batch=True)
    _check_mask_width(mask, k, "kspace")
    out = np.zeros_like(k)
    out[..., mask.kept] = k[..., mask.kept]
    return out


def zerofill_recon(masked_kspace):
    """Zerofilled baseline: inverse transform of the masked k-Space, in polar form."""
    return to_polar(ifft2c(masked_kspace))


def data_consistency(predicted_kspace, acquired_kspace, mask):
    """Overwrite predicted samples with acquired ones on the kept columns."""
    pred = check_complex_image(predicted_kspace, "predicted_kspace", allow_batch=True)
    acq = check_complex_image(acquired_kspace, "acquired_kspace", allow_batch=True)
    if pred.shape != acq.shape:
        raise ValueError(f"shape mismatch: predicted {pred.shape} vs acquired {acq.shape}")
    _check_mask_width(mask, pred, "kspace")
    out = pred.astype(np.result_type(pred, acq), copy=True)
    out[..., mask.kept] = acq[..., mask.kept]
    return out


def save_mask(path, mask):
    """Write the mask as a rank-1 CXT1 tensor of 0/1 plus a ``.meta`` sidecar line."""
    path = Path(path)
    write_tensor(path, mask.as_columns())
    seed = "none" if mask.seed is None else mask.seed
    meta = f"accel={mask.acceleration!r} center={mask.center_fraction!r} seed={seed}\n"
    path.with_name(path.name + ".meta").write_text(meta)
    return path


def load_mask(path):
    path = Path(path)
    cols = read_tensor(path)
    if cols.ndim != 1:
        raise ValueError(f"{path}: mask must be rank 1, got rank {cols.ndim}")
    fields = dict(item.split("=", 1) for item in path.with_name(path.name + ".meta").read_text().split())
    seed = None if fields["seed"] == "none" else int(fields["seed"])
    return SamplingMask(cols.real > 0.5, float(fields["accel"]), float(fields["center"]), seed)
