"""Image-quality and segmentation metrics, plus Laplacian phase unwrapping."""

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import fft as sfft
from scipy.ndimage import uniform_filter
from scipy.spatial.distance import directed_hausdorff

from ._validation import check_binary_mask, check_real_grid, check_same_shape
from .core import wrap_phase

SSIM_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(ref, pred):
    ref = check_real_grid(ref, "ref", allow_batch=True).astype(np.float64)
    pred = check_real_grid(pred, "pred", allow_batch=True).astype(np.float64)
    check_same_shape(ref, pred, ("ref", "pred"))
    return ref, pred


def mse(ref, pred):
    ref, pred = _pair(ref, pred)
    return float(np.mean((ref - pred) ** 2))


def nrmse(ref, pred):
    """||ref - pred|| / ||ref||."""
    ref, pred = _pair(ref, pred)
    denom = np.linalg.norm(ref)
    if denom == 0:
        raise ValueError("nrmse is undefined for an all-zero reference")
    return float(np.linalg.norm(ref - pred) / denom)


def psnr(ref, pred):
    """PSNR in dB against the reference peak; ``inf`` when the images agree exactly."""
    ref, pred = _pair(ref, pred)
    peak = ref.max()
    if peak <= 0:
        raise ValueError("psnr needs a positive reference maximum")
    err = np.mean((ref - pred) ** 2)
    if err == 0:
        return math.inf
    return float(20 * np.log10(peak) - 10 * np.log10(err))


def ssim(ref, pred, data_range=None, win_size=SSIM_WINDOW):
    """Mean SSIM over all full ``win_size`` windows, in percent.

    Uses a uniform window with sample (N-1) covariance normalisation. The
    dynamic range defaults to that of ``ref``; pass ``data_range`` to share one
    range between both orderings.
    """
    ref, pred = _pair(ref, pred)
    if ref.ndim != 2:
        raise ValueError("ssim expects 2D images")
    if min(ref.shape) < win_size:
        raise ValueError(f"images smaller than the {win_size}x{win_size} window")
    if data_range is None:
        data_range = ref.max() - ref.min()
    if data_range <= 0:
        raise ValueError("ssim is undefined for a constant reference")

    n = win_size * win_size
    cov_norm = n / (n - 1)
    mu_x = uniform_filter(ref, win_size)
    mu_y = uniform_filter(pred, win_size)
    vx = cov_norm * (uniform_filter(ref * ref, win_size) - mu_x * mu_x)
    vy = cov_norm * (uniform_filter(pred * pred, win_size) - mu_y * mu_y)
    vxy = cov_norm * (uniform_filter(ref * pred, win_size) - mu_x * mu_y)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    smap = ((2 * mu_x * mu_y + c1) * (2 * vxy + c2)) / ((mu_x ** 2 + mu_y ** 2 + c1) * (vx + vy + c2))
    pad = (win_size - 1) // 2
    return float(100.0 * smap[pad:-pad, pad:-pad].mean())


def dice(a, b):
    """Dice overlap in percent; two empty masks count as perfect agreement."""
    a = check_binary_mask(a, "a")
    b = check_binary_mask(b, "b")
    check_same_shape(a, b)
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 100.0
    return 200.0 * int((a & b).sum()) / total


class EmptyMaskError(ValueError):
    pass


def hausdorff(a, b):
    """Symmetric Hausdorff distance between the foreground pixels, in pixels."""
    a = check_binary_mask(a, "a")
    b = check_binary_mask(b, "b")
    check_same_shape(a, b)
    pa, pb = np.argwhere(a), np.argwhere(b)
    if len(pa) == 0 or len(pb) == 0:
        raise EmptyMaskError("hausdorff distance needs two non-empty masks")
    return float(max(directed_hausdorff(pa, pb)[0], directed_hausdorff(pb, pa)[0]))


def circular_rmse(phase_a, phase_b, mask=None):
    """sqrt(mean(wrap(a - b)^2)) over ``mask`` (all pixels if omitted)."""
    a = check_real_grid(phase_a, "phase_a", allow_batch=True).astype(np.float64)
    b = check_real_grid(phase_b, "phase_b", allow_batch=True).astype(np.float64)
    check_same_shape(a, b, ("phase_a", "phase_b"))
    diff = wrap_phase(a - b)
    if mask is not None:
        mask = check_binary_mask(mask)
        check_same_shape(a, mask, ("phase", "mask"))
        diff = diff[mask]
    if diff.size == 0:
        raise EmptyMaskError("circular_rmse needs a non-empty mask")
    return float(np.sqrt(np.mean(diff ** 2)))


def _laplacian_neumann(x):
    p = np.pad(x, 1, mode="edge")
    return p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4 * x


def solve_poisson_neumann(rhs):
    """Solve the 5-point Poisson equation with reflecting boundaries via DCT-II.

    The solution is fixed to zero mean.
    """
    m, n = rhs.shape
    eig = (2 * np.cos(np.pi * np.arange(m) / m) - 2)[:, None] + (2 * np.cos(np.pi * np.arange(n) / n) - 2)[None, :]
    coef = sfft.dctn(rhs, type=2, norm="ortho")
    eig[0, 0] = 1.0
    coef = coef / eig
    coef[0, 0] = 0.0
    return sfft.idctn(coef, type=2, norm="ortho")


def laplacian_unwrap(wrapped, congruent=True):
    """Unwrap a 2D phase map from its wrap-invariant Laplacian.

    The Laplacian is estimated as cos(p) * lap(sin p) - sin(p) * lap(cos p)
    and inverted with a Neumann Poisson solve. With ``congruent=True`` the
    smooth estimate is then snapped onto the input's 2*pi lattice, so the
    output differs from ``wrapped`` by exact multiples of 2*pi (as long as
    the estimate is within pi of the true field).
    """
    phi = check_real_grid(wrapped, "wrapped").astype(np.float64)
    s, c = np.sin(phi), np.cos(phi)
    lap = c * _laplacian_neumann(s) - s * _laplacian_neumann(c)
    est = solve_poisson_neumann(lap)
    if congruent:
        est = est + wrap_phase(phi - est)
    return est


@dataclass
class MetricReport:
    """One row of reconstruction / segmentation / phase metrics. Missing entries stay None."""

    ssim: float | None = None
    psnr: float | None = None
    mse: float | None = None
    nrmse: float | None = None
    dsc: float | None = None
    hd: float | None = None
    circ_rmse: float | None = None

    HEADER = "ssim,psnr,mse,nrmse,dsc,hd,circ_rmse"

    def to_csv_row(self):
        cells = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                cells.append("")
            elif math.isinf(v):
                cells.append("inf" if v > 0 else "-inf")
            else:
                cells.append(repr(float(v)))
        return ",".join(cells)

    @classmethod
    def from_csv_row(cls, row):
        cells = row.strip().split(",")
        names = [f.name for f in fields(cls)]
        if len(cells) != len(names):
            raise ValueError(f"expected {len(names)} columns, got {len(cells)}")
        return cls(**{n: (float(c) if c else None) for n, c in zip(names, cells)})

    def as_dict(self):
        return asdict(self)


def image_report(ref, pred, ref_mask=None, pred_mask=None, phase_ref=None, phase_pred=None, phase_mask=None):
    """Fill a MetricReport from magnitude images and optional masks / phases."""
    report = MetricReport(
        ssim=ssim(ref, pred),
        psnr=psnr(ref, pred),
        mse=mse(ref, pred),
        nrmse=nrmse(ref, pred),
    )
    if ref_mask is not None and pred_mask is not None:
        report.dsc = dice(ref_mask, pred_mask)
        report.hd = hausdorff(ref_mask, pred_mask)
    if phase_ref is not None and phase_pred is not None:
        report.circ_rmse = circular_rmse(phase_ref, phase_pred, phase_mask)
    return report
