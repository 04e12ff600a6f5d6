"""Independent brute-force oracles shared by the unit and acceptance tests."""

import math

import numpy as np


def naive_dft2c(x):
    """Direct O(N^4) centered orthonormal DFT, used as an independent oracle."""
    h, w = x.shape
    u = np.arange(h) - h // 2
    v = np.arange(w) - w // 2
    fh = np.exp(-2j * np.pi * np.outer(u, u) / h) / np.sqrt(h)
    fw = np.exp(-2j * np.pi * np.outer(v, v) / w) / np.sqrt(w)
    return fh @ x.astype(np.complex128) @ fw.T


def ssim_oracle(x, y, win=7, data_range=None):
    """Window-by-window SSIM with explicit sample statistics."""
    x = x.astype(np.float64)
    y = y.astype(np.float64)
    if data_range is None:
        data_range = x.max() - x.min()
    c1, c2 = (0.01 * data_range) ** 2, (0.03 * data_range) ** 2
    vals = []
    for i in range(x.shape[0] - win + 1):
        for j in range(x.shape[1] - win + 1):
            a = x[i:i + win, j:j + win].ravel()
            b = y[i:i + win, j:j + win].ravel()
            ma, mb = a.mean(), b.mean()
            va, vb = a.var(ddof=1), b.var(ddof=1)
            cab = ((a - ma) * (b - mb)).sum() / (a.size - 1)
            vals.append(((2 * ma * mb + c1) * (2 * cab + c2)) / ((ma ** 2 + mb ** 2 + c1) * (va + vb + c2)))
    return 100.0 * np.mean(vals)


def reduction_oracle(ref, pred):
    """MSE, NRMSE and PSNR from an explicit per-element Python loop."""
    n = ref.size
    sq = sum((float(r) - float(p)) ** 2 for r, p in zip(ref.ravel(), pred.ravel()))
    energy = sum(float(r) ** 2 for r in ref.ravel())
    peak = max(float(r) for r in ref.ravel())
    return sq / n, math.sqrt(sq / energy), 20 * math.log10(peak) - 10 * math.log10(sq / n)
