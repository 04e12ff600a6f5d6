"""Input validation helpers shared by the public functions and estimators."""

import numbers

import numpy as np

COMPLEX_DTYPE = np.complex64
REAL_DTYPE = np.float32


def _as_complex_dtype(dtype):
    if np.dtype(dtype) in (np.dtype(np.complex64), np.dtype(np.complex128)):
        return np.dtype(dtype)
    if np.dtype(dtype) == np.dtype(np.float64):
        return np.dtype(np.complex128)
    return np.dtype(COMPLEX_DTYPE)


def check_complex_image(z, name="image", ndim=2, allow_batch=False):
    """Validate a complex grid and return it as a complex numpy array.

    Real input is promoted. Double precision input keeps double precision;
    everything else becomes complex64.
    """
    arr = np.asarray(z)
    if arr.dtype.kind not in "biufc":
        raise TypeError(f"{name}: expected numeric data, got dtype {arr.dtype}")
    arr = arr.astype(_as_complex_dtype(arr.dtype), copy=False)
    if allow_batch:
        if arr.ndim < ndim:
            raise ValueError(f"{name}: expected at least {ndim} dims, got shape {arr.shape}")
    elif arr.ndim != ndim:
        raise ValueError(f"{name}: expected {ndim} dims, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name}: empty array")
    check_finite(arr, name)
    return arr


def check_real_grid(x, name="grid", ndim=2, allow_batch=False):
    arr = np.asarray(x)
    if arr.dtype.kind == "c":
        raise TypeError(f"{name}: expected real values, got complex")
    if arr.dtype.kind not in "biuf":
        raise TypeError(f"{name}: expected numeric data, got dtype {arr.dtype}")
    if arr.dtype != np.float64:
        arr = arr.astype(REAL_DTYPE, copy=False)
    if allow_batch:
        if arr.ndim < ndim:
            raise ValueError(f"{name}: expected at least {ndim} dims, got shape {arr.shape}")
    elif arr.ndim != ndim:
        raise ValueError(f"{name}: expected {ndim} dims, got shape {arr.shape}")
    check_finite(arr, name)
    return arr


def check_finite(arr, name="array"):
    finite = np.isfinite(arr)
    if not finite.all():
        bad = np.argwhere(~finite)
        raise ValueError(
            f"{name}: {len(bad)} non-finite value(s), first at index {tuple(int(i) for i in bad[0])}"
        )


def check_same_shape(a, b, names=("a", "b")):
    if np.shape(a) != np.shape(b):
        raise ValueError(f"shape mismatch: {names[0]} {np.shape(a)} vs {names[1]} {np.shape(b)}")


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_binary_mask(mask, name="mask"):
    arr = np.asarray(mask)
    if arr.dtype != bool:
        if arr.dtype.kind not in "biuf" or not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name}: expected a boolean or 0/1 grid")
        arr = arr.astype(bool)
    return arr
