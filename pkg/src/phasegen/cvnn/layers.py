"""Complex-valued layers with explicit reverse-mode gradients.

Gradients follow the split-real convention: for a real loss L and a complex
tensor z, the gradient stored for z is dL/dRe(z) + i dL/dIm(z). For a
complex-linear map y = w x this gives grad_w = grad_y * conj(x) and
grad_x = grad_y * conj(w).

Each layer caches what its backward pass needs during ``forward``; the
cache is consumed by ``backward``, so a second backward without a fresh
forward raises :class:`StaleActivationError`.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..core import make_rng


class StaleActivationError(RuntimeError):
    """backward() called without a matching forward() record."""


class Layer:
    def __init__(self, name=""):
        self.name = name
        self.params = {}
        self.grads = {}
        self._cache = None

    def _take_cache(self):
        if self._cache is None:
            raise StaleActivationError(f"{type(self).__name__} {self.name!r}: no forward record for backward")
        cache, self._cache = self._cache, None
        return cache

    def named_params(self, prefix=""):
        for key, value in self.params.items():
            yield f"{prefix}{self.name}.{key}", value

    def named_grads(self, prefix=""):
        for key in self.params:
            yield f"{prefix}{self.name}.{key}", self.grads[key]


def init_complex_kernel(shape, fan_in, rng, dtype=np.complex64):
    """Kernel with uniform phase and Rayleigh modulus of scale 1/sqrt(fan_in)."""
    modulus = rng.rayleigh(scale=1.0 / np.sqrt(fan_in), size=shape)
    phase = rng.uniform(-np.pi, np.pi, size=shape)
    return (modulus * np.exp(1j * phase)).astype(dtype)


class ComplexConv2d(Layer):
    """Same-padded complex convolution (odd kernel); stride 2 halves H and W."""

    def __init__(self, in_channels, out_channels, kernel_size=3, stride=1, bias=True,
                 rng=None, dtype=np.complex64, zero_init=False, name="conv"):
        super().__init__(name)
        if kernel_size % 2 != 1:
            raise ValueError(f"kernel_size must be odd, got {kernel_size}")
        if stride not in (1, 2):
            raise ValueError("stride must be 1 or 2")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        if zero_init:
            self.params["weight"] = np.zeros(shape, dtype=dtype)
        else:
            rng = make_rng(0) if rng is None else rng
            self.params["weight"] = init_complex_kernel(shape, in_channels * kernel_size ** 2, rng, dtype)
        if bias:
            self.params["bias"] = np.zeros(out_channels, dtype=dtype)

    def forward(self, x, training=False):
        n, c, h, w = x.shape
        if c != self.in_channels:
            raise ValueError(f"{self.name}: expected {self.in_channels} input channels, got {c}")
        k, s = self.kernel_size, self.stride
        p = k // 2
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::s, ::s]
        ho, wo = win.shape[2], win.shape[3]
        cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
        wmat = self.params["weight"].reshape(self.out_channels, -1).T
        out = cols @ wmat
        if "bias" in self.params:
            out += self.params["bias"]
        self._cache = (cols, x.shape, ho, wo)
        return out.reshape(n, ho, wo, self.out_channels).transpose(0, 3, 1, 2)

    def backward(self, grad):
        cols, xshape, ho, wo = self._take_cache()
        n, c, h, w = xshape
        k, s = self.kernel_size, self.stride
        p = k // 2
        gmat = grad.transpose(0, 2, 3, 1).reshape(-1, self.out_channels)
        weight = self.params["weight"]
        self.grads["weight"] = (gmat.T @ cols.conj()).reshape(weight.shape)
        if "bias" in self.params:
            self.grads["bias"] = gmat.sum(axis=0)
        gcols = (gmat @ weight.reshape(self.out_channels, -1).conj()).reshape(n, ho, wo, c, k, k)
        gxp = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=gcols.dtype)
        for i in range(k):
            for j in range(k):
                gxp[:, :, i:i + s * ho:s, j:j + s * wo:s] += gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return gxp[:, :, p:p + h, p:p + w] if p else gxp


class ComplexPReLU(Layer):
    """PReLU on real and imaginary parts separately, one learned slope per channel."""

    def __init__(self, channels, init=0.25, dtype=np.float32, name="prelu"):
        super().__init__(name)
        self.params["slope"] = np.full(channels, init, dtype=dtype)

    def forward(self, x, training=False):
        slope = self.params["slope"]
        if x.shape[1] != slope.size:
            raise ValueError(f"{self.name}: {slope.size} slopes for {x.shape[1]} channels")
        re, im = x.real, x.imag
        pos_re, pos_im = re > 0, im > 0
        self._cache = (re, im, pos_re, pos_im)
        return prelu_parts(x, slope)

    def backward(self, grad):
        re, im, pos_re, pos_im = self._take_cache()
        a = self.params["slope"].reshape(1, -1, 1, 1)
        g_re, g_im = grad.real, grad.imag
        neg_part = np.where(pos_re, 0, g_re * re) + np.where(pos_im, 0, g_im * im)
        self.grads["slope"] = neg_part.sum(axis=(0, 2, 3)).astype(self.params["slope"].dtype)
        out = np.where(pos_re, g_re, a * g_re) + 1j * np.where(pos_im, g_im, a * g_im)
        return out.astype(grad.dtype)


def prelu_parts(x, slopes):
    a = np.asarray(slopes).reshape(1, -1, 1, 1)
    re = np.where(x.real > 0, x.real, a * x.real)
    im = np.where(x.imag > 0, x.imag, a * x.imag)
    return (re + 1j * im).astype(x.dtype)


class ComplexDropout(Layer):
    """Drops whole complex samples; survivors are rescaled by 1 / (1 - rate)."""

    def __init__(self, rate, rng=None, name="dropout"):
        super().__init__(name)
        if not 0 <= rate < 1:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = make_rng(0) if rng is None else rng

    def forward(self, x, training=False):
        if not training or self.rate == 0:
            self._cache = 1.0
            return x
        keep = self.rng.uniform(size=x.shape) >= self.rate
        scale = (keep / (1.0 - self.rate)).astype(x.real.dtype)
        self._cache = scale
        return x * scale

    def backward(self, grad):
        return grad * self._take_cache()


def complex_dropout(x, rate, rng, training=True):
    return ComplexDropout(rate, rng).forward(np.asarray(x), training)


class Upsample2x(Layer):
    """Nearest-neighbour doubling of H and W."""

    def __init__(self, name="up"):
        super().__init__(name)

    def forward(self, x, training=False):
        self._cache = True
        return x.repeat(2, axis=2).repeat(2, axis=3)

    def backward(self, grad):
        self._take_cache()
        n, c, h, w = grad.shape
        return grad.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


class ResBlock(Layer):
    """conv -> PReLU -> [dropout] -> conv, plus identity or 1x1 projection skip, then PReLU."""

    def __init__(self, in_channels, out_channels, kernel_size=3, dropout=0.0,
                 rng=None, dtype=np.complex64, name="res"):
        super().__init__(name)
        rng = make_rng(0) if rng is None else rng
        real = np.float64 if dtype == np.complex128 else np.float32
        self.conv1 = ComplexConv2d(in_channels, out_channels, kernel_size, rng=rng, dtype=dtype, name="conv1")
        self.act1 = ComplexPReLU(out_channels, dtype=real, name="act1")
        self.drop = ComplexDropout(dropout, rng=rng, name="drop")
        self.conv2 = ComplexConv2d(out_channels, out_channels, kernel_size, rng=rng, dtype=dtype, name="conv2")
        self.proj = None
        if in_channels != out_channels:
            self.proj = ComplexConv2d(in_channels, out_channels, 1, bias=False, rng=rng, dtype=dtype, name="proj")
        self.act2 = ComplexPReLU(out_channels, dtype=real, name="act2")

    @property
    def layers(self):
        return [m for m in (self.conv1, self.act1, self.conv2, self.proj, self.act2) if m is not None]

    def named_params(self, prefix=""):
        for layer in self.layers:
            yield from layer.named_params(f"{prefix}{self.name}.")

    def named_grads(self, prefix=""):
        for layer in self.layers:
            yield from layer.named_grads(f"{prefix}{self.name}.")

    def forward(self, x, training=False):
        h = self.drop.forward(self.act1.forward(self.conv1.forward(x, training), training), training)
        h = self.conv2.forward(h, training)
        skip = self.proj.forward(x, training) if self.proj is not None else x
        return self.act2.forward(h + skip, training)

    def backward(self, grad):
        g = self.act2.backward(grad)
        gx = self.proj.backward(g) if self.proj is not None else g
        gh = self.conv1.backward(self.act1.backward(self.drop.backward(self.conv2.backward(g))))
        return gx + gh


def complex_conv2d(x, kernels, bias=None, stride=1):
    """Functional form of :class:`ComplexConv2d` with explicit kernels (out, in, k, k)."""
    kernels = np.asarray(kernels)
    x = np.asarray(x)
    if kernels.ndim != 4 or kernels.shape[2] != kernels.shape[3]:
        raise ValueError(f"kernels must have shape (out, in, k, k), got {kernels.shape}")
    if x.ndim != 4 or x.shape[1] != kernels.shape[1]:
        raise ValueError(f"input shape {x.shape} does not match kernels {kernels.shape}")
    dtype = np.result_type(x.dtype, kernels.dtype, np.complex64)
    conv = ComplexConv2d(kernels.shape[1], kernels.shape[0], kernels.shape[2], stride=stride,
                         bias=bias is not None, dtype=dtype, zero_init=True)
    conv.params["weight"] = kernels.astype(dtype)
    if bias is not None:
        conv.params["bias"] = np.asarray(bias).astype(dtype)
    return conv.forward(x.astype(dtype))


def complex_prelu(x, slopes):
    x = np.asarray(x)
    if x.ndim != 4 or x.shape[1] != np.size(slopes):
        raise ValueError(f"{np.size(slopes)} slopes for input of shape {x.shape}")
    return prelu_parts(x, slopes)
