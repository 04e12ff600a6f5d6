"""Residual complex U-Net with optional data-consistency heads in the encoder."""

from dataclasses import dataclass

import numpy as np

from ..core import make_rng
from .layers import ComplexConv2d, Layer, ResBlock, StaleActivationError, Upsample2x


@dataclass(frozen=True)
class CvUNetConfig:
    """Architecture settings.

    ``residual_input`` adds input channel 0 to the head output (image-to-image
    use); ``data_consistency`` additionally enforces acquired k-Space columns
    after every encoder level except the bottleneck and once at the output.
    """

    in_channels: int = 3
    out_channels: int = 1
    depth: int = 2
    base_channels: int = 16
    kernel_size: int = 3
    dropout: float = 0.2
    zero_init_head: bool = True
    residual_input: bool = False
    data_consistency: bool = False

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if self.kernel_size % 2 != 1:
            raise ValueError("kernel_size must be odd")
        if self.in_channels < 1 or self.out_channels < 1 or self.base_channels < 1:
            raise ValueError("channel counts must be positive")
        if self.data_consistency and not self.residual_input:
            raise ValueError("data_consistency requires residual_input")

    def channels(self, level):
        return self.base_channels * 2 ** level


def _crop_center(k, size):
    h, w = k.shape[-2:]
    sh, sw = size
    top, left = h // 2 - sh // 2, w // 2 - sw // 2
    return k[..., top:top + sh, left:left + sw]


def _fft2c(x):
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(x, axes=(-2, -1)), norm="ortho"), axes=(-2, -1))


def _ifft2c(k):
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(k, axes=(-2, -1)), norm="ortho"), axes=(-2, -1))


class DataConsistencyLayer(Layer):
    """Image -> k-Space -> overwrite kept columns with acquired data -> image.

    ``forward`` takes the acquired k-Space already cropped to the layer's
    resolution and a boolean column mask broadcastable against it (last axis
    = columns).
    """

    def __init__(self, name="dc"):
        super().__init__(name)
        self.kspace = None

    def forward(self, x, acquired, kept):
        k = np.where(kept, acquired, _fft2c(x))
        self._cache = kept
        # the consistent k-Space itself; re-transforming the image output would add rounding
        self.kspace = k
        return _ifft2c(k).astype(x.dtype)

    def backward(self, grad):
        kept = self._take_cache()
        g = np.where(kept, 0, _fft2c(grad))
        return _ifft2c(g).astype(grad.dtype)


class CvUNet(Layer):
    """Complex residual U-Net.

    Level l has ``base_channels * 2**l`` channels; downsampling is a stride-2
    complex convolution and upsampling is nearest-neighbour doubling followed
    by a complex convolution. Encoder blocks carry dropout, decoder blocks do
    not. Spatial dims must be divisible by ``2**(depth - 1)``.
    """

    def __init__(self, config, rng=None, dtype=np.complex64):
        super().__init__("unet")
        self.config = config
        self.dtype = np.dtype(dtype)
        rng = make_rng(0) if rng is None else make_rng(rng)
        cfg, k = config, config.kernel_size
        self.stem = ComplexConv2d(cfg.in_channels, cfg.channels(0), k, rng=rng, dtype=dtype, name="stem")
        self.enc, self.down, self.dc_heads, self.dc = [], [], [], []
        for level in range(cfg.depth):
            c = cfg.channels(level)
            self.enc.append(ResBlock(c, c, k, cfg.dropout, rng=rng, dtype=dtype, name=f"enc{level}"))
            if level < cfg.depth - 1:
                extra = 1 if cfg.data_consistency else 0
                if cfg.data_consistency:
                    self.dc_heads.append(ComplexConv2d(c, 1, 1, rng=rng, dtype=dtype, zero_init=True,
                                                       name=f"dchead{level}"))
                    self.dc.append(DataConsistencyLayer(name=f"dc{level}"))
                self.down.append(ComplexConv2d(c + extra, cfg.channels(level + 1), k, stride=2, rng=rng,
                                               dtype=dtype, name=f"down{level}"))
        self.up, self.up_conv, self.dec = [], [], []
        for level in range(cfg.depth - 1):
            c = cfg.channels(level)
            self.up.append(Upsample2x(name=f"up{level}"))
            self.up_conv.append(ComplexConv2d(cfg.channels(level + 1), c, k, rng=rng, dtype=dtype,
                                              name=f"upconv{level}"))
            self.dec.append(ResBlock(2 * c, c, k, 0.0, rng=rng, dtype=dtype, name=f"dec{level}"))
        self.head = ComplexConv2d(cfg.channels(0), cfg.out_channels, 1, rng=rng, dtype=dtype,
                                  zero_init=cfg.zero_init_head, name="head")
        self.out_dc = DataConsistencyLayer(name="dc_out") if cfg.data_consistency else None

    @property
    def modules(self):
        mods = [self.stem, *self.enc, *self.dc_heads, *self.down, *self.up_conv, *self.dec, self.head]
        return mods

    def named_params(self, prefix=""):
        for m in self.modules:
            yield from m.named_params(prefix)

    def named_grads(self, prefix=""):
        for m in self.modules:
            yield from m.named_grads(prefix)

    def parameters(self):
        return [p for _, p in self.named_params()]

    def gradients(self):
        return [g for _, g in self.named_grads()]

    def count_params(self):
        """Number of real scalars (a complex entry counts twice)."""
        return int(sum(p.size * (2 if np.iscomplexobj(p) else 1) for p in self.parameters()))

    def forward(self, x, training=False, acquired=None, mask=None):
        """Run the network on a complex batch (N, C, H, W).

        With data consistency, ``acquired`` is the measured k-Space (N, H, W) or
        (N, 1, H, W) and ``mask`` a boolean column array of width W, shared
        (W,) or per sample (N, W) / (N, 1, 1, W).
        """
        cfg = self.config
        x = np.asarray(x)
        if x.ndim != 4 or x.shape[1] != cfg.in_channels:
            raise ValueError(f"expected input (N, {cfg.in_channels}, H, W), got {x.shape}")
        factor = 2 ** (cfg.depth - 1)
        if x.shape[2] % factor or x.shape[3] % factor:
            raise ValueError(f"spatial dims {x.shape[2:]} must be divisible by {factor}")
        x = x.astype(self.dtype, copy=False)
        if cfg.data_consistency:
            if acquired is None or mask is None:
                raise ValueError("data-consistency network needs acquired k-Space and mask")
            acquired = np.asarray(acquired).reshape(x.shape[0], 1, *x.shape[2:])
            mask = np.asarray(mask, dtype=bool)
            if mask.shape[-1] != x.shape[3] or mask.ndim not in (1, 2, 4):
                raise ValueError(f"mask shape {mask.shape} does not match width {x.shape[3]}")
            mask = mask.reshape(-1, 1, 1, x.shape[3])

        h = self.stem.forward(x, training)
        skips = []
        for level in range(cfg.depth):
            h = self.enc[level].forward(h, training)
            if level == cfg.depth - 1:
                break
            skips.append(h)
            if cfg.data_consistency:
                size = (x.shape[2] >> level, x.shape[3] >> level)
                acq = _crop_center(acquired, size) / 2 ** level
                kept = _crop_center(mask, (1, size[1]))
                base = _ifft2c(acq).astype(self.dtype)
                est = base + self.dc_heads[level].forward(h, training)
                d = self.dc[level].forward(est, acq, kept)
                h = np.concatenate([h, d], axis=1)
            h = self.down[level].forward(h, training)
        for level in reversed(range(cfg.depth - 1)):
            h = self.up_conv[level].forward(self.up[level].forward(h, training), training)
            h = self.dec[level].forward(np.concatenate([h, skips[level]], axis=1), training)
        out = self.head.forward(h, training)
        if cfg.residual_input:
            out = out + x[:, :cfg.out_channels]
        if self.out_dc is not None:
            out = self.out_dc.forward(out, acquired, mask)
        self._cache = x.shape
        return out

    def backward(self, grad):
        """Backpropagate d(loss)/d(output); fills ``grads`` of every layer.

        Returns the gradient with respect to the network input.
        """
        if self._cache is None:
            raise StaleActivationError("CvUNet.backward called without a forward record")
        xshape, self._cache = self._cache, None
        cfg = self.config
        grad = np.asarray(grad, dtype=self.dtype)
        gx = np.zeros(xshape, dtype=self.dtype)
        if self.out_dc is not None:
            grad = self.out_dc.backward(grad)
        if cfg.residual_input:
            gx[:, :cfg.out_channels] += grad
        g = self.head.backward(grad)
        g_skips = [None] * (cfg.depth - 1)
        for level in range(cfg.depth - 1):
            c = cfg.channels(level)
            g = self.dec[level].backward(g)
            g, g_skips[level] = g[:, :c], g[:, c:]
            g = self.up[level].backward(self.up_conv[level].backward(g))
        for level in reversed(range(cfg.depth)):
            if level < cfg.depth - 1:
                g = self.down[level].backward(g)
                if cfg.data_consistency:
                    c = cfg.channels(level)
                    g_d = g[:, c:]
                    g = g[:, :c] + self.dc_heads[level].backward(self.dc[level].backward(g_d))
                g = g + g_skips[level]
            g = self.enc[level].backward(g)
        gx += self.stem.backward(g)
        return gx

    def state_dict(self):
        return {name: p.copy() for name, p in self.named_params()}

    def load_state_dict(self, state):
        names = [n for n, _ in self.named_params()]
        missing = set(names) - set(state)
        if missing:
            raise KeyError(f"checkpoint is missing {sorted(missing)}")
        for name, p in self.named_params():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ValueError(f"{name}: checkpoint shape {value.shape} vs model {p.shape}")
            p[...] = value.real if not np.iscomplexobj(p) else value
