"""Central finite-difference checks for the hand-written backward passes.

Complex parameters are probed one real component at a time (real part, then
imaginary part), matching the split-real gradient convention.

Piecewise-linear activations make the loss non-differentiable on a measure
zero set. When a +h / -h probe moves some PReLU input across zero, the
difference quotient straddles a kink and is not an estimate of the local
derivative. Such components are detected through ``pattern_fn``. With
``kink_h`` they are probed again with a smaller central step and, if that
still straddles, with a one-sided second-order difference on the side that
keeps the unperturbed pattern (the side the analytic gradient describes).
Only components where both sides cross a kink are left unchecked.
"""

from dataclasses import dataclass, field

import numpy as np

from .layers import ComplexPReLU, Layer


@dataclass
class GradCheckResult:
    checked: int = 0
    skipped_small: int = 0
    skipped_kink: int = 0
    reprobed: int = 0
    one_sided: int = 0
    max_rel_error: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures

    def summary(self):
        return (f"checked={self.checked} small={self.skipped_small} kink={self.skipped_kink} "
                f"reprobed={self.reprobed} one_sided={self.one_sided} max_rel={self.max_rel_error:.2e} failures={len(self.failures)}")


def _iter_layers(obj, seen=None):
    seen = set() if seen is None else seen
    if id(obj) in seen:
        return
    seen.add(id(obj))
    if isinstance(obj, Layer):
        yield obj
        children = vars(obj).values()
    elif isinstance(obj, (list, tuple)):
        children = obj
    else:
        return
    for child in children:
        if isinstance(child, (Layer, list, tuple)):
            yield from _iter_layers(child, seen)


def activation_pattern(module):
    """Sign pattern of every PReLU input recorded by the last forward pass."""
    parts = []
    for layer in _iter_layers(module):
        if isinstance(layer, ComplexPReLU) and layer._cache is not None:
            _, _, pos_re, pos_im = layer._cache
            parts.append(np.packbits(pos_re))
            parts.append(np.packbits(pos_im))
    return b"".join(p.tobytes() for p in parts)


def _components(arr):
    view = arr.view(arr.real.dtype) if np.iscomplexobj(arr) else arr
    return view.reshape(-1)


def _probe(loss_fn, flat, j, h, pattern_fn):
    orig = flat[j]
    flat[j] = orig + h
    lp = loss_fn()
    pat_p = pattern_fn() if pattern_fn else None
    flat[j] = orig - h
    lm = loss_fn()
    pat_m = pattern_fn() if pattern_fn else None
    flat[j] = orig
    return (lp - lm) / (2 * h), (pat_p, pat_m)


def _eval(loss_fn, flat, j, offset, pattern_fn):
    orig = flat[j]
    flat[j] = orig + offset
    loss = loss_fn()
    pattern = pattern_fn() if pattern_fn else None
    flat[j] = orig
    return loss, pattern


def _one_sided(loss_fn, flat, j, h, pattern_fn, base, base_loss):
    """(-3 L(x) + 4 L(x + sh) - L(x + 2sh)) / (2sh) for the first side s whose stencil keeps ``base``."""
    for sign in (1.0, -1.0):
        l1, p1 = _eval(loss_fn, flat, j, sign * h, pattern_fn)
        if p1 != base:
            continue
        l2, p2 = _eval(loss_fn, flat, j, 2 * sign * h, pattern_fn)
        if p2 == base:
            return (-3 * base_loss + 4 * l1 - l2) / (2 * sign * h)
    return None


def check_gradients(loss_fn, params, analytic, h=1e-3, rtol=1e-3, min_grad=1e-6,
                    pattern_fn=None, indices=None, kink_h=None):
    """Compare ``analytic`` gradients with central differences of ``loss_fn``.

    params: mapping name -> array, perturbed in place and restored.
    analytic: mapping name -> gradient array of the same shape.
    pattern_fn: optional callable returning the activation pattern of the last
        ``loss_fn`` evaluation; components whose pattern changes are skipped.
    indices: optional mapping name -> iterable of flat real-component indices
        to probe (all components by default).
    kink_h: if given, components whose ``h`` stencil straddles a kink are
        probed again with this smaller step, then one-sidedly; only if every
        stencil straddles one is the component skipped.
    """
    result = GradCheckResult()
    base = None
    if pattern_fn:
        base_loss = loss_fn()
        base = pattern_fn()
    for name, p in params.items():
        flat = _components(p)
        g = _components(np.ascontiguousarray(analytic[name]).astype(p.dtype))
        probe = range(flat.size) if indices is None or name not in indices else indices[name]
        for j in probe:
            a = float(g[j])
            if abs(a) <= min_grad:
                result.skipped_small += 1
                continue
            num, (pat_p, pat_m) = _probe(loss_fn, flat, j, h, pattern_fn)
            if pattern_fn and not pat_p == pat_m == base:
                if kink_h is None:
                    result.skipped_kink += 1
                    continue
                num, (pat_p, pat_m) = _probe(loss_fn, flat, j, kink_h, pattern_fn)
                if pat_p == pat_m == base:
                    result.reprobed += 1
                else:
                    num = _one_sided(loss_fn, flat, j, kink_h, pattern_fn, base, base_loss)
                    if num is None:
                        result.skipped_kink += 1
                        continue
                    result.one_sided += 1
            rel = abs(a - num) / max(abs(a), abs(num))
            result.checked += 1
            result.max_rel_error = max(result.max_rel_error, rel)
            if rel >= rtol:
                result.failures.append((name, j, a, num, rel))
    return result
