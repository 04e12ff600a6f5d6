"""Complex image arithmetic: polar conversion, phase wrapping, seeded noise."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_complex_image, check_positive_int, check_real_grid

NOISE_LAWS = ("uniform", "gaussian-wrapped")


@dataclass(frozen=True)
class PolarImage:
    """Magnitude/phase pair. Phase is stored in the principal range (-pi, pi]."""

    magnitude: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        mag = check_real_grid(self.magnitude, "magnitude", allow_batch=True)
        ph = check_real_grid(self.phase, "phase", allow_batch=True)
        if mag.shape != ph.shape:
            raise ValueError(f"magnitude {mag.shape} and phase {ph.shape} differ in shape")
        if (mag < 0).any():
            raise ValueError("magnitude must be non-negative")
        pi = pi_for(ph.dtype)
        if (ph <= -pi).any() or (ph > pi).any():
            raise ValueError("phase must lie in (-pi, pi]")
        object.__setattr__(self, "magnitude", mag)
        object.__setattr__(self, "phase", ph)

    @property
    def shape(self):
        return self.magnitude.shape

    def to_complex(self):
        return from_polar(self)


def pi_for(dtype):
    """pi rounded to the given float precision (float32 pi is slightly above pi)."""
    return np.finfo(dtype).dtype.type(np.pi) if np.dtype(dtype).kind == "f" else np.pi


def wrap_phase(phi):
    """Reduce angles to the principal range (-pi, pi]."""
    phi = np.asarray(phi)
    if phi.dtype.kind != "f":
        phi = phi.astype(np.float64)
    pi = pi_for(phi.dtype)
    wrapped = pi - np.mod(pi - phi, 2 * pi)
    # mod can round up to a full turn for tiny negative arguments
    return np.where(wrapped <= -pi, pi, wrapped)


def principal_angle(z):
    """Argument of ``z`` in (-pi, pi], with angle(0) == 0."""
    ang = np.angle(z)
    pi = pi_for(ang.dtype)
    return np.where(ang <= -pi, pi, ang)


def to_polar(z):
    z = check_complex_image(z, "z", allow_batch=True)
    return PolarImage(np.abs(z), principal_angle(z))


def from_polar(p, phase=None):
    """Build a complex image from a PolarImage or a (magnitude, phase) pair."""
    if phase is not None:
        p = PolarImage(p, phase)
    elif not isinstance(p, PolarImage):
        raise TypeError("from_polar expects a PolarImage or magnitude and phase arrays")
    dtype = np.complex128 if p.magnitude.dtype == np.float64 else np.complex64
    return (p.magnitude * np.exp(1j * p.phase.astype(np.float64))).astype(dtype)


def make_rng(seed=0, *stream):
    """Deterministic PCG64 generator; extra ints select an independent child stream.

    ``make_rng(seed, worker)`` gives the stream for one parallel worker.
    """
    if isinstance(seed, np.random.Generator):
        if stream:
            raise ValueError("stream indices need an integer seed")
        return seed
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(s) for s in stream)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def sample_noise_phase(shape, rng, law="uniform"):
    if law == "uniform":
        # negating U[-pi, pi) gives the half-open range (-pi, pi]
        return -rng.uniform(-np.pi, np.pi, size=shape)
    if law == "gaussian-wrapped":
        return wrap_phase(rng.standard_normal(size=shape))
    raise ValueError(f"unknown noise law {law!r}; expected one of {NOISE_LAWS}")


def sample_unit_phase_noise(h, w, rng, law="uniform", dtype=np.complex64):
    """Unit-modulus complex noise exp(i*u) on an h x w grid.

    ``law="uniform"`` draws u on (-pi, pi]; ``"gaussian-wrapped"`` draws a
    standard normal phase and wraps it.
    """
    h = check_positive_int(h, "h")
    w = check_positive_int(w, "w")
    return unit_phase_noise((h, w), rng, law=law, dtype=dtype)


def unit_phase_noise(shape, rng, law="uniform", dtype=np.complex64):
    """Batch-shaped variant of :func:`sample_unit_phase_noise`."""
    u = sample_noise_phase(tuple(shape), rng, law)
    return np.exp(1j * u).astype(dtype)


def circular_resultant_length(angles):
    """Mean resultant length of a set of angles (0 for uniform, 1 for constant)."""
    angles = np.asarray(angles, dtype=np.float64).ravel()
    return float(np.abs(np.mean(np.exp(1j * angles))))
