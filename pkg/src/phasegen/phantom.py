"""Seeded head-like phantoms with a smooth ground-truth phase."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import from_polar, make_rng, wrap_phase
from .tensorio import read_manifest, read_tensor, write_manifest, write_tensor

FOREGROUND_THRESHOLD = 0.05


@dataclass(frozen=True)
class PhantomRecord:
    magnitude: np.ndarray
    true_phase: np.ndarray
    brain_mask: np.ndarray | None = None

    def __post_init__(self):
        if self.magnitude.shape != self.true_phase.shape:
            raise ValueError("magnitude and phase shapes differ")
        if self.brain_mask is not None and self.brain_mask.shape != self.magnitude.shape:
            raise ValueError("brain mask shape differs from magnitude")
        if self.magnitude.min() < 0 or self.magnitude.max() > 1:
            raise ValueError("magnitude must be normalised to [0, 1]")

    @property
    def image(self):
        """Complex image magnitude * exp(i * phase); the phase is lost where magnitude is 0."""
        return from_polar(self.magnitude, self.true_phase)

    @property
    def foreground(self):
        return self.magnitude > FOREGROUND_THRESHOLD

    def to_tensor(self):
        """Stack as a (3, H, W) array: magnitude, phase, brain mask (real parts)."""
        mask = np.zeros_like(self.magnitude) if self.brain_mask is None else self.brain_mask
        return np.stack([self.magnitude, self.true_phase, mask.astype(np.float32)]).astype(np.complex64)

    @classmethod
    def from_tensor(cls, arr):
        arr = np.asarray(arr)
        if arr.ndim != 3 or arr.shape[0] != 3:
            raise ValueError(f"phantom tensor must have shape (3, H, W), got {arr.shape}")
        return cls(arr[0].real.astype(np.float32), arr[1].real.astype(np.float32), arr[2].real > 0.5)


def _ellipse(xx, yy, cx, cy, ax, ay, theta):
    c, s = np.cos(theta), np.sin(theta)
    u = (xx - cx) * c + (yy - cy) * s
    v = -(xx - cx) * s + (yy - cy) * c
    return (u / ax) ** 2 + (v / ay) ** 2 <= 1.0


def generate_phantom(seed, size=32):
    """Ellipse-composite head phantom with smooth phase.

    The magnitude is a bright scalp ring around a brain ellipse holding 3-5
    internal structures. The phase is a random quadratic polynomial plus 2-4
    broad Gaussian bumps centred on internal structures, wrapped to (-pi, pi].
    """
    if size < 16:
        raise ValueError(f"phantom size must be >= 16, got {size}")
    rng = make_rng(seed)
    coords = (np.arange(size) + 0.5) / size * 2 - 1
    yy, xx = np.meshgrid(coords, coords, indexing="ij")

    cx, cy = rng.uniform(-0.05, 0.05, size=2)
    ax, ay = rng.uniform(0.6, 0.85), rng.uniform(0.7, 0.9)
    theta = rng.uniform(-0.3, 0.3)
    head = _ellipse(xx, yy, cx, cy, ax, ay, theta)
    shrink = rng.uniform(0.8, 0.88)
    brain = _ellipse(xx, yy, cx, cy, ax * shrink, ay * shrink, theta)

    mag = np.where(head, rng.uniform(0.7, 1.0), 0.0)
    mag = np.where(brain, rng.uniform(0.35, 0.6), mag)
    centers = []
    for _ in range(rng.integers(3, 6)):
        r = rng.uniform(0, 0.55)
        ang = rng.uniform(-np.pi, np.pi)
        sx = cx + r * ax * shrink * np.cos(ang)
        sy = cy + r * ay * shrink * np.sin(ang)
        blob = _ellipse(xx, yy, sx, sy, rng.uniform(0.08, 0.25), rng.uniform(0.08, 0.25),
                        rng.uniform(-np.pi, np.pi)) & brain
        mag = np.where(blob, mag + rng.uniform(-0.3, 0.35), mag)
        centers.append((sx, sy))
    mag = np.clip(mag, 0.0, None)
    mag = np.where(head, np.maximum(mag, 0.1), 0.0)
    mag = mag / mag.max()

    c = rng.uniform(-1, 1, size=6) * np.array([0.5, 0.6, 0.6, 0.4, 0.4, 0.3])
    phase = c[0] + c[1] * xx + c[2] * yy + c[3] * xx ** 2 + c[4] * yy ** 2 + c[5] * xx * yy
    n_bumps = int(rng.integers(2, 5))
    for i in range(n_bumps):
        bx, by = centers[i % len(centers)]
        width = rng.uniform(0.25, 0.5)
        amp = rng.uniform(0.4, 1.0) * rng.choice([-1.0, 1.0])
        phase = phase + amp * np.exp(-((xx - bx) ** 2 + (yy - by) ** 2) / (2 * width ** 2))

    return PhantomRecord(mag.astype(np.float32), wrap_phase(phase.astype(np.float32)), brain)


def phantom_dataset(n, size=32, seed=0):
    """``n`` phantoms with seeds derived from ``seed``; returns records and stacked complex images."""
    records = [generate_phantom(_record_seed(seed, i), size) for i in range(n)]
    images = np.stack([r.image for r in records]) if records else np.zeros((0, size, size), np.complex64)
    return records, images


def _record_seed(seed, index):
    return int(make_rng(seed, index).integers(0, 2 ** 63))


def save_dataset(out_dir, records, role="phantom", prefix="rec"):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, rec in enumerate(records):
        name = f"{prefix}{i:05d}.cxt"
        write_tensor(out_dir / name, rec.to_tensor())
        rows.append((f"{prefix}{i:05d}", role, name))
    write_manifest(out_dir / "manifest.tsv", rows)
    return rows


def load_dataset(directory):
    """Load every record listed in ``manifest.tsv``; returns (rows, records)."""
    directory = Path(directory)
    manifest = directory / "manifest.tsv"
    if not manifest.exists():
        raise FileNotFoundError(f"no manifest at {manifest}")
    rows = read_manifest(manifest)
    records = [PhantomRecord.from_tensor(read_tensor(directory / path)) for _, _, path in rows]
    return rows, records
