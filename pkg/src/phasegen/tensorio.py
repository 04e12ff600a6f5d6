"""CXT1 binary tensors plus the small text formats that sit next to them.

CXT1 layout (all little-endian, no padding)::

    0-3   magic  b"CXT1"
    4-5   version (u16) = 1
    6     dtype code (u8), 1 = complex as two float32 per sample
    7     rank (u8)
    8-    rank x u64 dims, then row-major (real, imag) float32 pairs
"""

import struct
from pathlib import Path

import numpy as np

MAGIC = b"CXT1"
VERSION = 1
DTYPE_COMPLEX64 = 1
_HEADER = struct.Struct("<4sHBB")
_SAMPLE_BYTES = 8
# refuse headers that would describe more than 2**40 bytes of payload
MAX_PAYLOAD_BYTES = 1 << 40


class TensorFormatError(ValueError):
    """Base class for malformed CXT1 files."""


class BadMagicError(TensorFormatError):
    pass


class TruncatedError(TensorFormatError):
    pass


class DimensionOverflowError(TensorFormatError):
    pass


class UnsupportedFormatError(TensorFormatError):
    pass


def encode_tensor(z):
    arr = np.asarray(z)
    if arr.ndim > 255:
        raise DimensionOverflowError(f"rank {arr.ndim} does not fit in one byte")
    if arr.dtype.kind not in "biufc":
        raise TypeError(f"cannot serialize dtype {arr.dtype}")
    data = np.ascontiguousarray(arr, dtype="<c8")
    header = _HEADER.pack(MAGIC, VERSION, DTYPE_COMPLEX64, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + dims + data.tobytes()


def decode_tensor(buf, source="<bytes>"):
    buf = memoryview(buf)
    if len(buf) < _HEADER.size:
        if bytes(buf[:4]) != MAGIC[: len(buf)]:
            raise BadMagicError(f"{source}: bad magic")
        raise TruncatedError(f"{source}: header truncated ({len(buf)} bytes)")
    magic, version, code, rank = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise BadMagicError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedFormatError(f"{source}: unsupported version {version}")
    if code != DTYPE_COMPLEX64:
        raise UnsupportedFormatError(f"{source}: unsupported dtype code {code}")
    offset = _HEADER.size
    if len(buf) < offset + 8 * rank:
        raise TruncatedError(f"{source}: dimension table truncated")
    dims = struct.unpack_from(f"<{rank}Q", buf, offset)
    offset += 8 * rank
    count = 1
    for d in dims:
        count *= d
        if count * _SAMPLE_BYTES > MAX_PAYLOAD_BYTES:
            raise DimensionOverflowError(f"{source}: dims {dims} overflow the payload limit")
    expected = count * _SAMPLE_BYTES
    available = len(buf) - offset
    if available < expected:
        raise TruncatedError(
            f"{source}: header declares {count} samples but only {available // _SAMPLE_BYTES} present"
        )
    if available > expected:
        raise TensorFormatError(f"{source}: {available - expected} trailing bytes after payload")
    data = np.frombuffer(buf, dtype="<c8", count=count, offset=offset)
    return data.astype(np.complex64).reshape(dims)


def write_tensor(path, z):
    path = Path(path)
    path.write_bytes(encode_tensor(z))
    return path


def read_tensor(path):
    path = Path(path)
    return decode_tensor(path.read_bytes(), source=str(path))


def write_manifest(path, rows):
    """Tab-separated manifest, one ``id  role  path`` line per entry."""
    lines = ["\t".join(str(c) for c in row) for row in rows]
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_manifest(path):
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
        rows.append(tuple(parts))
    return rows


def write_loss_csv(path, steps, losses, lrs):
    lines = ["step,loss,lr"]
    lines += [f"{int(s)},{float(loss)!r},{float(lr)!r}" for s, loss, lr in zip(steps, losses, lrs)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_loss_csv(path):
    rows = Path(path).read_text().splitlines()
    if not rows or rows[0] != "step,loss,lr":
        raise ValueError(f"{path}: missing step,loss,lr header")
    out = []
    for row in rows[1:]:
        s, loss, lr = row.split(",")
        out.append((int(s), float(loss), float(lr)))
    return out
