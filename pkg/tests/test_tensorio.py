import struct

import numpy as np
import pytest

from phasegen.tensorio import (
    BadMagicError,
    DimensionOverflowError,
    TruncatedError,
    decode_tensor,
    encode_tensor,
    read_loss_csv,
    read_manifest,
    read_tensor,
    write_loss_csv,
    write_manifest,
    write_tensor,
)


def test_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    z = (rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))).astype(np.complex64)
    path = write_tensor(tmp_path / "z.cxt", z)
    back = read_tensor(path)
    assert back.dtype == np.complex64
    assert back.tobytes() == z.tobytes()


def test_header_layout():
    buf = encode_tensor(np.array([[1 + 2j, 3 - 4j]], dtype=np.complex64))
    assert buf[:4] == bytes([0x43, 0x58, 0x54, 0x31])
    assert struct.unpack("<H", buf[4:6])[0] == 1
    assert buf[6] == 1 and buf[7] == 2
    assert struct.unpack("<2Q", buf[8:24]) == (1, 2)
    assert struct.unpack("<4f", buf[24:]) == (1.0, 2.0, 3.0, -4.0)
    assert len(buf) == 8 + 16 + 2 * 8


def test_bad_magic(tmp_path):
    buf = bytearray(encode_tensor(np.zeros((2, 2), np.complex64)))
    buf[0:4] = b"NOPE"
    (tmp_path / "bad.cxt").write_bytes(bytes(buf))
    with pytest.raises(BadMagicError, match="bad magic"):
        read_tensor(tmp_path / "bad.cxt")


def test_truncated_payload():
    header = b"CXT1" + struct.pack("<HBB", 1, 1, 2) + struct.pack("<2Q", 4, 4)
    payload = np.zeros(3, np.complex64).tobytes()
    with pytest.raises(TruncatedError, match="truncated|only 3"):
        decode_tensor(header + payload)


def test_dimension_overflow():
    header = b"CXT1" + struct.pack("<HBB", 1, 1, 2) + struct.pack("<2Q", 2 ** 40, 2 ** 40)
    with pytest.raises(DimensionOverflowError):
        decode_tensor(header)


def test_error_kinds_are_distinct():
    assert not issubclass(BadMagicError, TruncatedError)
    assert not issubclass(TruncatedError, DimensionOverflowError)


def test_rank_one_and_three(tmp_path):
    for shape in [(5,), (3, 4, 2)]:
        z = np.arange(np.prod(shape), dtype=np.float32).reshape(shape)
        back = read_tensor(write_tensor(tmp_path / "t.cxt", z))
        assert back.shape == shape
        assert np.array_equal(back.real, z)


def test_manifest_and_loss_csv(tmp_path):
    write_manifest(tmp_path / "m.tsv", [("a", "real", "a.cxt"), ("b", "synthetic", "b.cxt")])
    assert read_manifest(tmp_path / "m.tsv") == [("a", "real", "a.cxt"), ("b", "synthetic", "b.cxt")]
    write_loss_csv(tmp_path / "loss.csv", [0, 1], [np.float64(1.5), 0.25], [1e-3, 1e-3])
    assert (tmp_path / "loss.csv").read_text().splitlines()[0] == "step,loss,lr"
    assert read_loss_csv(tmp_path / "loss.csv") == [(0, 1.5, 1e-3), (1, 0.25, 1e-3)]
