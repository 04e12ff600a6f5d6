import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phasegen.core import make_rng
from phasegen.kspace import (
    SamplingMask,
    apply_mask,
    center_count,
    data_consistency,
    fft2c,
    ifft2c,
    load_mask,
    make_cartesian_mask,
    save_mask,
    zerofill_recon,
)
from phasegen.metrics import ssim
from phasegen.phantom import generate_phantom

from oracles import naive_dft2c


def rand_c(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)).astype(np.complex64)


def test_center_impulse_to_constant():
    x = np.zeros((8, 8), np.complex64)
    x[4, 4] = 1
    np.testing.assert_allclose(fft2c(x), np.full((8, 8), 1 / 8), atol=1e-7)


def test_constant_kspace_to_center_impulse():
    k = np.full((8, 8), 1 / 8, dtype=np.complex64)
    expected = np.zeros((8, 8))
    expected[4, 4] = 1
    np.testing.assert_allclose(ifft2c(k), expected, atol=1e-7)


@pytest.mark.parametrize("shape", [(8, 8), (7, 9), (5, 6)])
def test_fft2c_matches_direct_dft(shape):
    x = rand_c(np.random.default_rng(1), shape)
    np.testing.assert_allclose(fft2c(x), naive_dft2c(x), atol=1e-5)


def test_roundtrip_and_parseval_64():
    rng = np.random.default_rng(2)
    z = rand_c(rng, (64, 64))
    assert np.abs(ifft2c(fft2c(z)) - z).max() < 1e-5
    k = rand_c(rng, (64, 64))
    assert np.abs(fft2c(ifft2c(k)) - k).max() < 1e-5
    e_img = np.sum(np.abs(z.astype(np.complex128)) ** 2)
    e_k = np.sum(np.abs(fft2c(z).astype(np.complex128)) ** 2)
    assert abs(e_img - e_k) / e_img < 1e-4


def test_ifft_linearity():
    rng = np.random.default_rng(3)
    k1, k2 = rand_c(rng, (16, 16)), rand_c(rng, (16, 16))
    a = 0.7 - 1.3j
    np.testing.assert_allclose(ifft2c(a * k1 + k2), a * ifft2c(k1) + ifft2c(k2), atol=1e-5)


def test_batched_transform_matches_per_image():
    rng = np.random.default_rng(4)
    z = rand_c(rng, (3, 16, 16))
    np.testing.assert_allclose(fft2c(z)[1], fft2c(z[1]), atol=1e-6)


def test_mask_center_block_sizes():
    m = make_cartesian_mask(320, 4, 0.08, rng=0)
    assert m.num_center == 26
    assert m.kept[m.center_slice].all()
    assert make_cartesian_mask(320, 8, 0.04, rng=0).num_center == 13


def test_acceleration_one_keeps_everything():
    assert make_cartesian_mask(64, 1, 0.08, rng=3).kept.all()


def test_mask_mean_kept_columns():
    counts = [make_cartesian_mask(320, 4, 0.08, make_rng(11, i)).num_kept for i in range(1000)]
    assert abs(np.mean(counts) - 80) <= 3


@settings(max_examples=100, deadline=None)
@given(st.integers(16, 1024), st.floats(0.01, 0.5), st.floats(1.0, 12.0), st.integers(0, 2 ** 32))
def test_center_block_size_property(width, frac, accel, seed):
    m = make_cartesian_mask(width, accel, frac, rng=seed)
    n = int(np.floor(frac * width + 0.5))
    assert m.num_center == n
    assert m.kept[m.center_slice].all()
    assert m.kept[m.center_slice].size == n
    assert m.num_kept >= n


def test_rounding_is_half_away_from_zero():
    assert center_count(100, 0.125) == 13  # 12.5 -> 13, python round() would give 12
    assert center_count(320, 0.08) == 26


def test_mask_validation():
    with pytest.raises(ValueError):
        make_cartesian_mask(0, 4, 0.08)
    with pytest.raises(ValueError):
        make_cartesian_mask(32, 0.5, 0.08)
    with pytest.raises(ValueError):
        make_cartesian_mask(32, 4, 1.0)


def test_apply_mask_cases():
    rng = np.random.default_rng(5)
    k = rand_c(rng, (8, 8))
    full = SamplingMask(np.ones(8, bool), 1.0, 0.25)
    assert np.array_equal(apply_mask(k, full), k)
    center_only = SamplingMask(np.array([0, 0, 0, 1, 1, 0, 0, 0], bool), 4.0, 0.25)
    out = apply_mask(k, center_only)
    assert np.array_equal(np.flatnonzero(np.abs(out).sum(axis=0)), [3, 4])
    m = make_cartesian_mask(8, 2, 0.25, rng=9)
    oracle = k * m.kept.astype(np.float32)[None, :]
    assert np.array_equal(apply_mask(k, m), oracle)


def test_apply_mask_width_mismatch():
    with pytest.raises(ValueError, match="width"):
        apply_mask(np.zeros((8, 8), np.complex64), SamplingMask(np.ones(6, bool), 1.0, 0.5))


def test_zerofill_full_sampling_recovers_magnitude():
    rng = np.random.default_rng(6)
    z = rand_c(rng, (16, 16))
    p = zerofill_recon(fft2c(z))
    np.testing.assert_allclose(p.magnitude, np.abs(z), atol=1e-5)
    assert (zerofill_recon(np.zeros((8, 8), np.complex64)).magnitude == 0).all()


def test_zerofill_loses_ssim_on_phantom():
    rec = generate_phantom(3, 64)
    k = fft2c(rec.image)
    m = make_cartesian_mask(64, 4, 0.08, rng=1)
    zf = zerofill_recon(apply_mask(k, m))
    assert ssim(np.abs(rec.image), zf.magnitude) < 100.0


def test_data_consistency_cases():
    rng = np.random.default_rng(7)
    pred, acq = rand_c(rng, (8, 8)), rand_c(rng, (8, 8))
    all_kept = SamplingMask(np.ones(8, bool), 1.0, 0.25)
    none_kept = SamplingMask(np.zeros(8, bool), 4.0, 0.25)
    assert np.array_equal(data_consistency(pred, acq, all_kept), acq)
    assert np.array_equal(data_consistency(pred, acq, none_kept), pred)
    m = make_cartesian_mask(8, 2, 0.25, rng=4)
    out = data_consistency(pred, acq, m)
    for c in range(8):
        expected = acq[:, c] if m.kept[c] else pred[:, c]
        assert np.array_equal(out[:, c], expected)
    assert np.array_equal(data_consistency(out, acq, m), out)


def test_data_consistency_shape_mismatch():
    m = SamplingMask(np.ones(8, bool), 1.0, 0.25)
    with pytest.raises(ValueError):
        data_consistency(np.zeros((8, 8)), np.zeros((4, 8)), m)


def test_mask_file_roundtrip(tmp_path):
    m = make_cartesian_mask(32, 4, 0.08, rng=12)
    save_mask(tmp_path / "mask.cxt", m)
    assert (tmp_path / "mask.cxt.meta").read_text().strip() == "accel=4.0 center=0.08 seed=12"
    back = load_mask(tmp_path / "mask.cxt")
    assert np.array_equal(back.kept, m.kept)
    assert (back.acceleration, back.center_fraction, back.seed) == (4.0, 0.08, 12)
