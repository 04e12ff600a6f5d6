import numpy as np
import pytest

from phasegen.core import circular_resultant_length, from_polar, make_rng, sample_unit_phase_noise, to_polar, wrap_phase
from phasegen.diffusion import (
    DiffusionConfig,
    NoiseSchedule,
    cosine_schedule,
    forward_step,
    linear_schedule,
    q_sample,
    reverse_step,
    snr_trace,
)


def rand_c(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)).astype(np.complex64)


def closed_form_cosine_abar(t, T, s):
    f = lambda u: np.cos((u / T + s) / (1 + s) * np.pi / 2) ** 2
    return f(t) / f(0)


def test_cosine_schedule_contract():
    sch = cosine_schedule(1000, 0.008)
    assert sch.alpha_bar_at(0) == 1.0
    assert np.all(np.diff(sch.alpha_bar) < 0)
    assert sch.alpha_bar[-1] < 1e-3
    assert np.all((sch.beta > 0) & (sch.beta <= 0.999))
    assert np.array_equal(sch.alpha, 1.0 - sch.beta)


def test_cosine_matches_closed_form_before_clipping():
    sch = cosine_schedule(1000, 0.008)
    t = np.arange(1, 990)
    np.testing.assert_allclose(sch.alpha_bar[t - 1], closed_form_cosine_abar(t, 1000, 0.008), rtol=1e-9)


def test_alpha_bar_recursion():
    sch = cosine_schedule(200, 0.008)
    for t in range(2, 201):
        assert abs(sch.alpha_bar_at(t) - sch.alpha_bar_at(t - 1) * sch.alpha_at(t)) <= 1e-7 * sch.alpha_bar_at(t)


def test_linear_schedule_cases():
    np.testing.assert_array_equal(linear_schedule(1, 0.1, 0.3).beta, [0.1])
    np.testing.assert_allclose(linear_schedule(2, 0.1, 0.3).beta, [0.1, 0.3])
    assert np.all(np.diff(linear_schedule(100, 1e-4, 0.02).beta) >= 0)
    with pytest.raises(ValueError):
        linear_schedule(10, 0.3, 0.1)


def test_schedule_rejects_bad_input():
    with pytest.raises(ValueError):
        cosine_schedule(10, 0.0)
    with pytest.raises(ValueError):
        cosine_schedule(0)
    with pytest.raises(ValueError):
        NoiseSchedule(np.array([0.5, 1.0]))


def test_schedule_table_roundtrip(tmp_path):
    sch = cosine_schedule(20)
    sch.save(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().startswith("t,beta,alpha,alpha_bar\n1,")
    np.testing.assert_array_equal(NoiseSchedule.load(tmp_path / "s.csv").beta, sch.beta)


def test_snr_trace():
    snr = snr_trace(cosine_schedule(1000, 0.008))
    assert snr.size == 1000
    assert np.all(np.diff(snr) < 0) and snr[0] > snr[-1]
    assert np.isfinite(snr).all()


def test_forward_step_alpha_one_is_identity():
    rng = np.random.default_rng(0)
    z = rand_c(rng, (4, 4))
    eps = sample_unit_phase_noise(4, 4, make_rng(0))
    np.testing.assert_allclose(forward_step(z, eps, 1.0), z, atol=1e-6)


def test_forward_step_direct_evaluation():
    z = np.array([[2 + 0j]], np.complex64)
    eps = np.array([[1j]], np.complex64)
    p = to_polar(forward_step(z, eps, 0.96))
    assert abs(p.magnitude[0, 0] - (2 * np.sqrt(0.96) + 0.2)) < 1e-5
    assert abs(p.phase[0, 0] - 0.2 * np.pi / 2) < 1e-5


def test_forward_magnitude_ignores_noise_phase():
    rng = np.random.default_rng(1)
    z = rand_c(rng, (8, 8))
    e1 = sample_unit_phase_noise(8, 8, make_rng(1))
    e2 = sample_unit_phase_noise(8, 8, make_rng(2))
    np.testing.assert_allclose(np.abs(forward_step(z, e1, 0.7)), np.abs(forward_step(z, e2, 0.7)), rtol=1e-6)


def test_forward_step_rejects_non_unit_noise():
    with pytest.raises(ValueError, match="unit modulus"):
        forward_step(np.ones((2, 2)), 1.1 * np.ones((2, 2)), 0.5)


def test_q_sample_limits():
    rng = np.random.default_rng(2)
    z0 = rand_c(rng, (16, 16))
    eps = sample_unit_phase_noise(16, 16, make_rng(3))
    # a schedule whose first step adds no noise is not constructible (beta > 0), so use the smallest
    sch = NoiseSchedule(np.array([1e-12, 0.999, 0.999, 0.999]))
    np.testing.assert_allclose(q_sample(z0, 1, eps, sch), z0, atol=1e-5)
    zT = q_sample(z0, 4, eps, sch)
    abar = sch.alpha_bar_at(4)
    np.testing.assert_allclose(np.abs(zT), np.sqrt(abar) * np.abs(z0) + np.sqrt(1 - abar), rtol=1e-5)
    d = wrap_phase(np.angle(zT) - np.angle(z0) - np.angle(eps))
    assert np.abs(d).max() < 1e-3


def test_q_sample_equals_forward_step_for_T1():
    rng = np.random.default_rng(4)
    z0 = rand_c(rng, (8, 8))
    eps = sample_unit_phase_noise(8, 8, make_rng(5))
    sch = cosine_schedule(1)
    sch = NoiseSchedule(np.array([0.3]))
    np.testing.assert_allclose(q_sample(z0, 1, eps, sch), forward_step(z0, eps, sch.alpha_at(1)), atol=1e-6)


def test_q_sample_batched_timesteps():
    rng = np.random.default_rng(6)
    z0 = rand_c(rng, (3, 8, 8))
    eps = np.exp(1j * rng.uniform(-np.pi, np.pi, (3, 8, 8))).astype(np.complex64)
    sch = cosine_schedule(50)
    t = np.array([1, 25, 50])
    batched = q_sample(z0, t, eps, sch)
    for i in range(3):
        np.testing.assert_allclose(batched[i], q_sample(z0[i], int(t[i]), eps[i], sch), atol=1e-6)


def test_q_sample_rejects_bad_t():
    sch = cosine_schedule(10)
    z = np.ones((2, 2), np.complex64)
    with pytest.raises(ValueError):
        q_sample(z, 0, z, sch)
    with pytest.raises(ValueError):
        q_sample(z, 11, z, sch)


def test_additive_form():
    rng = np.random.default_rng(7)
    z0 = rand_c(rng, (4, 4))
    eps = sample_unit_phase_noise(4, 4, make_rng(8))
    sch = cosine_schedule(10)
    abar = sch.alpha_bar_at(5)
    expected = np.sqrt(abar) * z0 + np.sqrt(1 - abar) * eps
    np.testing.assert_allclose(q_sample(z0, 5, eps, sch, form="additive"), expected, atol=1e-6)


def test_magnitude_recursion_matches_scalar_law():
    sch = cosine_schedule(100, 0.008)
    z0 = from_polar(np.full((8, 8), 0.6), np.zeros((8, 8)))
    for seed in range(3):
        z, m = z0, 0.6
        rng = make_rng(seed)
        for t in range(1, 101):
            z = forward_step(z, sample_unit_phase_noise(8, 8, rng), sch.alpha_at(t))
            m = m * np.sqrt(sch.alpha_at(t)) + np.sqrt(1 - sch.alpha_at(t))
            assert np.abs(np.abs(z) - m).max() <= 1e-6 * max(1.0, m) * 4


def test_reverse_inverts_forward_at_T1():
    rng = np.random.default_rng(9)
    z0 = rand_c(rng, (16, 16))
    eps = sample_unit_phase_noise(16, 16, make_rng(10))
    sch = NoiseSchedule(np.array([0.2]))
    z1 = forward_step(z0, eps, sch.alpha_at(1))
    back = reverse_step(z1, eps, 1, sch, sigma_rule="zero")
    assert np.abs(back - z0).max() < 1e-4


def test_reverse_zero_correction_identity():
    rng = np.random.default_rng(11)
    z = rand_c(rng, (4, 4)).astype(np.complex128)
    # alpha_t -> 1: the correction coefficient and 1/sqrt(alpha) both collapse
    sch = NoiseSchedule(np.array([1e-15]))
    out = reverse_step(z, np.zeros_like(z), 1, sch, sigma_rule="zero")
    np.testing.assert_allclose(out, z, atol=1e-6)


def test_reverse_noise_perturbation_bound():
    rng = np.random.default_rng(12)
    # keep |z| well above the correction so no magnitude goes negative (that would flip by pi)
    z = from_polar(rng.uniform(2.0, 3.0, (8, 8)), rng.uniform(-3, 3, (8, 8)))
    eps_hat = sample_unit_phase_noise(8, 8, make_rng(1))
    sch = cosine_schedule(20)
    t = 10
    sigma = np.sqrt(sch.beta_at(t))
    base = to_polar(reverse_step(z, eps_hat, t, sch, eta=None))
    for seed in (2, 3):
        eta = sample_unit_phase_noise(8, 8, make_rng(seed))
        noisy = reverse_step(z, eps_hat, t, sch, eta=eta)
        # magnitude term: exactly sigma * |eta| = sigma
        raw_mag = np.abs(z) - (sch.beta_at(t) / np.sqrt(1 - sch.alpha_bar_at(t))) * np.abs(eps_hat)
        np.testing.assert_allclose(np.abs(noisy), raw_mag / np.sqrt(sch.alpha_at(t)) + sigma, rtol=1e-5)
        dphi = wrap_phase(np.angle(noisy) - base.phase)
        assert np.abs(dphi).max() <= sigma * np.pi + 1e-5


def test_reverse_t1_ignores_eta():
    rng = np.random.default_rng(13)
    z = rand_c(rng, (4, 4))
    eps_hat = sample_unit_phase_noise(4, 4, make_rng(1))
    eta = sample_unit_phase_noise(4, 4, make_rng(2))
    sch = cosine_schedule(5)
    assert np.array_equal(reverse_step(z, eps_hat, 1, sch, eta=eta), reverse_step(z, eps_hat, 1, sch))


def test_terminal_phase_uniformity():
    sch = cosine_schedule(200, 0.008)
    rng = np.random.default_rng(14)
    z0 = rand_c(rng, (100, 100))
    eps = sample_unit_phase_noise(100, 100, make_rng(15))
    zT = q_sample(z0, 200, eps, sch)
    assert circular_resultant_length(np.angle(zT) - np.angle(z0)) < 0.1


def test_diffusion_config_validation():
    assert DiffusionConfig(T=10).make_schedule().T == 10
    assert DiffusionConfig(schedule="linear", T=10).make_schedule().beta[0] == pytest.approx(1e-4)
    for bad in (dict(T=0), dict(cosine_offset=0), dict(sigma_rule="learned"), dict(noise_law="x")):
        with pytest.raises((ValueError, TypeError)):
            DiffusionConfig(**bad)
