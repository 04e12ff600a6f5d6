import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from phasegen import DCReconstructor, NaivePhase, PhaseGen
from phasegen.phantom import phantom_dataset

TINY = dict(n_steps=3, batch_size=4, base_channels=4, T=5)


@pytest.fixture(scope="module")
def data():
    records, images = phantom_dataset(8, 16, seed=2)
    mags = np.stack([r.magnitude for r in records])
    return images, mags


def test_params_roundtrip_and_clone():
    est = PhaseGen(T=7, learning_rate=1e-3)
    params = est.get_params()
    assert params["T"] == 7 and params["preset"] == "toy"
    est.set_params(T=9)
    assert clone(est).get_params()["T"] == 9
    rec = DCReconstructor(acceleration=8.0)
    assert clone(rec).acceleration == 8.0


def test_not_fitted():
    with pytest.raises(NotFittedError):
        PhaseGen().transform(np.zeros((1, 16, 16)))
    with pytest.raises(NotFittedError):
        DCReconstructor().predict(np.zeros((1, 16, 16), np.complex64), [None])


def test_phasegen_fit_transform(data):
    images, mags = data
    est = PhaseGen(random_state=1, **TINY).fit(images)
    assert est.loss_trace_.shape == (3,)
    assert est.config_.T == 5 and est.image_shape_ == (16, 16)
    out = est.transform(mags[:2])
    assert out.shape == (2, 16, 16) and np.iscomplexobj(out)
    np.testing.assert_allclose(np.abs(out), mags[:2], atol=1e-6)
    polar = est.sample(mags[:2])
    assert polar.magnitude.tobytes() == mags[:2].tobytes()
    assert np.array_equal(est.sample(mags[:2], random_state=5).phase,
                          est.sample(mags[:2], random_state=5).phase)


def test_phasegen_rejects_bad_input(data):
    images, _ = data
    with pytest.raises(ValueError):
        PhaseGen(**TINY).fit(np.zeros((2, 2, 16, 16), np.complex64))
    est = PhaseGen(**TINY).fit(images)
    with pytest.raises(ValueError):
        est.transform(np.full((1, 16, 16), 1.5))


def test_naive_estimator(data):
    _, mags = data
    est = NaivePhase(sigma=0.0).fit()
    out = est.fit_transform(mags)
    np.testing.assert_allclose(np.abs(out), mags, atol=1e-6)
    noisy = NaivePhase(random_state=3)
    assert np.array_equal(noisy.transform(mags), noisy.transform(mags))


def test_dc_reconstructor(data):
    images, _ = data
    est = DCReconstructor(random_state=1, **{k: v for k, v in TINY.items() if k != "T"}).fit(images)
    masked, masks, zf = est.simulate(images[:3], seed=9)
    assert zf.shape == (3, 16, 16)
    out, k = est.predict(masked, masks, return_kspace=True)
    for i, m in enumerate(masks):
        assert np.array_equal(k[i][:, m.kept], masked[i][:, m.kept])
    with pytest.raises(ValueError):
        est.predict(masked, masks[:2])
