"""scikit-learn style wrappers around the training and sampling procedures.

Inputs are stacks of 2D images with shape (n_images, H, W): complex images
for fitting, magnitudes in [0, 1] for phase generation, k-Space for
reconstruction.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_complex_image, check_real_grid
from .core import from_polar, make_rng
from .kspace import zerofill_recon
from .pipelines import (
    get_preset,
    naive_phase,
    recon_forward,
    recon_masks,
    sample_phase,
    train_phasegen,
    train_recon,
    undersample,
)

_OVERRIDABLE = ("T", "n_steps", "epochs", "batch_size", "learning_rate", "depth", "base_channels",
                "dropout", "sigma_rule", "noise_law")


def _train_config(est, seed):
    overrides = {k: getattr(est, k) for k in _OVERRIDABLE if getattr(est, k, None) is not None}
    return get_preset(est.preset, seed=seed, **overrides)


def _stack(X, name, complex_=True):
    if complex_:
        X = check_complex_image(X, name, allow_batch=True)
    else:
        X = check_real_grid(X, name, allow_batch=True)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ValueError(f"{name} must be (n_images, H, W), got shape {X.shape}")
    return X


class PhaseGen(BaseEstimator, TransformerMixin):
    """Magnitude-conditioned phase generator.

    ``fit`` trains the noise-prediction network on complex images;
    ``transform`` turns magnitudes into complex images with a generated phase.
    Unset (None) hyper-parameters fall back to the named preset.
    """

    def __init__(self, preset="toy", T=None, n_steps=None, epochs=None, batch_size=None,
                 learning_rate=None, depth=None, base_channels=None, dropout=None,
                 sigma_rule=None, noise_law=None, random_state=0):
        self.preset = preset
        self.T = T
        self.n_steps = n_steps
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.depth = depth
        self.base_channels = base_channels
        self.dropout = dropout
        self.sigma_rule = sigma_rule
        self.noise_law = noise_law
        self.random_state = random_state

    def fit(self, X, y=None):
        X = _stack(X, "X")
        self.config_ = _train_config(self, self.random_state)
        result = train_phasegen(X, self.config_)
        self.net_ = result.net
        self.loss_trace_ = np.asarray(result.losses)
        self.lr_trace_ = np.asarray(result.lrs)
        self.image_shape_ = X.shape[1:]
        return self

    def sample(self, magnitude, random_state=None):
        """Generated phases as a PolarImage (magnitude passed through unchanged)."""
        check_is_fitted(self, "net_")
        mag = _stack(magnitude, "magnitude", complex_=False)
        seed = self.random_state if random_state is None else random_state
        return sample_phase(mag, self.net_, self.config_, make_rng(seed, 2))

    def transform(self, X):
        return self.sample(X).to_complex()


class NaivePhase(BaseEstimator, TransformerMixin):
    """Sinusoidal magnitude-modulated phase baseline. Stateless."""

    def __init__(self, sigma=0.05, random_state=None):
        self.sigma = sigma
        self.random_state = random_state

    def fit(self, X=None, y=None):
        self.fitted_ = True
        return self

    def transform(self, X):
        mag = _stack(X, "X", complex_=False)
        rng = make_rng(0 if self.random_state is None else self.random_state)
        return naive_phase(mag, self.sigma, rng).to_complex()


class DCReconstructor(BaseEstimator):
    """Residual complex U-Net with data consistency for Cartesian undersampling.

    ``fit`` takes fully sampled complex images and simulates masks;
    ``predict`` maps masked k-Space plus the masks used to images.
    """

    def __init__(self, acceleration=4.0, center_fraction=0.08, preset="toy", n_steps=None,
                 epochs=None, batch_size=None, learning_rate=None, depth=None, base_channels=None,
                 dropout=None, redraw_masks=False, random_state=0):
        self.acceleration = acceleration
        self.center_fraction = center_fraction
        self.preset = preset
        self.n_steps = n_steps
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.depth = depth
        self.base_channels = base_channels
        self.dropout = dropout
        self.redraw_masks = redraw_masks
        self.random_state = random_state

    def make_masks(self, n, width, seed):
        return recon_masks(n, width, self.acceleration, self.center_fraction, seed)

    def fit(self, X, y=None):
        X = _stack(X, "X")
        self.config_ = _train_config(self, self.random_state)
        masks = self.make_masks(len(X), X.shape[-1], self.random_state)
        result = train_recon(X, masks, self.config_, redraw_masks=self.redraw_masks,
                             acceleration=self.acceleration, center_fraction=self.center_fraction)
        self.net_ = result.net
        self.loss_trace_ = np.asarray(result.losses)
        return self

    def predict(self, kspace, masks, return_kspace=False):
        """Reconstructed images; with ``return_kspace`` also the data-consistent k-Space."""
        check_is_fitted(self, "net_")
        kspace = _stack(kspace, "kspace")
        if len(masks) != len(kspace):
            raise ValueError(f"{len(masks)} masks for {len(kspace)} k-Space images")
        return recon_forward(self.net_, kspace, masks, return_kspace=return_kspace)

    def simulate(self, images, seed):
        """Undersample fully sampled images; returns (masked k-Space, masks, zerofilled images)."""
        images = _stack(images, "images")
        masks = self.make_masks(len(images), images.shape[-1], seed)
        masked, _ = undersample(images, masks)
        zf = zerofill_recon(masked)
        return masked, masks, from_polar(zf)
