"""Single-hidden-layer nonlinear autoencoders and the eigenmode-mapping estimator.

Nonlinear training has no closed-form noise marginalisation, so corruption is
sampled fresh every epoch (one draw per step). The estimator projects the
clean-input reconstruction cross-covariance onto the input eigenbasis to read
off how much of each eigen-direction the network currently reconstructs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError
from .simulate import DIVERGENCE_LIMIT, TrainingConfig, _draw_noise, init_orthogonal, init_small_random
from .spectrum import Dataset, Spectrum

LAMBDA_FLOOR_FACTOR = 1e-8  # modes below this fraction of the top eigenvalue are absent


def _identity(z):
    return z


def _identity_grad(z):
    return np.ones_like(z)


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z):
    # subgradient at exactly 0 is defined as 0
    return (z > 0.0).astype(np.float64)


def _tanh_grad(z):
    t = np.tanh(z)
    return 1.0 - t * t


ACTIVATIONS = {
    "identity": (_identity, _identity_grad),
    "relu": (_relu, _relu_grad),
    "tanh": (np.tanh, _tanh_grad),
}


@dataclass(frozen=True)
class NonlinearAE:
    """Weights plus the hidden activation name (relu, tanh or identity)."""

    w1: np.ndarray
    w2: np.ndarray
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        w1 = np.asarray(self.w1, dtype=np.float64)
        w2 = np.asarray(self.w2, dtype=np.float64)
        if w1.ndim != 2 or w2.shape != (w1.shape[1], w1.shape[0]):
            raise ValueError(f"incompatible weight shapes {w1.shape} and {w2.shape}")
        if not (np.isfinite(w1).all() and np.isfinite(w2).all()):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)


@dataclass(frozen=True)
class ModeEstimate:
    """Estimated per-mode identity-mapping ratios at one epoch.

    ratios[j] is the reconstructed fraction of eigen-direction j; entries for
    modes below the eigenvalue floor are NaN and flagged False in retained.
    """

    epoch: float
    ratios: np.ndarray
    retained: np.ndarray

    def __post_init__(self):
        ratios = np.asarray(self.ratios, dtype=np.float64)
        retained = np.asarray(self.retained, dtype=bool)
        if ratios.shape != retained.shape or ratios.ndim != 1:
            raise ValueError("ratios and retained must be 1-d arrays of equal length")
        if not np.isfinite(ratios[retained]).all():
            raise ValueError("retained ratios must be finite")
        object.__setattr__(self, "ratios", ratios)
        object.__setattr__(self, "retained", retained)


def reconstruct(model: NonlinearAE, x):
    """Clean-input reconstruction W2 phi(W1 x), rows are samples."""
    phi, _ = ACTIVATIONS[model.activation]
    return phi(x @ model.w1.T) @ model.w2.T


def backprop_grads(model: NonlinearAE, batch, corrupted_batch):
    """Full-batch gradients of (1/2N) sum ||x_i - W2 phi(W1 x_tilde_i)||^2."""
    x = np.asarray(batch, dtype=np.float64)
    x_tilde = np.asarray(corrupted_batch, dtype=np.float64)
    if x.shape != x_tilde.shape:
        raise ValueError("clean and corrupted batches must have the same shape")
    phi, dphi = ACTIVATIONS[model.activation]
    n = x.shape[0]
    z = x_tilde @ model.w1.T
    a = phi(z)
    res = a @ model.w2.T - x
    grad2 = res.T @ a / n
    grad1 = ((res @ model.w2) * dphi(z)).T @ x_tilde / n
    return grad1, grad2


def estimate_identity_map(dataset: Dataset, model: NonlinearAE, spectrum: Spectrum,
                          epoch=0.0) -> ModeEstimate:
    """Project the clean-reconstruction cross-covariance onto the input eigenbasis.

    Computes sum_i x_i xhat_i^T with xhat the model's reconstruction of the
    clean input, rotates it into the eigenbasis and divides the diagonal by
    the eigenvalues. Estimation never consumes corrupted data.
    """
    x = dataset.samples
    if spectrum.d != dataset.d:
        raise ValueError(f"spectrum dimension {spectrum.d} does not match dataset dim {dataset.d}")
    xhat = reconstruct(model, x)
    sigma_hat = x.T @ xhat
    v = spectrum.eigenvectors
    diag = np.sum(v * (sigma_hat @ v), axis=0)
    lams = spectrum.eigenvalues
    floor = LAMBDA_FLOOR_FACTOR * (lams[0] if lams.size else 0.0)
    retained = lams > floor
    ratios = np.full(lams.shape, np.nan)
    ratios[retained] = diag[retained] / lams[retained]
    return ModeEstimate(epoch=float(epoch), ratios=ratios, retained=retained)


def train_nonlinear(dataset: Dataset, spectrum: Spectrum, config: TrainingConfig,
                    activation: str):
    """Full-batch backprop with fresh per-epoch corruption; returns ModeEstimate series.

    Weight decay adds config.weight_decay * W to the gradients when nonzero.
    Estimates are recorded at epoch 0, every record_every epochs, and at the
    final epoch; the run is deterministic per seed. epochs=0 is allowed and
    returns the initial-model estimate only.
    """
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    d = dataset.d
    if config.init == "orthogonal":
        lin = init_orthogonal(d, config.hidden_dim, spectrum, config.init_scale, config.seed)
    else:
        lin = init_small_random(d, config.hidden_dim, config.init_scale, config.seed)
    w1 = lin.w1.copy()
    w2 = lin.w2.copy()
    rng = np.random.default_rng(config.seed if config.noise_seed is None else config.noise_seed)
    x = dataset.samples
    alpha = config.learning_rate
    gamma = config.weight_decay

    estimates = [estimate_identity_map(dataset, NonlinearAE(w1, w2, activation), spectrum, 0.0)]
    epochs = config.epochs
    for epoch in range(1, epochs + 1):
        e = _draw_noise(rng, config.noise, x.shape)
        x_tilde = x if e is None else x + e
        g1, g2 = backprop_grads(NonlinearAE(w1, w2, activation), x, x_tilde)
        if gamma > 0.0:
            g1 = g1 + gamma * w1
            g2 = g2 + gamma * w2
        w1 -= alpha * g1
        w2 -= alpha * g2
        peak = max(np.max(np.abs(w1)), np.max(np.abs(w2)))
        if not np.isfinite(peak) or peak > DIVERGENCE_LIMIT:
            raise DivergenceError(f"nonlinear run diverged at epoch {epoch}", step=epoch)
        if epoch % config.record_every == 0 or epoch == epochs:
            estimates.append(estimate_identity_map(
                dataset, NonlinearAE(w1, w2, activation), spectrum, float(epoch)))
    return estimates
