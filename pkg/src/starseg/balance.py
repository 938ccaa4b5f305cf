"""Class-imbalance utilities and loss functions.

Oversampling draws whole images with probability proportional to how many
rare-class instances they contain.  The losses are plain numeric functions
(no gradients); they exist so the balancing strategies can be expressed and
unit-tested.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDataset, ShapeMismatch, SimplexViolation

_LOG_EPS = 1e-7


@dataclass
class SamplerWeights:
    """Normalized per-image sampling weights (sum to 1, all positive)."""

    weights: np.ndarray

    def validate(self):
        w = self.weights
        if np.any(w <= 0):
            raise ValueError("all sampling weights must be positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("sampling weights must sum to 1")


@dataclass
class LossParams:
    """Knobs for the focal and Tversky losses."""

    focal_gamma: float = 2.0
    focal_alpha: float | np.ndarray = 1.0   # scalar or per-class weights
    tversky_alpha: float = 0.5
    tversky_beta: float = 0.5
    tversky_smooth: float = 1.0
    log_eps: float = _LOG_EPS


def oversampling_weights(image_class_counts, freqs) -> SamplerWeights:
    """Inverse-frequency image weights.

    ``image_class_counts`` is an (N, T) array of per-image instance counts,
    ``freqs`` the T dataset-level class frequencies.  Image weight is
    proportional to sum_t count[t] / freq[t]; images without instances get
    the smallest positive weight among non-empty images.
    """
    counts = np.asarray(image_class_counts, dtype=np.float64)
    if counts.ndim != 2 or counts.shape[0] == 0:
        raise EmptyDataset("need an (N, T) array with N >= 1")
    freqs = np.asarray(freqs, dtype=np.float64)
    used = counts.sum(axis=0) > 0
    if np.any(freqs[used] <= 0):
        raise ValueError("zero frequency for a class that has instances")
    inv = np.zeros_like(freqs)
    inv[used] = 1.0 / freqs[used]
    raw = counts @ inv
    nonzero = raw > 0
    if not nonzero.any():
        raise EmptyDataset("no instances in any image")
    raw[~nonzero] = raw[nonzero].min()
    w = SamplerWeights(weights=raw / raw.sum())
    w.validate()
    return w


def sample_epoch(w: SamplerWeights, n_draws: int, seed=None) -> np.ndarray:
    """n_draws i.i.d. image indices from the weight distribution (seeded)."""
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    w.validate()
    rng = np.random.default_rng(seed)
    return rng.choice(len(w.weights), size=n_draws, p=w.weights)


def _check_simplex(p):
    p = np.asarray(p, dtype=np.float64)
    sums = p.sum(axis=-1)
    if np.abs(sums - 1.0).max() > 1e-5:
        raise SimplexViolation("class probabilities must sum to 1 per pixel")
    return p


def focal_loss(p, y, params: LossParams = LossParams()) -> float:
    """Focal loss -alpha_t (1 - p_t)^gamma log(p_t), mean over pixels.

    ``p`` is (..., C) on the simplex, ``y`` the matching one-hot target.
    With gamma = 0 and alpha = 1 this is exactly the categorical
    cross-entropy.
    """
    p = _check_simplex(p)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise ShapeMismatch(f"{p.shape} vs {y.shape}")
    pt = (p * y).sum(axis=-1)
    alpha = np.asarray(params.focal_alpha, dtype=np.float64)
    if alpha.ndim > 0:
        at = (alpha * y).sum(axis=-1)
    else:
        at = alpha
    logp = np.log(np.clip(pt, params.log_eps, 1.0))
    return float(np.mean(-at * (1.0 - pt) ** params.focal_gamma * logp))


def tversky_loss(p, y, params: LossParams = LossParams()) -> float:
    """Tversky loss on soft counts, averaged over foreground channels.

    TP, FN, FP are summed per channel; channel 0 (background) is skipped.
    alpha = beta = 0.5 reduces to the soft Dice loss.
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise ShapeMismatch(f"{p.shape} vs {y.shape}")
    axes = tuple(range(p.ndim - 1))
    tp = (p * y).sum(axis=axes)
    fn = ((1.0 - p) * y).sum(axis=axes)
    fp = (p * (1.0 - y)).sum(axis=axes)
    eps = params.tversky_smooth
    per_class = 1.0 - (tp + eps) / (tp + params.tversky_alpha * fn
                                    + params.tversky_beta * fp + eps)
    return float(np.mean(per_class[1:])) if p.shape[-1] > 1 else float(per_class[0])


def cce_loss(p, y, eps=_LOG_EPS) -> float:
    """Categorical cross-entropy, mean over pixels."""
    p = _check_simplex(p)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise ShapeMismatch(f"{p.shape} vs {y.shape}")
    pt = (p * y).sum(axis=-1)
    return float(np.mean(-np.log(np.clip(pt, eps, 1.0))))


def bce_loss(pred, target, eps=_LOG_EPS) -> float:
    """Binary cross-entropy, mean over elements."""
    p = np.clip(np.asarray(pred, dtype=np.float64), eps, 1.0 - eps)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeMismatch(f"{p.shape} vs {t.shape}")
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))))


def mae_loss(pred, target, mask=None) -> float:
    """Mean absolute error, optionally restricted to a foreground mask."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeMismatch(f"{p.shape} vs {t.shape}")
    err = np.abs(p - t)
    if mask is not None:
        if not np.any(mask):
            return 0.0
        err = err[mask]
    return float(np.mean(err))


def class_weight_report(freqs) -> np.ndarray:
    """Inverse-frequency class weights, normalized to mean 1 (for reporting)."""
    freqs = np.asarray(freqs, dtype=np.float64)
    if np.any(freqs <= 0):
        raise ValueError("all class frequencies must be positive")
    w = 1.0 / freqs
    return w / w.mean()
