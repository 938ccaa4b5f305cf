"""Dihedral test-time augmentation and prediction merging.

The 8 symmetries of the square act on prediction tensors.  Object and class
probabilities transform spatially; the radial-distance channels additionally
permute, because rotating the image rotates the ray directions: a quarter
turn cyclically shifts ray indices by R/4 and a horizontal flip maps index
k to (R/2 - k) mod R.  The exact shift direction is fixed by requiring
``transform_pred(encode(L), g) == encode(g . L)`` for every label image L,
which the test suite checks exhaustively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encode import PredTensors
from .errors import EmptyDataset, RaysNotDivisibleBy4, ShapeMismatch
from .geometry import RayConfig


@dataclass(frozen=True, order=True)
class D4Element:
    """rot quarter turns (counterclockwise), then an optional horizontal flip."""

    rot: int = 0
    flip: bool = False

    def __post_init__(self):
        if self.rot not in (0, 1, 2, 3):
            raise ValueError(f"rot must be in 0..3, got {self.rot}")


IDENTITY = D4Element(0, False)
ALL_ELEMENTS = tuple(D4Element(r, f) for r in range(4) for f in (False, True))


def compose(g: D4Element, h: D4Element) -> D4Element:
    """The element acting as "apply h first, then g"."""
    rot = (h.rot + (-g.rot if h.flip else g.rot)) % 4
    return D4Element(rot, g.flip ^ h.flip)


def inverse(g: D4Element) -> D4Element:
    """g^-1; flipped elements are involutions."""
    if g.flip:
        return g
    return D4Element((-g.rot) % 4, False)


def transform_image(a: np.ndarray, g: D4Element) -> np.ndarray:
    """Apply g spatially to the first two axes of an array."""
    a = np.rot90(a, g.rot, axes=(0, 1))
    if g.flip:
        a = a[:, ::-1]
    return np.ascontiguousarray(a)


def radial_permutation(g: D4Element, n_rays: int) -> np.ndarray:
    """sigma_g: ray channel k of the input lands on channel sigma[k] of the output."""
    if n_rays % 4 != 0:
        raise RaysNotDivisibleBy4(f"{n_rays} rays; dihedral TTA needs a multiple of 4")
    q = n_rays // 4
    sigma = (np.arange(n_rays) - g.rot * q) % n_rays
    if g.flip:
        sigma = (n_rays // 2 - sigma) % n_rays
    return sigma


def transform_pred(pred: PredTensors, g: D4Element, rays: RayConfig) -> PredTensors:
    """Apply g to a full prediction: spatial transform + ray permutation."""
    sigma = radial_permutation(g, rays.n_rays)
    dist_spatial = transform_image(pred.dist, g)
    dist = np.empty_like(dist_spatial)
    dist[..., sigma] = dist_spatial
    return PredTensors(
        prob=transform_image(pred.prob, g),
        dist=dist,
        classprob=transform_image(pred.classprob, g),
    )


def merge_predictions(preds) -> PredTensors:
    """Element-wise arithmetic mean of a non-empty list of prediction tensors."""
    preds = list(preds)
    if not preds:
        raise EmptyDataset("nothing to merge")
    ref = preds[0]
    for p in preds[1:]:
        if (p.prob.shape != ref.prob.shape or p.dist.shape != ref.dist.shape
                or p.classprob.shape != ref.classprob.shape):
            raise ShapeMismatch("prediction tensors disagree in shape")
    # accumulate in float64 so averaging identical float32 tensors is exact
    def mean32(arrays):
        return np.mean(arrays, axis=0, dtype=np.float64).astype(np.float32)

    return PredTensors(
        prob=mean32([p.prob for p in preds]),
        dist=mean32([p.dist for p in preds]),
        classprob=mean32([p.classprob for p in preds]),
    )


def tta_predict(pred_fn, image, rays: RayConfig, subset=None) -> PredTensors:
    """Average pred_fn over dihedral views of the image.

    For each element g: transform the image by g, predict, undo g on the
    prediction (including the ray permutation), then merge.  The subset is
    processed in canonical element order, so the output does not depend on
    the order the caller lists elements in.
    """
    elements = sorted(set(subset)) if subset is not None else list(ALL_ELEMENTS)
    if not elements:
        raise EmptyDataset("empty TTA subset")
    outs = [
        transform_pred(pred_fn(transform_image(image, g)), inverse(g), rays)
        for g in elements
    ]
    return merge_predictions(outs)


def ensemble_predict(pred_fns, image, rays: RayConfig,
                     augs_per_model=None, seed=None) -> PredTensors:
    """Merge TTA predictions from several models in a single average.

    With ``augs_per_model`` set, each model gets that many dihedral elements
    sampled uniformly without replacement from one seeded stream (drawn in
    model order); otherwise all 8 are used.  All inverse-transformed
    predictions are collected and merged once over the flat collection.
    """
    pred_fns = list(pred_fns)
    if not pred_fns:
        raise EmptyDataset("no models in ensemble")
    if augs_per_model is not None and not 1 <= augs_per_model <= 8:
        raise ValueError("augs_per_model must be in 1..8")
    rng = np.random.default_rng(seed)
    outs = []
    for fn in pred_fns:
        if augs_per_model is None:
            elements = list(ALL_ELEMENTS)
        else:
            picks = rng.choice(len(ALL_ELEMENTS), size=augs_per_model, replace=False)
            elements = sorted(ALL_ELEMENTS[i] for i in picks)
        for g in elements:
            outs.append(transform_pred(fn(transform_image(image, g)), inverse(g), rays))
    return merge_predictions(outs)
