"""Ground-truth target encoding: label image -> prediction tensors.

Besides producing training targets, the encoder doubles as a perfect
"prediction oracle": decoding its output should recover the label image,
which is how most of the decoder's tests work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import ndimage

from .errors import BackgroundPixel, EmptyDataset, ShapeMismatch
from .geometry import RayConfig


@dataclass
class LabelImage:
    """Integer instance map (0 = background) plus per-instance class labels."""

    instance_map: np.ndarray
    classes: dict

    def validate(self):
        inst = self.instance_map
        if inst.ndim != 2:
            raise ShapeMismatch(f"instance map must be 2-D, got shape {inst.shape}")
        ids = set(int(i) for i in np.unique(inst) if i > 0)
        if ids != set(self.classes):
            missing = ids ^ set(self.classes)
            raise ValueError(f"instance ids and class assignment disagree: {sorted(missing)}")

    @property
    def shape(self):
        return self.instance_map.shape


@dataclass
class PredTensors:
    """Per-pixel object probability, R radial distances, T+1 class probabilities."""

    prob: np.ndarray       # (H, W) in [0, 1]
    dist: np.ndarray       # (H, W, R) >= 0
    classprob: np.ndarray  # (H, W, T+1), channel 0 = background

    def validate(self):
        if self.prob.ndim != 2 or self.dist.ndim != 3 or self.classprob.ndim != 3:
            raise ShapeMismatch("prob must be 2-D, dist and classprob 3-D")
        if not (self.prob.shape == self.dist.shape[:2] == self.classprob.shape[:2]):
            raise ShapeMismatch(
                f"inconsistent H, W: {self.prob.shape} / {self.dist.shape} / {self.classprob.shape}"
            )
        sums = self.classprob.sum(axis=-1)
        if np.abs(sums - 1.0).max() > 1e-5:
            raise ShapeMismatch("classprob does not sum to 1 at every pixel")

    @property
    def n_rays(self):
        return self.dist.shape[2]

    @property
    def n_classes(self):
        return self.classprob.shape[2] - 1


def _step_tables(rays: RayConfig, max_t: int):
    """Integer ray-step offsets rint(t * direction) for t = 0..max_t.

    Rounding the displacement (not the absolute position) keeps stepping
    exactly symmetric under the dihedral group: rint is odd under negation.
    """
    t = np.arange(max_t + 1, dtype=np.float64)[:, None]
    dr = np.rint(t * rays.sin[None, :]).astype(np.int64)
    dc = np.rint(t * rays.cos[None, :]).astype(np.int64)
    return dr, dc


@njit(cache=True)
def _radial_kernel(inst, fgr, fgc, dr, dc):  # pragma: no cover - jitted
    H, W = inst.shape
    n = fgr.shape[0]
    R = dr.shape[1]
    tmax = dr.shape[0] - 1
    out = np.zeros((n, R), dtype=np.float32)
    for i in range(n):
        r = fgr[i]
        c = fgc[i]
        idv = inst[r, c]
        for k in range(R):
            t = 1
            while t <= tmax:
                rr = r + dr[t, k]
                cc = c + dc[t, k]
                if rr < 0 or rr >= H or cc < 0 or cc >= W or inst[rr, cc] != idv:
                    break
                t += 1
            out[i, k] = t
    return out


def radial_distance(label: LabelImage, pixel, rays: RayConfig) -> np.ndarray:
    """Distances from ``pixel`` to its instance boundary along each ray.

    d_k is the smallest step count t >= 1 for which the pixel at
    ``pixel + rint(t * direction_k)`` lies outside the instance (different
    id or off the image).
    """
    inst = label.instance_map
    r, c = pixel
    if inst[r, c] == 0:
        raise BackgroundPixel(f"pixel {pixel} is background")
    H, W = inst.shape
    dr, dc = _step_tables(rays, int(np.ceil(np.hypot(H, W))) + 2)
    out = _radial_kernel(
        np.ascontiguousarray(inst.astype(np.int32)),
        np.array([r], dtype=np.int64),
        np.array([c], dtype=np.int64),
        dr, dc,
    )
    return out[0].astype(np.float64)


def _edt_prob(inst: np.ndarray) -> np.ndarray:
    """Per-instance Euclidean distance to boundary, normalized to max 1.

    The image edge counts as boundary (instances are padded with background
    before the distance transform).
    """
    prob = np.zeros(inst.shape, dtype=np.float32)
    for sl, idv in zip(ndimage.find_objects(inst), range(1, inst.max() + 1)):
        if sl is None:
            continue
        rs, cs = sl
        r0, r1 = rs.start, rs.stop
        c0, c1 = cs.start, cs.stop
        mask = np.pad(inst[r0:r1, c0:c1] == idv, 1)
        edt = ndimage.distance_transform_edt(mask)[1:-1, 1:-1]
        m = edt.max()
        if m > 0:
            sub = prob[r0:r1, c0:c1]
            sel = inst[r0:r1, c0:c1] == idv
            sub[sel] = (edt[sel] / m).astype(np.float32)
    return prob


def encode_targets(label: LabelImage, rays: RayConfig, n_classes: int,
                   prob_mode: str = "edt") -> PredTensors:
    """Encode a label image into the three prediction tensors.

    prob_mode "binary": prob is the foreground indicator.  prob_mode "edt":
    prob is the per-instance normalized distance-to-boundary (max 1 at the
    instance interior), which places decoded polygon centers near medial axes.
    """
    if prob_mode not in ("binary", "edt"):
        raise ValueError(f"unknown prob_mode {prob_mode!r}")
    if n_classes < 1:
        raise ValueError("need at least one class")
    label.validate()
    inst = np.ascontiguousarray(label.instance_map.astype(np.int32))
    H, W = inst.shape
    R = rays.n_rays

    fg = inst > 0
    if prob_mode == "binary":
        prob = fg.astype(np.float32)
    else:
        prob = _edt_prob(inst)

    dist = np.zeros((H, W, R), dtype=np.float32)
    fgr, fgc = np.nonzero(fg)
    if fgr.size:
        dr, dc = _step_tables(rays, int(np.ceil(np.hypot(H, W))) + 2)
        dist[fgr, fgc] = _radial_kernel(inst, fgr.astype(np.int64), fgc.astype(np.int64), dr, dc)

    classprob = np.zeros((H, W, n_classes + 1), dtype=np.float32)
    classprob[~fg, 0] = 1.0
    for idv, cls in label.classes.items():
        if not 1 <= cls <= n_classes:
            raise ValueError(f"class {cls} for instance {idv} outside 1..{n_classes}")
        classprob[inst == idv, cls] = 1.0

    return PredTensors(prob=prob, dist=dist, classprob=classprob)


def class_frequencies(labels, n_classes: int) -> np.ndarray:
    """Fraction of instances (not pixels) per class over a list of label images."""
    counts = np.zeros(n_classes, dtype=np.int64)
    for lab in labels:
        for cls in lab.classes.values():
            if not 1 <= cls <= n_classes:
                raise ValueError(f"class {cls} outside 1..{n_classes}")
            counts[cls - 1] += 1
    total = counts.sum()
    if total == 0:
        raise EmptyDataset("no instances in any image")
    return counts / total
