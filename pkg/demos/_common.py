"""Shared helpers for the demo scripts: a tiny synthetic nuclei generator."""

import numpy as np
from scipy import ndimage

from starseg.encode import LabelImage
from starseg.geometry import PolygonCandidate, RayConfig, rasterize_polygon


def make_nuclei(seed, rays: RayConfig, shape=(128, 128), n=6, n_classes=6,
                r_lo=8, r_hi=14):
    """A seeded label image of non-touching, roughly round nuclei."""
    rng = np.random.default_rng(seed)
    H, W = shape
    inst = np.zeros((H, W), np.int32)
    occupied = np.zeros((H, W), bool)
    classes = {}
    idv = 0
    for _ in range(400):
        if idv >= n:
            break
        rmax = float(rng.uniform(r_lo, r_hi))
        radii = rng.uniform(0.85 * rmax, rmax, rays.n_rays)
        m = int(np.ceil(rmax)) + 2
        center = (int(rng.integers(m, H - m)), int(rng.integers(m, W - m)))
        mask = rasterize_polygon(PolygonCandidate(center, radii, 1.0),
                                 rays, (H, W))
        grown = ndimage.binary_dilation(mask, iterations=2)
        if (grown & occupied).any():
            continue
        idv += 1
        inst[mask] = idv
        occupied |= grown
        classes[idv] = int(rng.integers(1, n_classes + 1))
    return LabelImage(inst, classes)
