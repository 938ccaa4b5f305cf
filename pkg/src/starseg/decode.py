"""Prediction tensors -> classified instance segmentation.

Pipeline: threshold pixels into polygon candidates, greedy NMS with
suppression grouping, optional majority-vote shape refinement, per-instance
class aggregation.  Fully deterministic: candidates are ordered by score
descending with (row, col) tie-break, and lower-score instances never
overwrite pixels already claimed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encode import PredTensors
from .errors import EmptyMask
from .geometry import (
    PolygonCandidate,
    RayConfig,
    _raster_window,
    _window_iou,
    polygon_vertices,
    rasterize_polygon,
)


@dataclass
class DecodeConfig:
    """Thresholds and switches for candidate extraction, NMS and refinement."""

    prob_thresh: float = 0.5
    nms_thresh: float = 0.5
    refine: bool = True
    max_candidates: int | None = None


@dataclass
class InstanceSet:
    """Decoded result: non-overlapping instance map, classes and scores.

    Ids are contiguous from 1 in descending winner-score order.
    """

    instance_map: np.ndarray
    classes: dict
    scores: dict = field(default_factory=dict)


def extract_candidates(pred: PredTensors, cfg: DecodeConfig, rays: RayConfig):
    """One candidate per pixel with prob > prob_thresh, score-sorted."""
    prob = pred.prob
    rows, cols = np.nonzero(prob > cfg.prob_thresh)
    if rows.size == 0:
        return []
    scores = prob[rows, cols].astype(np.float64)
    order = np.lexsort((cols, rows, -scores))
    if cfg.max_candidates is not None:
        order = order[: cfg.max_candidates]
    dist = pred.dist
    return [
        PolygonCandidate(
            center=(int(rows[i]), int(cols[i])),
            radii=dist[rows[i], cols[i]].astype(np.float64),
            score=float(scores[i]),
        )
        for i in order
    ]


class _RasterCache:
    """Lazy per-candidate bbox-window rasterizations shared across NMS rounds."""

    def __init__(self, cands, rays):
        self.cands = cands
        self.rays = rays
        self._wins = [None] * len(cands)

    def window(self, i):
        if self._wins[i] is None:
            self._wins[i] = _raster_window(self.cands[i], self.rays)
        return self._wins[i]

    def iou(self, i, j):
        wa, ra, ca = self.window(i)
        wb, rb, cb = self.window(j)
        return _window_iou(wa, ra, ca, wb, rb, cb)


def _candidate_bboxes(cands, rays):
    n = len(cands)
    boxes = np.empty((n, 4), dtype=np.int64)
    for i, c in enumerate(cands):
        v = polygon_vertices(c, rays)
        boxes[i] = (
            np.floor(v[:, 0].min()), np.ceil(v[:, 0].max()),
            np.floor(v[:, 1].min()), np.ceil(v[:, 1].max()),
        )
    return boxes


def _nms_indices(cands, cfg: DecodeConfig, rays: RayConfig):
    """Greedy NMS grouping by candidate index; shares one raster cache."""
    n = len(cands)
    cache = _RasterCache(cands, rays)
    if n == 0:
        return [], cache
    boxes = _candidate_bboxes(cands, rays)
    alive = np.ones(n, dtype=bool)
    groups = []
    for i in range(n):
        if not alive[i]:
            continue
        alive[i] = False
        rest = np.nonzero(alive)[0]
        suppressed = []
        if rest.size:
            b = boxes[i]
            overlap = ~(
                (boxes[rest, 1] < b[0]) | (b[1] < boxes[rest, 0])
                | (boxes[rest, 3] < b[2]) | (b[3] < boxes[rest, 2])
            )
            for j in rest[overlap]:
                if cache.iou(i, j) > cfg.nms_thresh:
                    alive[j] = False
                    suppressed.append(int(j))
        groups.append((i, suppressed))
    return groups, cache


def nms(cands, cfg: DecodeConfig, rays: RayConfig):
    """Greedy NMS over score-sorted candidates, keeping suppression groups.

    Returns a list of (winner, suppressed candidates) in winner order.  A
    candidate joins a winner's group iff its polygon IoU with the winner
    exceeds nms_thresh; bounding-box disjointness is used as an exact
    prefilter (IoU is 0 there by construction).
    """
    groups, _ = _nms_indices(cands, cfg, rays)
    return [(cands[i], [cands[j] for j in sup]) for i, sup in groups]


def refine_shape(group, rays: RayConfig, bounds) -> np.ndarray:
    """Strict-majority vote over the rasterized masks of winner + suppressed.

    A pixel is kept iff covered by strictly more than half of the group's
    masks.  An empty vote falls back to the winner's own rasterization so
    that refinement can never delete a detection.
    """
    winner, suppressed = group
    members = [winner] + list(suppressed)
    H, W = bounds
    votes = np.zeros((H, W), dtype=np.int32)
    for c in members:
        votes += rasterize_polygon(c, rays, bounds)
    mask = votes * 2 > len(members)
    if not mask.any():
        mask = rasterize_polygon(winner, rays, bounds)
    return mask


def classify_instance(mask: np.ndarray, classprob: np.ndarray):
    """Aggregate per-pixel class probabilities over an instance mask.

    Averages the class vectors of all mask pixels, then takes the argmax over
    the foreground channels (background channel 0 excluded); ties go to the
    smallest class index.  Returns (class label in 1..T, mean probability).
    """
    if not mask.any():
        raise EmptyMask("cannot classify an empty mask")
    mean = classprob[mask].mean(axis=0)
    fg = mean[1:]
    cls = int(np.argmax(fg)) + 1
    return cls, float(fg[cls - 1])


def _place_window(acc, win, rmin, cmin):
    """Add a bbox-window mask into a full-image accumulator, clipped."""
    H, W = acc.shape
    r0 = max(rmin, 0)
    c0 = max(cmin, 0)
    r1 = min(rmin + win.shape[0], H)
    c1 = min(cmin + win.shape[1], W)
    if r0 < r1 and c0 < c1:
        acc[r0:r1, c0:c1] += win[r0 - rmin:r1 - rmin, c0 - cmin:c1 - cmin]


def _refine_cached(cache, member_idx, bounds) -> np.ndarray:
    """Same vote as refine_shape, but reusing the NMS raster windows."""
    H, W = bounds
    votes = np.zeros((H, W), dtype=np.int32)
    for i in member_idx:
        win, rmin, cmin = cache.window(i)
        _place_window(votes, win, rmin, cmin)
    mask = votes * 2 > len(member_idx)
    if not mask.any():
        votes[:] = 0
        win, rmin, cmin = cache.window(member_idx[0])
        _place_window(votes, win, rmin, cmin)
        mask = votes > 0
    return mask


def decode(pred: PredTensors, cfg: DecodeConfig, rays: RayConfig) -> InstanceSet:
    """Full decoding: candidates -> NMS -> masks -> classes."""
    pred.validate()
    H, W = pred.prob.shape
    cands = extract_candidates(pred, cfg, rays)
    groups, cache = _nms_indices(cands, cfg, rays)

    inst = np.zeros((H, W), dtype=np.int32)
    classes = {}
    scores = {}
    next_id = 1
    for wi, suppressed in groups:
        winner = cands[wi]
        if cfg.refine:
            mask = _refine_cached(cache, [wi] + suppressed, (H, W))
        else:
            mask = rasterize_polygon(winner, rays, (H, W))
        mask &= inst == 0  # earlier (higher-score) instances keep their pixels
        if not mask.any():
            continue
        inst[mask] = next_id
        cls, _conf = classify_instance(mask, pred.classprob)
        classes[next_id] = cls
        scores[next_id] = winner.score
        next_id += 1
    return InstanceSet(instance_map=inst, classes=classes, scores=scores)
