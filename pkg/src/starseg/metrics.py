"""Multi-class panoptic-quality evaluation.

Matching follows the panoptic convention: a ground-truth and a predicted
instance match iff their pixel IoU is strictly greater than 0.5, which makes
the matching provably one-to-one.  DQ is the F1 over matches, SQ the mean
IoU of matches, PQ their product.

Two aggregation flavours are reported for every metric: the per-image value
averaged over images (plain), and the value computed once from statistics
pooled over the whole dataset (the "plus" variant).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, LengthMismatch


@dataclass
class ClassStats:
    """Match counts for one class: TP / FP / FN and the summed matched IoU."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    sum_iou: float = 0.0

    def __add__(self, other):
        return ClassStats(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.sum_iou + other.sum_iou,
        )

    @property
    def empty(self):
        return self.tp + self.fp + self.fn == 0


def _relabel(m):
    """Compact positive labels to 1..n; returns (relabeled, n)."""
    ids = np.unique(m)
    ids = ids[ids > 0]
    lut = np.zeros(int(m.max()) + 1, dtype=np.int64)
    lut[ids] = np.arange(1, len(ids) + 1)
    return lut[m], len(ids)


def match_instances(gt_map: np.ndarray, pred_map: np.ndarray) -> ClassStats:
    """Match instances of two maps under the IoU > 0.5 panoptic rule.

    The maps are expected to be already restricted to a single class (or to
    contain everything, for class-agnostic matching).
    """
    if gt_map.shape != pred_map.shape:
        raise DimensionMismatch(f"{gt_map.shape} vs {pred_map.shape}")
    gt, n_gt = _relabel(gt_map)
    pr, n_pr = _relabel(pred_map)
    if n_gt == 0 or n_pr == 0:
        return ClassStats(tp=0, fp=n_pr, fn=n_gt, sum_iou=0.0)

    gt_areas = np.bincount(gt.ravel(), minlength=n_gt + 1)
    pr_areas = np.bincount(pr.ravel(), minlength=n_pr + 1)
    # joint histogram over pixels where either map is foreground
    joint = gt.astype(np.int64) * (n_pr + 1) + pr
    counts = np.bincount(joint.ravel(), minlength=(n_gt + 1) * (n_pr + 1))
    counts = counts.reshape(n_gt + 1, n_pr + 1)

    gt_matched = np.zeros(n_gt + 1, dtype=bool)
    pr_matched = np.zeros(n_pr + 1, dtype=bool)
    tp = 0
    sum_iou = 0.0
    gi, pi = np.nonzero(counts[1:, 1:])
    for g, p in zip(gi + 1, pi + 1):
        inter = counts[g, p]
        union = gt_areas[g] + pr_areas[p] - inter
        iou = inter / union
        if iou > 0.5:
            # strict > 0.5 guarantees uniqueness; assert it anyway
            assert not gt_matched[g] and not pr_matched[p]
            gt_matched[g] = True
            pr_matched[p] = True
            tp += 1
            sum_iou += iou
    return ClassStats(tp=tp, fp=n_pr - tp, fn=n_gt - tp, sum_iou=sum_iou)


def dq_sq_pq(s: ClassStats):
    """(DQ, SQ, PQ) from match statistics, with the empty-case conventions."""
    if s.empty:
        return 0.0, 0.0, 0.0
    dq = s.tp / (s.tp + 0.5 * s.fp + 0.5 * s.fn)
    sq = s.sum_iou / s.tp if s.tp > 0 else 0.0
    return dq, sq, dq * sq


def _restrict(instance_map, classes, cls):
    """Instance map containing only instances of the given class."""
    out = np.zeros_like(instance_map)
    for idv, c in classes.items():
        if c == cls:
            out[instance_map == idv] = idv
    return out


@dataclass
class PQReport:
    """Evaluation result over a dataset."""

    n_classes: int
    per_class: list                      # pooled ClassStats per class
    dq: list                             # pooled per-class DQ
    sq: list                             # pooled per-class SQ
    pq: list                             # pooled per-class PQ (== PQ+ per class)
    mpq: float                           # mean over classes of per-image-averaged PQ_t
    mpq_plus: float                      # mean over classes of pooled PQ_t
    pq_binary: float                     # class-agnostic, per-image averaged
    pq_binary_plus: float                # class-agnostic, pooled
    mpq_image_first: float               # per-image mPQ averaged over images (comparison only)
    per_image: list = field(default_factory=list)

    @property
    def pq_plus_per_class(self):
        return self.pq

    def to_dict(self, decimals=4):
        rnd = lambda x: round(float(x), decimals)
        return {
            "mpq": rnd(self.mpq),
            "mpq_plus": rnd(self.mpq_plus),
            "pq": rnd(self.pq_binary),
            "pq_plus": rnd(self.pq_binary_plus),
            "mpq_image_first": rnd(self.mpq_image_first),
            "per_class": [
                {
                    "class": t + 1,
                    "tp": s.tp, "fp": s.fp, "fn": s.fn,
                    "sum_iou": rnd(s.sum_iou),
                    "dq_plus": rnd(self.dq[t]),
                    "sq_plus": rnd(self.sq[t]),
                    "pq_plus": rnd(self.pq[t]),
                }
                for t, s in enumerate(self.per_class)
            ],
            "per_image": self.per_image,
        }


def evaluate(gt_set, pred_set, n_classes: int) -> PQReport:
    """Evaluate predicted against ground-truth label images.

    Both arguments are equal-length lists of objects carrying an
    ``instance_map`` array and a ``classes`` dict.  Per-image per-class PQ
    values where the class is absent from both maps are excluded from that
    class's per-image average (correct absence is not punished).
    """
    if len(gt_set) != len(pred_set):
        raise LengthMismatch(f"{len(gt_set)} gt vs {len(pred_set)} pred images")

    T = n_classes
    pooled = [ClassStats() for _ in range(T)]
    pooled_bin = ClassStats()
    per_class_pqs = [[] for _ in range(T)]  # defined per-image values only
    binary_pqs = []
    image_mpqs = []
    per_image = []

    for gt, pred in zip(gt_set, pred_set):
        if gt.instance_map.shape != pred.instance_map.shape:
            raise DimensionMismatch(
                f"{gt.instance_map.shape} vs {pred.instance_map.shape}"
            )
        img_entry = {"per_class_pq": [], "pq": None}
        img_pqs = []
        for t in range(1, T + 1):
            g = _restrict(gt.instance_map, gt.classes, t)
            p = _restrict(pred.instance_map, pred.classes, t)
            s = match_instances(g, p)
            pooled[t - 1] += s
            if s.empty:
                img_entry["per_class_pq"].append(None)
            else:
                pq_t = dq_sq_pq(s)[2]
                per_class_pqs[t - 1].append(pq_t)
                img_entry["per_class_pq"].append(pq_t)
                img_pqs.append(pq_t)
        sb = match_instances(gt.instance_map, pred.instance_map)
        pooled_bin += sb
        if not sb.empty:
            pqb = dq_sq_pq(sb)[2]
            binary_pqs.append(pqb)
            img_entry["pq"] = pqb
        if img_pqs:
            image_mpqs.append(float(np.mean(img_pqs)))
        per_image.append(img_entry)

    dq, sq, pq = zip(*(dq_sq_pq(s) for s in pooled))
    per_class_avg = [float(np.mean(v)) if v else 0.0 for v in per_class_pqs]
    return PQReport(
        n_classes=T,
        per_class=pooled,
        dq=list(dq),
        sq=list(sq),
        pq=list(pq),
        mpq=float(np.mean(per_class_avg)),
        mpq_plus=float(np.mean(pq)),
        pq_binary=float(np.mean(binary_pqs)) if binary_pqs else 0.0,
        pq_binary_plus=dq_sq_pq(pooled_bin)[2],
        mpq_image_first=float(np.mean(image_mpqs)) if image_mpqs else 0.0,
        per_image=per_image,
    )


def instance_counts(pred_set, n_classes: int) -> np.ndarray:
    """Per-class instance counts over a prediction set (cellular composition)."""
    counts = np.zeros(n_classes, dtype=np.int64)
    for pred in pred_set:
        for cls in pred.classes.values():
            if 1 <= cls <= n_classes:
                counts[cls - 1] += 1
    return counts
