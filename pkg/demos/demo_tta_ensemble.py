"""Test-time augmentation over the 8 square symmetries.

A prediction tensor transforms under a dihedral element in two coupled ways:
the spatial grid rotates/flips, and the radial-distance channels permute
(rotating the image rotates the ray directions).  TTA runs a predictor on
all 8 views, undoes each transform on the output, and averages.  With a
perfectly equivariant predictor the average reproduces the plain prediction
exactly; with a noisy predictor it suppresses the noise.
"""

import numpy as np

from _common import make_nuclei
from starseg import RayConfig, encode_targets
from starseg.encode import LabelImage, PredTensors
from starseg.tta import ALL_ELEMENTS, ensemble_predict, tta_predict

rays = RayConfig(32)
label = make_nuclei(seed=3, rays=rays, n=5)
clean = encode_targets(label, rays, n_classes=6, prob_mode="edt")

print(f"dihedral group: {len(ALL_ELEMENTS)} elements "
      f"(4 rotations x optional flip)")


def equivariant_predictor(instance_map):
    m = np.ascontiguousarray(instance_map)
    lab = LabelImage(m, {i: 1 + (int(i) % 6) for i in np.unique(m) if i > 0})
    return encode_targets(lab, rays, n_classes=6, prob_mode="edt")


# relabel so the class of an instance does not depend on orientation
label = LabelImage(label.instance_map, {i: 1 + (i % 6) for i in label.classes})
clean = encode_targets(label, rays, n_classes=6, prob_mode="edt")
out = tta_predict(equivariant_predictor, label.instance_map, rays)
print("equivariant predictor: TTA average == plain prediction:",
      bool(np.array_equal(out.prob, clean.prob)
           and np.array_equal(out.dist, clean.dist)))


def noisy_predictor(sigma, seed):
    rng = np.random.default_rng(seed)

    def fn(instance_map):
        p = equivariant_predictor(instance_map)
        return PredTensors(
            prob=np.clip(p.prob + rng.normal(0, sigma, p.prob.shape), 0, 1)
                   .astype(np.float32),
            dist=p.dist,
            classprob=p.classprob,
        )
    return fn


single = noisy_predictor(0.1, 1)(label.instance_map)
averaged = tta_predict(noisy_predictor(0.1, 1), label.instance_map, rays)
err_single = np.abs(single.prob - clean.prob).mean()
err_tta = np.abs(averaged.prob - clean.prob).mean()
print(f"noisy predictor:  mean prob error {err_single:.4f} alone, "
      f"{err_tta:.4f} after 8-view TTA")

ens = ensemble_predict([noisy_predictor(0.1, s) for s in range(3)],
                       label.instance_map, rays, augs_per_model=4, seed=0)
err_ens = np.abs(ens.prob - clean.prob).mean()
print(f"3-model ensemble (4 random views each): mean prob error {err_ens:.4f}")
