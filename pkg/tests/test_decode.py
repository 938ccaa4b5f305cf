import numpy as np
import pytest

from starseg.decode import (
    DecodeConfig,
    classify_instance,
    decode,
    extract_candidates,
    nms,
    refine_shape,
)
from starseg.encode import LabelImage, PredTensors, encode_targets
from starseg.errors import EmptyMask
from starseg.geometry import PolygonCandidate, RayConfig, rasterize_polygon

RAYS4 = RayConfig(4)
RAYS8 = RayConfig(8)


def pred_from(prob, dist, classprob):
    return PredTensors(prob=np.asarray(prob, np.float32),
                       dist=np.asarray(dist, np.float32),
                       classprob=np.asarray(classprob, np.float32))


def uniform_pred(H, W, R, T, prob=0.0):
    cp = np.zeros((H, W, T + 1), np.float32)
    cp[..., 0] = 1.0
    return pred_from(np.full((H, W), prob), np.zeros((H, W, R)), cp)


def brute_force_nms(cands, thresh, rays, bounds):
    """Independent O(n^2) reference: full IoU matrix, then greedy grouping."""
    masks = [rasterize_polygon(c, rays, bounds) for c in cands]
    n = len(cands)
    iou = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            inter = np.count_nonzero(masks[i] & masks[j])
            union = np.count_nonzero(masks[i] | masks[j])
            iou[i, j] = iou[j, i] = inter / union if union else 0.0
    alive = [True] * n
    groups = []
    for i in range(n):
        if not alive[i]:
            continue
        alive[i] = False
        sup = []
        for j in range(i + 1, n):
            if alive[j] and iou[i, j] > thresh:
                alive[j] = False
                sup.append(j)
        groups.append((i, sup))
    return groups


def random_candidates(rng, n, rays, span=30, rmax=6.0):
    cands = [
        PolygonCandidate(
            center=(int(rng.integers(8, span)), int(rng.integers(8, span))),
            radii=rng.uniform(0.5, rmax, rays.n_rays),
            score=float(rng.random()),
        )
        for _ in range(n)
    ]
    cands.sort(key=lambda c: -c.score)
    return cands


class TestExtractCandidates:
    def test_all_below_threshold(self):
        pred = uniform_pred(8, 8, 4, 2, prob=0.3)
        assert extract_candidates(pred, DecodeConfig(), RAYS4) == []

    def test_single_pixel(self):
        pred = uniform_pred(8, 8, 4, 2)
        pred.prob[3, 4] = 0.9
        pred.dist[3, 4] = [1, 2, 3, 4]
        (c,) = extract_candidates(pred, DecodeConfig(), RAYS4)
        assert c.center == (3, 4)
        assert np.array_equal(c.radii, [1, 2, 3, 4])
        assert c.score == pytest.approx(0.9)

    def test_sorted_with_row_major_tie_break(self):
        pred = uniform_pred(8, 8, 4, 2)
        pred.prob[5, 1] = 0.7
        pred.prob[2, 6] = 0.7
        pred.prob[2, 3] = 0.7
        pred.prob[4, 4] = 0.9
        cands = extract_candidates(pred, DecodeConfig(), RAYS4)
        assert [c.center for c in cands] == [(4, 4), (2, 3), (2, 6), (5, 1)]

    def test_max_candidates_truncation(self):
        pred = uniform_pred(8, 8, 4, 2, prob=0.8)
        cands = extract_candidates(pred, DecodeConfig(max_candidates=5), RAYS4)
        assert len(cands) == 5

    def test_count_matches_oracle_tensor(self):
        inst = np.zeros((24, 24), np.int32)
        inst[3:8, 3:8] = 1
        inst[14:20, 12:19] = 2
        lab = LabelImage(inst, {1: 1, 2: 2})
        pred = encode_targets(lab, RAYS4, 2, prob_mode="binary")
        cfg = DecodeConfig(prob_thresh=0.5)
        cands = extract_candidates(pred, cfg, RAYS4)
        assert len(cands) == np.count_nonzero(pred.prob > 0.5)


class TestNms:
    def test_singleton(self):
        c = PolygonCandidate((5, 5), np.ones(4), 0.9)
        assert nms([c], DecodeConfig(), RAYS4) == [(c, [])]

    def test_two_identical(self):
        a = PolygonCandidate((5, 5), np.full(4, 2.0), 0.9)
        b = PolygonCandidate((5, 5), np.full(4, 2.0), 0.8)
        [(winner, sup)] = nms([a, b], DecodeConfig(), RAYS4)
        assert winner is a and sup == [b]

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        cands = random_candidates(rng, 50, RAYS8)
        got = nms(cands, DecodeConfig(), RAYS8)
        expected = brute_force_nms(cands, 0.5, RAYS8, (40, 40))
        by_id = {id(c): i for i, c in enumerate(cands)}
        got_idx = [(by_id[id(w)], [by_id[id(s)] for s in sup]) for w, sup in got]
        assert got_idx == expected


class TestRefineShape:
    def test_group_of_one(self):
        w = PolygonCandidate((5, 5), np.full(4, 2.0), 0.9)
        assert np.array_equal(
            refine_shape((w, []), RAYS4, (11, 11)),
            rasterize_polygon(w, RAYS4, (11, 11)),
        )

    def test_unanimous_group(self):
        w = PolygonCandidate((5, 5), np.full(4, 2.0), 0.9)
        dup = [PolygonCandidate((5, 5), np.full(4, 2.0), s) for s in (0.8, 0.7)]
        assert np.array_equal(
            refine_shape((w, dup), RAYS4, (11, 11)),
            rasterize_polygon(w, RAYS4, (11, 11)),
        )

    def test_two_members_need_both(self):
        a = PolygonCandidate((5, 5), np.full(4, 2.0), 0.9)
        b = PolygonCandidate((5, 6), np.full(4, 2.0), 0.8)
        expected = (rasterize_polygon(a, RAYS4, (12, 12))
                    & rasterize_polygon(b, RAYS4, (12, 12)))
        assert np.array_equal(refine_shape((a, [b]), RAYS4, (12, 12)), expected)

    def test_empty_vote_falls_back_to_winner(self):
        # two disjoint members: no pixel is covered by a strict majority
        a = PolygonCandidate((3, 3), np.full(4, 1.0), 0.9)
        b = PolygonCandidate((10, 10), np.full(4, 1.0), 0.8)
        assert np.array_equal(
            refine_shape((a, [b]), RAYS4, (14, 14)),
            rasterize_polygon(a, RAYS4, (14, 14)),
        )


class TestClassifyInstance:
    def test_unanimous_one_hot(self):
        cp = np.zeros((4, 4, 5), np.float32)
        cp[..., 3] = 1.0
        mask = np.zeros((4, 4), bool)
        mask[1:3, 1:3] = True
        assert classify_instance(mask, cp) == (3, pytest.approx(1.0))

    def test_tie_breaks_to_smallest_class(self):
        cp = np.zeros((1, 2, 3), np.float32)
        cp[0, 0] = [0.0, 0.9, 0.1]
        cp[0, 1] = [0.0, 0.3, 0.7]
        mask = np.ones((1, 2), bool)
        cls, conf = classify_instance(mask, cp)
        assert cls == 1 and conf == pytest.approx(0.6)

    def test_empty_mask_rejected(self):
        with pytest.raises(EmptyMask):
            classify_instance(np.zeros((3, 3), bool), np.zeros((3, 3, 3)))


class TestDecode:
    def test_all_zero_tensors(self):
        out = decode(uniform_pred(16, 16, 4, 2), DecodeConfig(), RAYS4)
        assert not out.instance_map.any()
        assert out.classes == {} and out.scores == {}

    def test_roundtrip_single_square(self):
        inst = np.zeros((16, 16), np.int32)
        inst[4:11, 4:11] = 1
        lab = LabelImage(inst, {1: 2})
        pred = encode_targets(lab, RAYS8, 6, prob_mode="binary")
        out = decode(pred, DecodeConfig(), RAYS8)
        assert sorted(out.classes.values()) == [2]
        gt = inst > 0
        got = out.instance_map > 0
        iou = np.count_nonzero(gt & got) / np.count_nonzero(gt | got)
        assert iou > 0.5

    def test_roundtrip_two_separated_nuclei(self):
        inst = np.zeros((40, 40), np.int32)
        inst[4:12, 4:12] = 1
        inst[24:34, 22:34] = 2
        lab = LabelImage(inst, {1: 3, 2: 5})
        pred = encode_targets(lab, RAYS8, 6, prob_mode="edt")
        out = decode(pred, DecodeConfig(), RAYS8)
        assert len(out.classes) == 2
        assert sorted(out.classes.values()) == [3, 5]

    def test_determinism(self):
        inst = np.zeros((30, 30), np.int32)
        inst[5:15, 5:15] = 1
        inst[18:28, 16:27] = 2
        pred = encode_targets(LabelImage(inst, {1: 1, 2: 2}), RAYS8, 2, "edt")
        a = decode(pred, DecodeConfig(), RAYS8)
        b = decode(pred, DecodeConfig(), RAYS8)
        assert np.array_equal(a.instance_map, b.instance_map)
        assert a.classes == b.classes and a.scores == b.scores

    def test_instances_do_not_overlap(self):
        inst = np.zeros((30, 30), np.int32)
        inst[5:15, 5:15] = 1
        inst[14:24, 16:26] = 2
        pred = encode_targets(LabelImage(inst, {1: 1, 2: 2}), RAYS8, 2, "edt")
        out = decode(pred, DecodeConfig(), RAYS8)
        per_instance = sum(np.count_nonzero(out.instance_map == i)
                           for i in out.classes)
        assert per_instance == np.count_nonzero(out.instance_map)

    def test_raising_prob_thresh_never_adds_candidates(self):
        inst = np.zeros((30, 30), np.int32)
        inst[5:20, 5:20] = 1
        pred = encode_targets(LabelImage(inst, {1: 1}), RAYS8, 2, "edt")
        counts = [
            len(extract_candidates(pred, DecodeConfig(prob_thresh=t), RAYS8))
            for t in (0.1, 0.3, 0.5, 0.7, 0.9)
        ]
        assert counts == sorted(counts, reverse=True)

    def test_ids_ordered_by_score(self):
        inst = np.zeros((40, 40), np.int32)
        inst[4:12, 4:12] = 1
        inst[24:34, 22:34] = 2
        pred = encode_targets(LabelImage(inst, {1: 1, 2: 2}), RAYS8, 2, "edt")
        out = decode(pred, DecodeConfig(), RAYS8)
        scores = [out.scores[i] for i in sorted(out.scores)]
        assert scores == sorted(scores, reverse=True)
        assert sorted(out.classes) == list(range(1, len(out.classes) + 1))
