import numpy as np
import pytest

from starseg.balance import (
    LossParams,
    SamplerWeights,
    bce_loss,
    cce_loss,
    class_weight_report,
    focal_loss,
    mae_loss,
    oversampling_weights,
    sample_epoch,
    tversky_loss,
)
from starseg.errors import EmptyDataset, ShapeMismatch, SimplexViolation


def random_simplex(rng, shape, C):
    p = rng.random(shape + (C,))
    return p / p.sum(-1, keepdims=True)


def random_onehot(rng, shape, C):
    y = np.zeros(shape + (C,))
    idx = rng.integers(0, C, shape)
    np.put_along_axis(y, idx[..., None], 1.0, axis=-1)
    return y


class TestOversampling:
    def test_inverse_frequency_ratio(self):
        # one image of the common class, one of the 99x rarer class
        w = oversampling_weights([[1, 0], [0, 1]], [0.99, 0.01]).weights
        assert w[1] / w[0] == pytest.approx(99.0)
        assert w.sum() == pytest.approx(1.0)

    def test_single_image(self):
        w = oversampling_weights([[3, 1]], [0.75, 0.25]).weights
        assert np.allclose(w, [1.0])

    def test_counts_scale_linearly(self):
        w = oversampling_weights([[2, 0], [4, 0]], [1.0, 0.0]).weights
        assert w[1] / w[0] == pytest.approx(2.0)

    def test_empty_image_gets_min_positive_weight(self):
        w = oversampling_weights([[1, 0], [0, 0], [0, 3]], [0.5, 0.5]).weights
        assert w[1] == pytest.approx(w[0])  # raw weight 1/0.5 is the smallest
        assert np.all(w > 0)

    def test_all_empty_rejected(self):
        with pytest.raises(EmptyDataset):
            oversampling_weights([[0, 0], [0, 0]], [0.5, 0.5])

    def test_zero_frequency_for_used_class_rejected(self):
        with pytest.raises(ValueError):
            oversampling_weights([[1, 1]], [1.0, 0.0])


class TestSampleEpoch:
    def test_empirical_frequencies(self):
        w = SamplerWeights(np.array([0.5, 0.3, 0.2]))
        draws = sample_epoch(w, 100_000, seed=0)
        freq = np.bincount(draws, minlength=3) / len(draws)
        assert np.allclose(freq, w.weights, atol=0.01)

    def test_seed_determinism(self):
        w = SamplerWeights(np.array([0.25, 0.75]))
        assert np.array_equal(sample_epoch(w, 1000, seed=7),
                              sample_epoch(w, 1000, seed=7))

    def test_invalid_weights_rejected(self):
        with pytest.raises(ValueError):
            sample_epoch(SamplerWeights(np.array([0.5, 0.6])), 10)
        with pytest.raises(ValueError):
            sample_epoch(SamplerWeights(np.array([1.5, -0.5])), 10)

    def test_zero_draws_rejected(self):
        with pytest.raises(ValueError):
            sample_epoch(SamplerWeights(np.array([1.0])), 0)


class TestFocal:
    def test_gamma_zero_is_cross_entropy(self):
        rng = np.random.default_rng(0)
        p = random_simplex(rng, (50, 50), 7)
        y = random_onehot(rng, (50, 50), 7)
        params = LossParams(focal_gamma=0.0, focal_alpha=1.0)
        assert abs(focal_loss(p, y, params) - cce_loss(p, y)) < 1e-9

    def test_modulation_downweights_easy_pixels(self):
        # p_t = 0.8: the gamma=2 factor is (1 - 0.8)^2 = 0.04
        p = np.array([[0.8, 0.2]])
        y = np.array([[1.0, 0.0]])
        g2 = focal_loss(p, y, LossParams(focal_gamma=2.0))
        g0 = focal_loss(p, y, LossParams(focal_gamma=0.0))
        assert g2 / g0 == pytest.approx(0.04)

    def test_per_class_alpha(self):
        p = np.array([[0.5, 0.5], [0.5, 0.5]])
        y = np.array([[1.0, 0.0], [0.0, 1.0]])
        params = LossParams(focal_gamma=0.0, focal_alpha=np.array([2.0, 4.0]))
        expected = np.mean([2.0 * -np.log(0.5), 4.0 * -np.log(0.5)])
        assert focal_loss(p, y, params) == pytest.approx(expected)

    def test_perfect_prediction_is_zero(self):
        y = np.eye(3)[None]
        assert focal_loss(y, y) == 0.0

    def test_simplex_violation(self):
        with pytest.raises(SimplexViolation):
            focal_loss(np.array([[0.5, 0.9]]), np.array([[1.0, 0.0]]))


class TestTversky:
    def test_hand_value(self):
        # single pixel, channel 1 target: tp=0.5, fn=0.5, fp=0, smooth=1
        # loss = 1 - 1.5/1.75 = 1/7
        p = np.array([[0.5, 0.5]])
        y = np.array([[0.0, 1.0]])
        assert tversky_loss(p, y) == pytest.approx(1 / 7)

    def test_perfect_prediction_is_zero(self):
        y = np.eye(4)[None].repeat(3, 0)
        assert tversky_loss(y, y) == 0.0

    def test_reduces_to_soft_dice(self):
        # Dice with smoothing 2e equals Tversky(alpha=beta=0.5) with smoothing e
        rng = np.random.default_rng(1)
        p = random_simplex(rng, (16, 16), 3)
        y = random_onehot(rng, (16, 16), 3)
        eps = 0.5
        got = tversky_loss(p, y, LossParams(tversky_smooth=eps))
        axes = (0, 1)
        tp = (p * y).sum(axes)
        dice = 1.0 - (2 * tp + 2 * eps) / (p.sum(axes) + y.sum(axes) + 2 * eps)
        assert got == pytest.approx(np.mean(dice[1:]), abs=1e-12)

    def test_asymmetric_weighting(self):
        # beta > alpha punishes false positives harder
        p = np.array([[0.0, 1.0], [0.0, 1.0]])   # one tp, one fp on channel 1
        y = np.array([[0.0, 1.0], [1.0, 0.0]])
        hard = tversky_loss(p, y, LossParams(tversky_alpha=0.3, tversky_beta=0.7))
        soft = tversky_loss(p, y, LossParams(tversky_alpha=0.7, tversky_beta=0.3))
        assert hard > soft

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            tversky_loss(np.zeros((2, 3)), np.zeros((3, 3)))


class TestPointwiseLosses:
    def test_cce_uniform_is_log_c(self):
        p = np.full((10, 10, 7), 1 / 7)
        y = random_onehot(np.random.default_rng(2), (10, 10), 7)
        assert cce_loss(p, y) == pytest.approx(np.log(7), abs=1e-12)

    def test_bce_hand_value(self):
        assert bce_loss([0.5, 0.5], [1.0, 0.0]) == pytest.approx(np.log(2))

    def test_bce_clamped_at_confident_mistake(self):
        v = bce_loss([0.0], [1.0])
        assert np.isfinite(v)
        assert v == pytest.approx(-np.log(1e-7))

    def test_mae_hand_value(self):
        assert mae_loss([1.0, 5.0], [3.0, 1.0]) == 3.0

    def test_mae_masked(self):
        pred = np.array([[1.0, 9.0], [2.0, 2.0]])
        target = np.zeros((2, 2))
        mask = np.array([[True, False], [True, False]])
        assert mae_loss(pred, target, mask) == pytest.approx(1.5)

    def test_mae_empty_mask(self):
        assert mae_loss(np.ones((3, 3)), np.zeros((3, 3)),
                        np.zeros((3, 3), bool)) == 0.0


def test_class_weight_report():
    w = class_weight_report([0.5, 0.25, 0.25])
    assert w.mean() == pytest.approx(1.0)
    assert w[1] == pytest.approx(w[2])
    assert w[1] / w[0] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        class_weight_report([0.5, 0.0])
