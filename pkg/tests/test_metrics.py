import numpy as np
import pytest

from conftest import make_pair, random_pair
from fnrseg.conformal import CalibrationResult
from fnrseg.errors import ValidationError
from fnrseg.fnr import fnr_loss, predict_mask
from fnrseg.metrics import SampleIndex, evaluate_at, evaluate_split, fixed_threshold_baseline
from fnrseg.synthgen import GeneratorConfig, generate
from fnrseg.volume import ConfidenceVolume, GridDims, LabelVolume, SamplePair


def calib(t_hat, eps):
    return CalibrationResult(t_hat, eps, 0.2, 10, 9, t_hat == 1.0)


def test_ecr_hand_count():
    # lesion of 10 voxels; at t = 0.5 the losses are 0.1, 0.5, 0.2
    pairs = [
        make_pair([0.9] * 9 + [0.1], sample_id="a"),
        make_pair([0.9] * 5 + [0.1] * 5, sample_id="b"),
        make_pair([0.9] * 8 + [0.1] * 2, sample_id="c"),
    ]
    m = evaluate_split(pairs, calib(0.5, 0.3))
    assert [round(s.loss, 12) for s in m.per_sample] == [0.1, 0.5, 0.2]
    assert m.ecr == 2 / 3
    assert m.n_test == 3 and m.n_vacuous == 0


def test_pc_eight_of_sixty_four():
    dims = GridDims(4, 4, 4)
    values = np.zeros(64)
    values[:8] = 0.9
    label = np.zeros(64, np.uint8)
    label[0] = 1
    pair = SamplePair("p", ConfidenceVolume(dims, values), LabelVolume(dims, label))
    m = evaluate_split([pair], calib(0.5, 0.1))
    assert m.pc_mean == 0.125 and m.per_sample[0].pc == 0.125
    assert m.per_sample[0].pc_gt == 8.0


def test_degenerate_predicts_everything():
    rng = np.random.default_rng(0)
    pairs = [random_pair(rng, sample_id=str(i)) for i in range(5)]
    m = evaluate_split(pairs, calib(1.0, 0.05))
    assert m.ecr == 1.0 and m.pc_mean == 1.0
    assert all(s.loss == 0.0 and s.pc == 1.0 for s in m.per_sample)


def test_vacuous_samples():
    pairs = [make_pair([], [0.3, 0.9], sample_id="empty"), make_pair([0.2], sample_id="full")]
    m = evaluate_split(pairs, calib(0.5, 0.1))
    assert m.n_vacuous == 1
    assert m.per_sample[0].loss == 0.0 and m.per_sample[0].compliant and m.per_sample[0].pc_gt is None
    assert m.ecr == 0.5


def test_population_std():
    pairs = [make_pair([0.9, 0.1], sample_id="a"), make_pair([0.9, 0.9], sample_id="b")]
    m = evaluate_split(pairs, calib(0.5, 0.1))
    assert m.fnr_mean == 0.25 and m.fnr_std == 0.25


def test_empty_test_rejected():
    with pytest.raises(ValidationError):
        evaluate_split([], calib(0.5, 0.1))


def test_index_matches_direct_counting():
    rng = np.random.default_rng(4)
    for i in range(20):
        p = random_pair(rng, sample_id=str(i))
        idx = SampleIndex(p)
        for t in np.linspace(0, 1, 37):
            m = evaluate_at([idx], t, 0.2).per_sample[0]
            assert m.loss == fnr_loss(p.confidence, p.label, t).loss
            assert m.pc == predict_mask(p.confidence, t).values.sum() / p.confidence.dims.size


def test_bounds_and_consistency():
    rng = np.random.default_rng(5)
    pairs = [random_pair(rng, sample_id=str(i)) for i in range(30)]
    prev_pc = None
    for t in np.linspace(1, 0, 21):
        m = evaluate_at(pairs, t, 0.25)
        assert m.ecr == sum(s.loss <= 0.25 for s in m.per_sample) / m.n_test
        for s in m.per_sample:
            assert 0 <= s.loss <= 1 and 0 <= s.pc <= 1
        if prev_pc is not None:
            assert m.pc_mean <= prev_pc
        prev_pc = m.pc_mean


class TestBaseline:
    def test_uniform_lesions_lose_half(self):
        cfg = GeneratorConfig(dims=(32, 32, 32), n_samples=100, radius_range=(14, 15), seed=21)
        pairs = generate(cfg)
        assert min(p.label.positives for p in pairs) >= 10_000
        m = fixed_threshold_baseline(pairs, 0.2)
        assert 0.45 <= m.fnr_mean <= 0.55

    def test_confident_lesion(self):
        assert fixed_threshold_baseline([make_pair([0.51, 0.9])], 0.1).fnr_mean == 0.0

    def test_unconfident_lesion(self):
        assert fixed_threshold_baseline([make_pair([0.49, 0.1])], 0.1).fnr_mean == 1.0
