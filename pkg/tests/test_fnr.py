import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_pair, random_pair
from fnrseg.errors import EmptyGroundTruthError, ValidationError
from fnrseg.fnr import (
    ThresholdParam,
    critical_threshold_bisect,
    critical_threshold_exact,
    fnr_loss,
    guarded_ceil,
    lesion_confidence_histogram,
    predict_mask,
    required_coverage,
)
from fnrseg.synthgen import GeneratorConfig, generate
from fnrseg.volume import ConfidenceVolume, GridDims, LabelVolume
from oracles import brute_force_critical, direct_loss

LESION4 = [0.9, 0.6, 0.4, 0.2]


def conf(values, dims=None):
    return ConfidenceVolume(dims or GridDims(1, 1, len(values)), values)


class TestPredictMask:
    def test_hand_evaluated(self):
        assert predict_mask(conf([0.9, 0.4]), 0.5).values.tolist() == [1, 0]

    def test_t_one_predicts_everything(self):
        vol = conf(np.linspace(0, 1, 11))
        assert predict_mask(vol, 1.0).values.all()

    def test_t_zero_inclusive(self):
        assert predict_mask(conf([1.0, 0.99]), ThresholdParam(0.0)).values.tolist() == [1, 0]

    def test_preserves_dims(self):
        vol = ConfidenceVolume(GridDims(2, 3, 4), np.full(24, 0.7))
        assert predict_mask(vol, 0.5).dims == GridDims(2, 3, 4)

    def test_threshold_range(self):
        with pytest.raises(ValidationError):
            ThresholdParam(1.5)


class TestFnrLoss:
    def test_half_covered(self):
        pair = make_pair(LESION4, [0.95, 0.1])
        value = fnr_loss(pair.confidence, pair.label, 0.5)
        assert (value.covered_lesion_voxels, value.total_lesion_voxels) == (2, 4)
        assert value.loss == 0.5

    def test_boundaries(self):
        pair = make_pair(LESION4)
        assert fnr_loss(pair.confidence, pair.label, 1.0).loss == 0.0
        assert fnr_loss(pair.confidence, pair.label, 0.0).loss == 1.0

    def test_empty_ground_truth(self):
        pair = make_pair([], [0.3, 0.4])
        with pytest.raises(EmptyGroundTruthError):
            fnr_loss(pair.confidence, pair.label, 0.5)

    def test_loss_identity(self, each_backend):
        rng = np.random.default_rng(1)
        for _ in range(20):
            p = random_pair(rng)
            v = fnr_loss(p.confidence, p.label, float(rng.random()))
            assert v.loss == 1 - v.covered_lesion_voxels / v.total_lesion_voxels


class TestCriticalExact:
    def test_spec_values(self):
        pair = make_pair(LESION4, [0.99])
        assert critical_threshold_exact(pair.confidence, pair.label, 0.25).t_i == pytest.approx(0.6, abs=1e-12)
        assert critical_threshold_exact(pair.confidence, pair.label, 0.0).t_i == pytest.approx(0.8, abs=1e-12)
        assert critical_threshold_exact(pair.confidence, pair.label, 1.0).t_i == 0.0

    @pytest.mark.parametrize("eps", [0.0, 0.25, 0.5, 0.75])
    def test_spec_values_agree_with_grid_oracle(self, eps):
        pair = make_pair(LESION4)
        got = critical_threshold_exact(pair.confidence, pair.label, eps).t_i
        assert got == pytest.approx(brute_force_critical(LESION4, eps), abs=1e-12)

    def test_all_confident_scores_zero(self):
        pair = make_pair([1.0, 1.0, 1.0], [0.2])
        for eps in (0.0, 0.3, 1.0):
            assert critical_threshold_exact(pair.confidence, pair.label, eps).t_i == 0.0

    def test_metadata(self):
        pair = make_pair(LESION4)
        score = critical_threshold_exact(pair.confidence, pair.label, 0.25, sample_id="p1")
        assert (score.sample_id, score.epsilon, score.method) == ("p1", 0.25, "exact")

    def test_empty_ground_truth_names_sample(self):
        pair = make_pair([], [0.5])
        with pytest.raises(EmptyGroundTruthError, match="'zz'"):
            critical_threshold_exact(pair.confidence, pair.label, 0.1, sample_id="zz")

    @pytest.mark.parametrize("seed", range(25))
    def test_against_grid_oracle(self, seed):
        rng = np.random.default_rng(seed)
        p = random_pair(rng, dims=(2, 3, 5))
        eps = float(rng.choice([0.0, 0.1, 0.2, 0.33, 0.5, 0.9, 1.0, rng.random()]))
        lesion = p.confidence.values[p.label.values == 1]
        got = critical_threshold_exact(p.confidence, p.label, eps).t_i
        assert got == pytest.approx(brute_force_critical(lesion, eps), abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(
        lesion=st.lists(st.floats(0, 1), min_size=1, max_size=30),
        eps=st.floats(0, 1),
    )
    def test_feasible_and_float_minimal(self, lesion, eps):
        pair = make_pair(lesion)
        t = critical_threshold_exact(pair.confidence, pair.label, eps).t_i
        assert 0.0 <= t <= 1.0
        assert direct_loss(lesion, t) <= eps
        if t > 0:
            assert direct_loss(lesion, math.nextafter(t, -1.0)) > eps

    def test_confidence_one_ulp_below_one(self):
        # tiny t has far finer ulps than the cut; must not walk them one by one
        c = math.nextafter(1.0, 0.0)
        pair = make_pair([c])
        t = critical_threshold_exact(pair.confidence, pair.label, 0.0).t_i
        assert 1.0 - t <= c < 1.0 - math.nextafter(t, -1.0)

    def test_ceiling_guard(self):
        assert guarded_ceil((1 - 0.2) * 5) == 4
        assert guarded_ceil(4.000000000000001) == 4
        assert guarded_ceil(0.95 * 3) == 3
        assert guarded_ceil(0.0) == 0

    @pytest.mark.parametrize("m", [1, 3, 7, 10, 100, 999])
    def test_required_coverage_matches_enumeration(self, m):
        for eps in np.linspace(0, 1, 41).tolist() + [1 / 3, 2 / 3, 0.1, 0.7]:
            want = min(c for c in range(m + 1) if 1.0 - c / m <= eps)
            assert required_coverage(m, eps) == want


class TestCriticalBisect:
    def test_spec_example(self, each_backend):
        pair = make_pair(LESION4)
        s = critical_threshold_bisect(pair.confidence, pair.label, 0.25, 1e-4)
        assert abs(s.t_i - 0.6) <= 2e-4
        assert direct_loss(LESION4, s.t_i) <= 0.25
        assert s.method == "bisection"

    def test_eps_one(self, each_backend):
        pair = make_pair(LESION4)
        assert critical_threshold_bisect(pair.confidence, pair.label, 1.0, 1e-4).t_i <= 2e-4

    @pytest.mark.parametrize("delta", [0.0, -1e-3])
    def test_nonpositive_tolerance(self, delta):
        pair = make_pair(LESION4)
        with pytest.raises(ValidationError, match="non-positive tolerance"):
            critical_threshold_bisect(pair.confidence, pair.label, 0.25, delta)

    def test_matches_exact(self, each_backend):
        rng = np.random.default_rng(7)
        for _ in range(40):
            p = random_pair(rng)
            for eps in (0.0, 0.1, 0.25, 0.5, 1.0):
                ex = critical_threshold_exact(p.confidence, p.label, eps).t_i
                bi = critical_threshold_bisect(p.confidence, p.label, eps).t_i
                assert abs(ex - bi) <= 2e-4
                assert fnr_loss(p.confidence, p.label, bi).loss <= eps


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_monotone_loss_and_nested_masks(seed):
    rng = np.random.default_rng(seed)
    p = random_pair(rng)
    grid = np.linspace(0, 1, 101)
    losses = [fnr_loss(p.confidence, p.label, t).loss for t in grid]
    assert all(a >= b for a, b in zip(losses, losses[1:]))
    masks = [predict_mask(p.confidence, t).values for t in grid]
    assert all(np.all(a <= b) for a, b in zip(masks, masks[1:]))


class TestHistogram:
    def test_two_bins(self):
        c = conf([0.25, 0.75])
        h = lesion_confidence_histogram(c, LabelVolume(c.dims, [1, 0]), 2)
        assert h.lesion.tolist() == [1, 0]
        assert h.background.tolist() == [0, 1]

    def test_one_goes_to_last_bin(self):
        c = conf([1.0, 1.0, 1.0])
        h = lesion_confidence_histogram(c, LabelVolume(c.dims, [1, 1, 1]), 4)
        assert h.lesion.tolist() == [0, 0, 0, 3]

    def test_uniform_lesion_is_flat(self):
        cfg = GeneratorConfig(dims=(32, 32, 32), n_samples=1, radius_range=(14, 15), seed=11)
        (pair,) = generate(cfg)
        m = pair.label.positives
        assert m >= 10_000
        h = lesion_confidence_histogram(pair.confidence, pair.label, 10)
        assert np.all(np.abs(h.lesion - m / 10) <= 4 * np.sqrt(m / 10))
        assert h.lesion.sum() + h.background.sum() == pair.confidence.dims.size

    def test_bins_must_be_positive(self):
        c = conf([0.5])
        with pytest.raises(ValidationError):
            lesion_confidence_histogram(c, LabelVolume(c.dims, [1]), 0)
