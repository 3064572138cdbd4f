import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from longtail.dist import (
    NEGATIVE,
    POSITIVE,
    ClassPriors,
    GaussianTask,
    LabeledDataset,
    LongTailProfile,
    circle_means,
    derive_seeds,
    priors_from_counts,
    profile_counts,
    sample_class_conditional,
    sample_gaussian,
)


class TestPriors:
    def test_uniform(self):
        np.testing.assert_array_equal(priors_from_counts([50, 50]).probs, [0.5, 0.5])

    def test_five_percent_positive(self):
        np.testing.assert_allclose(priors_from_counts([9500, 500]).probs, [0.95, 0.05], rtol=0, atol=1e-15)

    def test_three_classes(self):
        np.testing.assert_allclose(
            priors_from_counts([100, 10, 1]).probs, [100 / 111, 10 / 111, 1 / 111], rtol=0, atol=1e-15
        )

    @pytest.mark.parametrize("counts", [[3, 0, 1], [5, -1], []])
    def test_rejects_nonpositive(self, counts):
        with pytest.raises(ValueError):
            priors_from_counts(counts)

    def test_rejects_zero_probability(self):
        with pytest.raises(ValueError):
            ClassPriors([1.0, 0.0])

    def test_rejects_unnormalised(self):
        with pytest.raises(ValueError):
            ClassPriors([0.5, 0.6])

    def test_immutable(self):
        p = ClassPriors.uniform(3)
        with pytest.raises(ValueError):
            p.probs[0] = 1.0


class TestProfiles:
    def test_exp_two_classes(self):
        assert profile_counts(LongTailProfile("exp", 2, 100, 100)).tolist() == [100, 1]

    def test_step_four_classes(self):
        assert profile_counts(LongTailProfile("step", 4, 100, 100)).tolist() == [100, 100, 1, 1]

    def test_exp_three_classes(self):
        # 100 * 100**(-y/2) for y = 0, 1, 2
        assert profile_counts(LongTailProfile("exp", 3, 100, 100)).tolist() == [100, 10, 1]

    def test_step_odd_classes_puts_middle_in_head(self):
        assert profile_counts(LongTailProfile("step", 5, 50, 10)).tolist() == [50, 50, 50, 5, 5]

    def test_counts_clamped_to_one(self):
        assert profile_counts(LongTailProfile("exp", 3, 10, 1000)).tolist() == [10, 1, 1]

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            profile_counts(LongTailProfile("exp", 1, 100, 10))

    @settings(max_examples=200, deadline=None)
    @given(
        kind=st.sampled_from(["exp", "step"]),
        L=st.integers(2, 200),
        max_count=st.integers(100, 5000),
        rho=st.floats(1.0, 100.0),
    )
    def test_monotone_and_ratio(self, kind, L, max_count, rho):
        counts = profile_counts(LongTailProfile(kind, L, max_count, rho))
        assert counts.size == L
        assert np.all(counts >= 1)
        assert np.all(np.diff(counts) <= 0)
        # the smallest count is round(max_count / rho), so the ratio is off by at most half a unit
        lo = max_count / rho
        assert abs(counts.min() - lo) <= 0.5 + 1e-9
        assert priors_from_counts(counts).probs.sum() == pytest.approx(1.0, abs=1e-12)


class TestGaussianSampling:
    def test_degenerate_variance(self):
        task = GaussianTask(sigma=1e-9, prior_plus=0.5)
        data = sample_gaussian(task, 100, seed=3)
        pos = data.features[data.labels == POSITIVE]
        assert len(pos) > 0
        assert np.max(np.abs(pos - task.mean_plus)) < 1e-6

    def test_positive_count_binomial(self):
        data = sample_gaussian(GaussianTask(), 10_000, seed=11)
        n_pos = int(np.sum(data.labels == POSITIVE))
        sd = math.sqrt(10_000 * 0.05 * 0.95)
        assert abs(n_pos - 500) <= 5 * sd

    def test_deterministic(self):
        a = sample_gaussian(GaussianTask(), 500, seed=42)
        b = sample_gaussian(GaussianTask(), 500, seed=42)
        assert a.features.tobytes() == b.features.tobytes()
        assert a.labels.tobytes() == b.labels.tobytes()

    def test_different_seeds_differ(self):
        a = sample_gaussian(GaussianTask(), 100, seed=1)
        b = sample_gaussian(GaussianTask(), 100, seed=2)
        assert not np.array_equal(a.features, b.features)

    def test_label_frequency_converges(self):
        data = sample_gaussian(GaussianTask(), 100_000, seed=2024)
        assert abs(np.mean(data.labels == POSITIVE) - 0.05) < 0.01

    def test_class_counts_match_labels(self):
        data = sample_gaussian(GaussianTask(), 1000, seed=0)
        assert data.class_counts.sum() == 1000
        assert data.class_counts[NEGATIVE] == np.sum(data.labels == NEGATIVE)

    @pytest.mark.parametrize("kwargs", [{"sigma": 0.0}, {"prior_plus": 0.0}, {"prior_plus": 1.0}])
    def test_invalid_task(self, kwargs):
        with pytest.raises(ValueError):
            GaussianTask(**kwargs)

    def test_class_conditional_exact_counts(self):
        counts = np.array([30, 10, 2])
        data = sample_class_conditional(circle_means(3), 1.0, counts, seed=5)
        assert data.class_counts.tolist() == counts.tolist()


def test_circle_means_radius():
    means = circle_means(7, radius=3.0)
    np.testing.assert_allclose(np.linalg.norm(means, axis=1), 3.0)


def test_derive_seeds_keyed():
    assert derive_seeds(0, 1, n=3) == derive_seeds(0, 1, n=3)
    assert derive_seeds(0, 1) != derive_seeds(0, 2)


def test_dataset_rejects_bad_labels():
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((2, 1)), [0, 3], 2)
