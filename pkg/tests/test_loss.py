import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import log_softmax

from helpers import CONSTRUCTORS, central_difference, naive_margin_loss, random_priors, random_spec
from longtail import loss
from longtail.loss import MarginSpec, loss_grad, loss_value


def softmax_xent(y, f):
    return -log_softmax(f)[y]


class TestValues:
    def test_erm_binary(self):
        assert loss_value(loss.spec_erm(2), 0, [0.0, 0.0]) == pytest.approx(math.log(2), abs=1e-15)

    def test_erm_three(self):
        assert loss_value(loss.spec_erm(3), 0, [0.0, 0.0, 0.0]) == pytest.approx(math.log(3), abs=1e-15)

    def test_logit_adjusted_rare_label(self):
        spec = loss.spec_logit_adjusted([0.9, 0.1], 1.0)
        assert loss_value(spec, 1, [0.0, 0.0]) == pytest.approx(math.log(10), abs=1e-12)

    def test_erm_grad_symmetric(self):
        np.testing.assert_allclose(loss_grad(loss.spec_erm(2), 0, [0.0, 0.0]), [-0.5, 0.5], atol=1e-15)

    def test_erm_matches_softmax_xent(self):
        rng = np.random.default_rng(0)
        spec = loss.spec_erm(5)
        for _ in range(100):
            f = rng.normal(scale=3, size=5)
            y = int(rng.integers(5))
            assert loss_value(spec, y, f) == pytest.approx(softmax_xent(y, f), abs=1e-12)

    def test_matches_naive_formula(self):
        rng = np.random.default_rng(1)
        for name in CONSTRUCTORS:
            for _ in range(20):
                spec = random_spec(rng, name)
                L = spec.num_classes
                f = rng.normal(size=L)
                y = int(rng.integers(L))
                expected = naive_margin_loss(spec.alpha, spec.delta, y, f)
                assert loss_value(spec, y, f) == pytest.approx(expected, rel=1e-12)

    def test_extreme_logits_finite(self):
        rng = np.random.default_rng(2)
        for name in CONSTRUCTORS:
            spec = random_spec(rng, name, L=4)
            f = rng.choice([-1e4, 1e4], size=4)
            for y in range(4):
                assert np.isfinite(loss_value(spec, y, f))
                assert np.all(np.isfinite(loss_grad(spec, y, f)))

    def test_extreme_logits_value(self):
        spec = loss.spec_erm(2)
        assert loss_value(spec, 0, [1e4, -1e4]) == 0.0
        assert loss_value(spec, 1, [1e4, -1e4]) == pytest.approx(2e4)

    def test_batch_agrees_with_single(self):
        rng = np.random.default_rng(3)
        spec = random_spec(rng, "combined", L=4)
        f = rng.normal(size=(10, 4))
        y = rng.integers(4, size=10)
        batch = loss.margin_losses(spec, y, f)
        grads = loss.margin_loss_grads(spec, y, f)
        for i in range(10):
            assert batch[i] == loss_value(spec, int(y[i]), f[i])
            np.testing.assert_array_equal(grads[i], loss_grad(spec, int(y[i]), f[i]))

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            loss_value(loss.spec_erm(2), 2, [0.0, 0.0])


class TestGradients:
    @pytest.mark.parametrize("name", CONSTRUCTORS)
    def test_finite_differences(self, name):
        rng = np.random.default_rng(abs(hash(name)) % 2**32)
        worst = 0.0
        for _ in range(200):
            spec = random_spec(rng, name)
            L = spec.num_classes
            y = int(rng.integers(L))
            f = rng.normal(scale=2.0, size=L)
            g = loss_grad(spec, y, f)
            g_fd = central_difference(lambda z: loss_value(spec, y, z), f, h=1e-5)
            worst = max(worst, np.linalg.norm(g - g_fd) / max(np.linalg.norm(g), 1e-8))
        assert worst <= 1e-6

    @pytest.mark.parametrize("name", CONSTRUCTORS)
    def test_components_sum_to_zero(self, name):
        rng = np.random.default_rng(7)
        for _ in range(50):
            spec = random_spec(rng, name)
            f = rng.normal(scale=5, size=spec.num_classes)
            g = loss_grad(spec, int(rng.integers(spec.num_classes)), f)
            assert abs(g.sum()) <= 1e-12 * max(1.0, spec.alpha.max())

    def test_balanced_scales_erm_gradient(self):
        pi = [0.95, 0.05]
        f = np.array([0.3, -0.2])
        for y in (0, 1):
            np.testing.assert_allclose(
                loss_grad(loss.spec_balanced(pi), y, f),
                loss_grad(loss.spec_erm(2), y, f) / pi[y],
                rtol=1e-14,
            )


class TestConstructors:
    def test_erm_parameters(self):
        spec = loss.spec_erm(4)
        assert np.all(spec.alpha == 1) and np.all(spec.delta == 0)

    def test_balanced_weights(self):
        np.testing.assert_allclose(loss.spec_balanced([0.95, 0.05]).alpha, [1 / 0.95, 20.0], rtol=1e-14)

    def test_balanced_uniform_is_scaled_erm(self):
        spec = loss.spec_balanced(np.full(4, 0.25))
        f = np.array([0.1, -1.0, 2.0, 0.5])
        assert loss_value(spec, 2, f) == pytest.approx(4 * softmax_xent(2, f), rel=1e-14)

    def test_adaptive_margin(self):
        spec = loss.spec_adaptive([1 / 16, 15 / 16])
        assert spec.delta[0, 1] == pytest.approx(2.0, rel=1e-14)
        assert spec.delta[0, 0] == 0.0

    def test_adaptive_uniform_binary(self):
        spec = loss.spec_adaptive([0.5, 0.5])
        np.testing.assert_allclose(spec.delta, [[0, 2**0.25], [2**0.25, 0]], rtol=1e-14)

    def test_adaptive_rows_constant(self):
        spec = loss.spec_adaptive(random_priors(np.random.default_rng(0), 5))
        for y in range(5):
            off = np.delete(spec.delta[y], y)
            assert np.all(off == off[0])

    def test_adaptive_scale(self):
        pi = [0.2, 0.8]
        np.testing.assert_allclose(loss.spec_adaptive(pi, 0.5).delta, 0.5 * loss.spec_adaptive(pi).delta)

    def test_equalised_margin(self):
        spec = loss.spec_equalised([0.9, 0.1], 1.0)
        assert spec.delta[0, 1] == pytest.approx(math.log(0.1), rel=1e-14)

    def test_equalised_columns_constant(self):
        spec = loss.spec_equalised(random_priors(np.random.default_rng(1), 5), 0.7)
        for k in range(5):
            off = np.delete(spec.delta[:, k], k)
            assert np.all(off == off[0])

    def test_equalised_tau_zero_is_erm(self):
        assert np.all(loss.spec_equalised([0.3, 0.7], 0.0).delta == 0)

    def test_logit_adjusted_margin(self):
        spec = loss.spec_logit_adjusted([0.9, 0.1], 1.0)
        assert spec.delta[1, 0] == pytest.approx(math.log(9), abs=1e-14)

    def test_logit_adjusted_antisymmetric(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            spec = random_spec(rng, "logit_adjusted")
            assert np.all(spec.delta + spec.delta.T == 0)

    def test_logit_adjusted_uniform_equals_erm(self):
        rng = np.random.default_rng(3)
        la = loss.spec_logit_adjusted(np.full(3, 1 / 3), 1.7)
        erm = loss.spec_erm(3)
        for _ in range(100):
            f = rng.normal(size=3)
            y = int(rng.integers(3))
            assert abs(loss_value(la, y, f) - loss_value(erm, y, f)) <= 1e-12

    def test_from_delta_prior_is_logit_adjusted(self):
        pi = random_priors(np.random.default_rng(4), 4)
        spec = loss.spec_from_delta(pi, pi)
        la = loss.spec_logit_adjusted(pi, 1.0)
        np.testing.assert_allclose(spec.alpha, 1.0, rtol=1e-14)
        np.testing.assert_allclose(spec.delta, la.delta, atol=1e-14)

    def test_from_delta_ones_is_balanced(self):
        pi = random_priors(np.random.default_rng(5), 4)
        spec = loss.spec_from_delta(pi, np.ones(4))
        np.testing.assert_allclose(spec.alpha, loss.spec_balanced(pi).alpha, rtol=1e-14)
        assert np.all(spec.delta == 0)

    def test_from_delta_scale_invariance(self):
        pi = random_priors(np.random.default_rng(6), 3)
        a = loss.spec_from_delta(pi, pi)
        b = loss.spec_from_delta(pi, 3.5 * pi)
        np.testing.assert_allclose(b.delta, a.delta, atol=1e-14)
        np.testing.assert_allclose(b.alpha, 3.5 * a.alpha, rtol=1e-14)

    def test_from_delta_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            loss.spec_from_delta([0.5, 0.5], [1.0, 0.0])

    def test_combined_uniform(self):
        spec = loss.spec_combined([0.5, 0.5], 1.0)
        np.testing.assert_allclose(spec.delta, [[0, 2**0.25], [2**0.25, 0]], rtol=1e-14)
        np.testing.assert_allclose(spec.delta, loss.spec_adaptive([0.5, 0.5]).delta, rtol=1e-14)

    def test_combined_is_sum_of_parents(self):
        pi = random_priors(np.random.default_rng(7), 4)
        spec = loss.spec_combined(pi, 0.8)
        expected = loss.spec_logit_adjusted(pi, 0.8).delta + loss.spec_adaptive(pi).delta
        np.testing.assert_array_equal(spec.delta, expected)

    def test_interpolated_endpoints(self):
        pi = random_priors(np.random.default_rng(8), 4)
        np.testing.assert_allclose(
            loss.spec_interpolated(pi, 1.3, 1.3).delta, loss.spec_logit_adjusted(pi, 1.3).delta, atol=1e-14
        )
        np.testing.assert_allclose(
            loss.spec_interpolated(pi, 0.0, 0.6).delta, loss.spec_equalised(pi, 0.6).delta, atol=1e-14
        )

    def test_interpolated_uniform(self):
        uniform = np.full(3, 1 / 3)
        assert np.all(loss.spec_interpolated(uniform, 1.2, 1.2).delta == 0)
        # unequal exponents leave a constant off-diagonal margin (tau2 - tau1) * log(1/L)
        delta = loss.spec_interpolated(uniform, 0.4, 1.9).delta
        off = delta[~np.eye(3, dtype=bool)]
        np.testing.assert_allclose(off, 1.5 * math.log(1 / 3), rtol=1e-14)

    def test_diagonal_zeroed(self):
        spec = MarginSpec(np.ones(2), [[5.0, 1.0], [2.0, 7.0]])
        assert spec.delta[0, 0] == 0 and spec.delta[1, 1] == 0

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            MarginSpec([1.0, 0.0], np.zeros((2, 2)))
        with pytest.raises(ValueError):
            MarginSpec([1.0, 1.0], np.zeros((3, 3)))

    def test_immutable(self):
        spec = loss.spec_erm(2)
        with pytest.raises(ValueError):
            spec.delta[0, 1] = 1.0

    def test_serialisation_round_trip(self):
        spec = random_spec(np.random.default_rng(9), "combined")
        back = MarginSpec.from_dict(spec.to_dict())
        np.testing.assert_array_equal(back.alpha, spec.alpha)
        np.testing.assert_array_equal(back.delta, spec.delta)
        assert back.name == "combined"

    def test_build_spec(self):
        pi = [0.3, 0.7]
        np.testing.assert_array_equal(loss.build_spec("logit_adjusted", pi, 0.5).delta,
                                      loss.spec_logit_adjusted(pi, 0.5).delta)
        with pytest.raises(ValueError):
            loss.build_spec("nope", pi)


finite = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(
    f=st.lists(finite, min_size=3, max_size=3),
    c=st.floats(-1e3, 1e3),
    y=st.integers(0, 2),
    tau=st.floats(0, 3),
)
def test_shift_invariance(f, c, y, tau):
    spec = loss.spec_combined([0.7, 0.2, 0.1], tau)
    f = np.array(f)
    assert loss_value(spec, y, f + c) == pytest.approx(loss_value(spec, y, f), abs=1e-10, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    f=st.lists(finite, min_size=3, max_size=3),
    y=st.integers(0, 2),
    k=st.integers(0, 2),
    bump=st.floats(1e-3, 5),
)
def test_margin_monotonicity(f, y, k, bump):
    if k == y:
        return
    base = loss.spec_adaptive([0.6, 0.3, 0.1])
    delta = base.delta.copy()
    delta[y, k] += bump
    bigger = MarginSpec(base.alpha, delta)
    f = np.array(f)
    before, after = loss_value(base, y, f), loss_value(bigger, y, f)
    # strict in exact arithmetic; require it only when the increase exceeds the float spacing
    assert after >= before
    z = base.delta[y] + f - f[y]
    grown = np.exp(z[k]) * np.expm1(bump)
    increase = np.log1p(grown / np.exp(np.logaddexp.reduce(z)))
    if increase > 8 * np.spacing(max(1.0, before)):
        assert after > before
