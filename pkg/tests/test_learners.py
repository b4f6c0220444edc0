import numpy as np
import pytest

from spcl.learners import (
    LabeledExample,
    PredictorKind,
    PredictorSpec,
    evaluate,
    init_parameters,
    per_sample_gradient,
    per_sample_loss,
    predict,
    weighted_sgd_step,
)

LIN = PredictorKind.LINEAR_REGRESSION
LOG = PredictorKind.LOGISTIC_REGRESSION
MLP = PredictorKind.MLP


def random_example(rng, spec, sequence=False):
    if sequence:
        steps = int(rng.integers(1, 7))
        return LabeledExample(
            x=rng.normal(0, 1, (steps, spec.input_dim)),
            y=rng.integers(0, spec.output_dim, steps),
            round=int(rng.integers(1, 6)),
        )
    if spec.kind is LIN:
        return LabeledExample(
            x=rng.normal(0, 1, spec.input_dim),
            y=float(rng.normal()),
            round=int(rng.integers(1, 6)),
        )
    return LabeledExample(
        x=rng.normal(0, 1, spec.input_dim),
        y=int(rng.integers(0, spec.output_dim)),
        round=int(rng.integers(1, 6)),
    )


def random_spec(rng, kind):
    d = int(rng.integers(1, 6))
    if kind is LIN:
        return PredictorSpec(kind=LIN, input_dim=d, output_dim=1)
    o = int(rng.integers(2, 5))
    if kind is LOG:
        return PredictorSpec(kind=LOG, input_dim=d, output_dim=o)
    return PredictorSpec(kind=MLP, input_dim=d, output_dim=o, hidden_dim=int(rng.integers(2, 7)))


def finite_difference_gradient(spec, theta, ex, h=1e-5):
    grad = np.zeros_like(theta)
    for i in range(len(theta)):
        up = theta.copy()
        up[i] += h
        down = theta.copy()
        down[i] -= h
        grad[i] = (per_sample_loss(spec, up, ex) - per_sample_loss(spec, down, ex)) / (2 * h)
    return grad


class TestSpecAndInit:
    def test_mlp_param_count(self):
        spec = PredictorSpec(kind=MLP, input_dim=4, output_dim=3, hidden_dim=8)
        assert spec.param_count == 4 * 8 + 8 + 8 * 3 + 3 == 67
        assert init_parameters(spec, 1).shape == (67,)

    def test_init_deterministic(self):
        spec = PredictorSpec(kind=LIN, input_dim=2)
        np.testing.assert_array_equal(init_parameters(spec, 7), init_parameters(spec, 7))
        assert not np.array_equal(init_parameters(spec, 7), init_parameters(spec, 8))

    def test_biases_exactly_zero(self):
        rng = np.random.default_rng(0)
        for kind in (LIN, LOG, MLP):
            spec = random_spec(rng, kind)
            theta = init_parameters(spec, 3)
            d, o = spec.input_dim, spec.output_dim
            if kind is MLP:
                h = spec.hidden_dim
                assert np.all(theta[d * h : d * h + h] == 0)
                assert np.all(theta[d * h + h + h * o :] == 0)
            else:
                assert np.all(theta[d * o :] == 0)
            assert np.all(np.abs(theta) <= 0.1)

    def test_hidden_dim_only_for_mlp(self):
        with pytest.raises(ValueError):
            PredictorSpec(kind=LIN, input_dim=2, hidden_dim=4)
        with pytest.raises(ValueError):
            PredictorSpec(kind=MLP, input_dim=2, output_dim=2)


class TestLoss:
    def test_exact_fit_zero_loss(self):
        spec = PredictorSpec(kind=LIN, input_dim=1)
        ex = LabeledExample(x=[2.0], y=2.0, round=1)
        assert per_sample_loss(spec, np.array([1.0, 0.0]), ex) == 0.0

    def test_half_squared_residual(self):
        spec = PredictorSpec(kind=LIN, input_dim=1)
        ex = LabeledExample(x=[1.0], y=2.0, round=1)
        assert per_sample_loss(spec, np.array([0.0, 0.0]), ex) == pytest.approx(2.0)

    def test_uniform_logits_give_log2(self):
        spec = PredictorSpec(kind=LOG, input_dim=3, output_dim=2)
        ex = LabeledExample(x=[1.0, -1.0, 0.5], y=1, round=1)
        theta = np.zeros(spec.param_count)
        assert per_sample_loss(spec, theta, ex) == pytest.approx(np.log(2.0))

    def test_sequence_loss_is_mean_over_steps(self):
        spec = PredictorSpec(kind=LOG, input_dim=2, output_dim=3)
        rng = np.random.default_rng(4)
        theta = rng.normal(0, 0.5, spec.param_count)
        xs = rng.normal(0, 1, (4, 2))
        ys = rng.integers(0, 3, 4)
        seq = LabeledExample(x=xs, y=ys, round=2)
        per_step = [
            per_sample_loss(spec, theta, LabeledExample(x=xs[i], y=int(ys[i]), round=2))
            for i in range(4)
        ]
        assert per_sample_loss(spec, theta, seq) == pytest.approx(np.mean(per_step))

    def test_loss_nonnegative(self):
        rng = np.random.default_rng(9)
        for kind in (LIN, LOG, MLP):
            for _ in range(50):
                spec = random_spec(rng, kind)
                theta = rng.normal(0, 1, spec.param_count)
                ex = random_example(rng, spec, sequence=(kind is MLP))
                assert per_sample_loss(spec, theta, ex) >= 0.0

    def test_dimension_mismatch_raises(self):
        spec = PredictorSpec(kind=LIN, input_dim=2)
        ex = LabeledExample(x=[1.0, 2.0, 3.0], y=0.0, round=1)
        with pytest.raises(ValueError):
            per_sample_loss(spec, init_parameters(spec, 0), ex)
        with pytest.raises(ValueError):
            per_sample_loss(spec, np.zeros(5), LabeledExample(x=[1.0, 2.0], y=0.0, round=1))


class TestGradient:
    @pytest.mark.parametrize("kind", [LIN, LOG, MLP])
    def test_matches_finite_differences(self, kind):
        rng = np.random.default_rng(17)
        for _ in range(60):
            spec = random_spec(rng, kind)
            theta = rng.normal(0, 0.8, spec.param_count)
            sequence = kind is not LIN and rng.random() < 0.5
            ex = random_example(rng, spec, sequence=sequence)
            analytic = per_sample_gradient(spec, theta, ex)
            numeric = finite_difference_gradient(spec, theta, ex)
            denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-8)
            assert np.linalg.norm(analytic - numeric) / denom <= 1e-4

    def test_zero_at_global_minimum(self):
        spec = PredictorSpec(kind=LIN, input_dim=1)
        ex = LabeledExample(x=[2.0], y=2.0, round=1)
        np.testing.assert_array_equal(
            per_sample_gradient(spec, np.array([1.0, 0.0]), ex), [0.0, 0.0]
        )

    def test_zero_features_leave_residual_in_bias(self):
        spec = PredictorSpec(kind=LIN, input_dim=2)
        ex = LabeledExample(x=[0.0, 0.0], y=3.0, round=1)
        grad = per_sample_gradient(spec, np.zeros(3), ex)
        np.testing.assert_allclose(grad, [0.0, 0.0, -3.0])


class TestSgdStep:
    def test_zero_weights_freeze_theta(self):
        rng = np.random.default_rng(2)
        spec = random_spec(rng, LOG)
        theta = init_parameters(spec, 5)
        batch = [random_example(rng, spec) for _ in range(4)]
        after = weighted_sgd_step(spec, theta, batch, [0.0] * 4, 0.1)
        np.testing.assert_array_equal(after, theta)

    def test_zero_learning_rate_freezes_theta(self):
        rng = np.random.default_rng(2)
        spec = random_spec(rng, LIN)
        theta = init_parameters(spec, 5)
        batch = [random_example(rng, spec) for _ in range(4)]
        after = weighted_sgd_step(spec, theta, batch, [1.0] * 4, 0.0)
        np.testing.assert_array_equal(after, theta)

    def test_single_example_matches_gradient(self):
        rng = np.random.default_rng(8)
        spec = random_spec(rng, MLP)
        theta = rng.normal(0, 0.5, spec.param_count)
        ex = random_example(rng, spec)
        after = weighted_sgd_step(spec, theta, [ex], [1.0], 0.05)
        expected = theta - 0.05 * per_sample_gradient(spec, theta, ex)
        np.testing.assert_array_equal(after, expected)

    def test_halved_weights_doubled_lr_identical(self):
        rng = np.random.default_rng(12)
        spec = random_spec(rng, LOG)
        theta = rng.normal(0, 0.5, spec.param_count)
        batch = [random_example(rng, spec) for _ in range(6)]
        weights = rng.uniform(0, 1, 6)
        a = weighted_sgd_step(spec, theta, batch, weights, 0.3)
        b = weighted_sgd_step(spec, theta, batch, weights / 2.0, 0.6)
        np.testing.assert_array_equal(a, b)

    def test_misaligned_weights_raise(self):
        rng = np.random.default_rng(2)
        spec = random_spec(rng, LIN)
        batch = [random_example(rng, spec)]
        with pytest.raises(ValueError):
            weighted_sgd_step(spec, init_parameters(spec, 0), batch, [1.0, 1.0], 0.1)
        with pytest.raises(ValueError):
            weighted_sgd_step(spec, init_parameters(spec, 0), [], [], 0.1)


class TestEvaluate:
    def test_perfect_fit(self):
        spec = PredictorSpec(kind=LIN, input_dim=1)
        theta = np.array([2.0, 1.0])
        data = [LabeledExample(x=[x], y=2.0 * x + 1.0, round=1) for x in (0.0, 0.5, -1.0)]
        got = evaluate(spec, theta, data)
        assert got == {"mean_loss": 0.0, "accuracy": 1.0}

    def test_singleton_matches_per_sample_loss(self):
        rng = np.random.default_rng(3)
        spec = random_spec(rng, LOG)
        theta = rng.normal(0, 0.5, spec.param_count)
        ex = random_example(rng, spec)
        got = evaluate(spec, theta, [ex])
        assert got["mean_loss"] == pytest.approx(per_sample_loss(spec, theta, ex))

    def test_uniform_classifier_near_half(self):
        spec = PredictorSpec(kind=LOG, input_dim=2, output_dim=2)
        theta = np.zeros(spec.param_count)
        theta[:4] = [0.03, -0.02, -0.01, 0.04]  # arbitrary tiny tilt
        rng = np.random.default_rng(31)
        data = [
            LabeledExample(x=rng.normal(0, 1, 2), y=int(rng.integers(0, 2)), round=1)
            for _ in range(10_000)
        ]
        got = evaluate(spec, theta, data)
        assert abs(got["accuracy"] - 0.5) <= 0.05

    def test_empty_dataset_raises(self):
        spec = PredictorSpec(kind=LIN, input_dim=1)
        with pytest.raises(ValueError):
            evaluate(spec, init_parameters(spec, 0), [])


class TestDeterminism:
    def test_bitwise_identical_trajectories(self):
        rng = np.random.default_rng(21)
        spec = random_spec(rng, MLP)
        batch = [random_example(rng, spec) for _ in range(8)]
        weights = rng.uniform(0, 1, 8)

        def run():
            theta = init_parameters(spec, 42)
            for _ in range(20):
                theta = weighted_sgd_step(spec, theta, batch, weights, 0.05)
            return theta

        np.testing.assert_array_equal(run(), run())

    def test_predict_shape(self):
        spec = PredictorSpec(kind=MLP, input_dim=3, output_dim=4, hidden_dim=5)
        out = predict(spec, init_parameters(spec, 0), np.zeros(3))
        assert out.shape == (4,)
