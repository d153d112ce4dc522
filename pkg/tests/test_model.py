"""Model zoo: initialization, loss/gradient, SGD training, evaluation."""

import math

import numpy as np
import pytest

from fedeval.data import LabeledDataset, generate_synthetic
from fedeval.errors import NumericError
from fedeval.model import (
    ModelParams,
    ModelSpec,
    SgdConfig,
    evaluate,
    init_params,
    loss_and_grad,
    minibatch_schedule,
    sgd_train,
)
from tests.conftest import tiny_dataset


def finite_difference_grad(fn, values, step=1e-5):
    """Central-difference gradient oracle, independent of backprop."""
    grad = np.zeros_like(values)
    for i in range(values.size):
        plus = values.copy()
        minus = values.copy()
        plus[i] += step
        minus[i] -= step
        grad[i] = (fn(plus) - fn(minus)) / (2 * step)
    return grad


def max_relative_error(analytic, numeric):
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    mask = scale > 1e-8
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(analytic - numeric)[mask] / scale[mask]))


def random_batch(rng, spec, n=6):
    features = rng.normal(size=(n, spec.n_features))
    labels = rng.integers(0, spec.num_classes, size=n)
    return LabeledDataset(features, labels, spec.num_classes)


class TestInit:
    def test_zero_scale_gives_zero_vector(self):
        spec = ModelSpec("linear", 3, 2, init_seed=1, init_scale=0.0)
        assert np.all(init_params(spec).values == 0.0)

    def test_deterministic(self, mlp_spec):
        np.testing.assert_array_equal(init_params(mlp_spec).values, init_params(mlp_spec).values)

    def test_linear_parameter_count(self):
        spec = ModelSpec("linear", 3, 2)
        assert init_params(spec).values.size == 3 * 2 + 2

    def test_mlp_parameter_count(self):
        spec = ModelSpec("mlp", 4, 3, hidden_units=5)
        assert init_params(spec).values.size == 4 * 5 + 5 + 5 * 3 + 3

    def test_biases_start_at_zero(self):
        spec = ModelSpec("linear", 3, 2, init_seed=9, init_scale=0.5)
        params = init_params(spec)
        assert np.all(params.values[6:] == 0.0)

    def test_mlp_requires_hidden_units(self):
        with pytest.raises(ValueError):
            ModelSpec("mlp", 3, 2)

    def test_params_length_validated(self):
        spec = ModelSpec("linear", 3, 2)
        with pytest.raises(ValueError):
            ModelParams(np.zeros(5), spec.layer_shapes())

    def test_params_must_be_finite(self):
        spec = ModelSpec("linear", 3, 2)
        with pytest.raises(NumericError):
            ModelParams(np.full(8, np.nan), spec.layer_shapes())


class TestLossAndGrad:
    def test_zero_params_uniform_softmax_loss(self, linear_spec):
        params = init_params(ModelSpec("linear", 12, 10, init_scale=0.0))
        batch = tiny_dataset(np.random.default_rng(0).normal(size=(4, 12)), [0, 3, 7, 9], 10)
        loss, _ = loss_and_grad(params, linear_spec, batch)
        assert loss == pytest.approx(math.log(10), abs=1e-12)

    @pytest.mark.parametrize("kind", ["linear", "mlp"])
    def test_gradient_matches_finite_differences(self, kind):
        rng = np.random.default_rng(11)
        spec = ModelSpec(kind, 5, 4, hidden_units=6 if kind == "mlp" else None)
        for trial in range(10):
            values = rng.normal(scale=0.8, size=spec.param_count)
            batch = random_batch(rng, spec)
            _, grad = loss_and_grad(values, spec, batch)
            numeric = finite_difference_grad(
                lambda v: loss_and_grad(v, spec, batch)[0], values
            )
            assert max_relative_error(grad, numeric) < 1e-4

    def test_gradient_with_weight_decay(self):
        rng = np.random.default_rng(3)
        spec = ModelSpec("linear", 4, 3)
        values = rng.normal(size=spec.param_count)
        batch = random_batch(rng, spec)
        _, grad = loss_and_grad(values, spec, batch, weight_decay=0.2)
        numeric = finite_difference_grad(
            lambda v: loss_and_grad(v, spec, batch, weight_decay=0.2)[0], values
        )
        assert max_relative_error(grad, numeric) < 1e-4

    def test_mean_reduction_duplicate_invariance(self, linear_spec):
        rng = np.random.default_rng(5)
        values = rng.normal(size=linear_spec.param_count)
        batch = random_batch(rng, linear_spec)
        doubled = LabeledDataset(
            np.concatenate([batch.features, batch.features]),
            np.concatenate([batch.labels, batch.labels]),
            batch.num_classes,
        )
        loss_a, grad_a = loss_and_grad(values, linear_spec, batch)
        loss_b, grad_b = loss_and_grad(values, linear_spec, doubled)
        assert loss_a == pytest.approx(loss_b, abs=1e-12)
        np.testing.assert_allclose(grad_a, grad_b, atol=1e-12)

    def test_empty_batch_rejected(self, linear_spec):
        empty = LabeledDataset(np.zeros((0, 12)), np.zeros(0, dtype=int), 10)
        with pytest.raises(ValueError):
            loss_and_grad(init_params(linear_spec), linear_spec, empty)

    def test_non_finite_params_rejected(self, linear_spec):
        batch = random_batch(np.random.default_rng(0), linear_spec)
        bad = np.full(linear_spec.param_count, np.inf)
        with pytest.raises(NumericError):
            loss_and_grad(bad, linear_spec, batch)


class TestSgdTrain:
    def test_zero_learning_rate_keeps_params(self, linear_spec, blob_shards):
        shard = blob_shards[0]
        params = init_params(linear_spec)
        cfg = SgdConfig(learning_rate=0.0, batch_size=8, local_epochs=3)
        out, cost = sgd_train(params, linear_spec, shard.train, cfg, seed=4)
        np.testing.assert_array_equal(out.values, params.values)
        assert cost == 3 * shard.train.n_samples

    def test_single_full_batch_step_matches_formula(self, linear_spec, blob_shards):
        shard = blob_shards[1]
        params = init_params(linear_spec)
        cfg = SgdConfig(learning_rate=0.3, batch_size=shard.train.n_samples, local_epochs=1)
        out, _ = sgd_train(params, linear_spec, shard.train, cfg, seed=9)
        _, grad = loss_and_grad(params, linear_spec, shard.train)
        # the lone batch is shuffled, so summation order may differ by ulps
        np.testing.assert_allclose(out.values, params.values - 0.3 * grad, rtol=0, atol=1e-13)

    def test_separable_blobs_reach_high_accuracy(self):
        ds = generate_synthetic(2, 6, 40, class_separation=6.0, seed=2)
        spec = ModelSpec("linear", 6, 2, init_seed=0, init_scale=0.01)
        cfg = SgdConfig(learning_rate=0.2, batch_size=16, local_epochs=20)
        out, _ = sgd_train(init_params(spec), spec, ds, cfg, seed=1)
        assert evaluate(out, spec, ds) > 0.95

    def test_bit_reproducible(self, linear_spec, blob_shards):
        shard = blob_shards[2]
        cfg = SgdConfig(learning_rate=0.1, batch_size=8, local_epochs=2)
        a, _ = sgd_train(init_params(linear_spec), linear_spec, shard.train, cfg, seed=21)
        b, _ = sgd_train(init_params(linear_spec), linear_spec, shard.train, cfg, seed=21)
        np.testing.assert_array_equal(a.values, b.values)

    def test_full_batch_loss_non_increasing_on_convex_model(self):
        ds = generate_synthetic(3, 5, 30, class_separation=2.0, seed=8)
        spec = ModelSpec("linear", 5, 3, init_seed=4, init_scale=0.2)
        params = init_params(spec)
        cfg = SgdConfig(learning_rate=0.05, batch_size=ds.n_samples, local_epochs=1)
        losses = []
        for step in range(25):
            losses.append(loss_and_grad(params, spec, ds)[0])
            params, _ = sgd_train(params, spec, ds, cfg, seed=step)
        losses.append(loss_and_grad(params, spec, ds)[0])
        diffs = np.diff(losses)
        assert np.all(diffs <= 1e-9)

    def test_cost_units_count_every_example_once_per_epoch(self, linear_spec, blob_shards):
        shard = blob_shards[3]
        cfg = SgdConfig(learning_rate=0.1, batch_size=7, local_epochs=4)
        _, cost = sgd_train(init_params(linear_spec), linear_spec, shard.train, cfg, seed=0)
        assert cost == 4 * shard.train.n_samples


class TestMinibatchSchedule:
    def test_partitions_all_indices_each_epoch(self):
        batches = list(minibatch_schedule(10, 4, 2, seed=3))
        assert [b.size for b in batches] == [4, 4, 2, 4, 4, 2]
        assert sorted(np.concatenate(batches[:3]).tolist()) == list(range(10))

    def test_deterministic(self):
        a = [b.tolist() for b in minibatch_schedule(9, 4, 3, seed=5)]
        b = [b.tolist() for b in minibatch_schedule(9, 4, 3, seed=5)]
        assert a == b


class TestEvaluate:
    def test_tie_breaks_to_lowest_class(self):
        spec = ModelSpec("linear", 2, 2, init_scale=0.0)
        params = init_params(spec)
        test = tiny_dataset([[1.0, 0.0], [0.0, 1.0]], [0, 0], 2)
        assert evaluate(params, spec, test) == 1.0

    def test_perfect_predictions(self):
        spec = ModelSpec("linear", 2, 2, init_scale=0.0)
        values = np.zeros(spec.param_count)
        values[0] = 5.0  # class-0 weight on feature 0
        values[3] = 5.0  # class-1 weight on feature 1
        test = tiny_dataset([[1.0, 0.0], [0.0, 1.0]], [0, 1], 2)
        assert evaluate(values, spec, test) == 1.0

    def test_counts_fraction(self):
        spec = ModelSpec("linear", 2, 2, init_scale=0.0)
        values = np.zeros(spec.param_count)
        values[0] = 5.0
        values[3] = 5.0
        test = tiny_dataset(
            [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 0.0]], [0, 1, 0, 1], 2
        )
        assert evaluate(values, spec, test) == 0.75

    def test_empty_test_rejected(self, linear_spec):
        empty = LabeledDataset(np.zeros((0, 12)), np.zeros(0, dtype=int), 10)
        with pytest.raises(ValueError):
            evaluate(init_params(linear_spec), linear_spec, empty)
