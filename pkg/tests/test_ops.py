import math

import numpy as np
import pytest

from tbnet.engine import ops
from tbnet.engine.gradcheck import numerical_gradient, relative_error
from tbnet.engine.im2col import col2im, im2col, output_size
from tbnet.engine.tensor import Tensor, backward, no_grad
from tbnet.errors import ContractError, DegenerateBatchError, LabelError, ShapeError

SEEDS = range(100)
PER_OP_TOLERANCE = 1e-4


def assert_gradients_match(loss_fn, inputs, h=1e-3, tol=PER_OP_TOLERANCE):
    for tensor in inputs:
        tensor.zero_grad()
    backward(loss_fn())

    def scalar():
        with no_grad():
            return float(loss_fn().item())

    for tensor in inputs:
        numeric = numerical_gradient(scalar, tensor, h)
        err = relative_error(tensor.grad, numeric)
        assert err < tol, f"relative error {err:.2e} for shape {tensor.shape}"


def weighted_sum(out: Tensor, weights: np.ndarray) -> Tensor:
    return ops.sum_all(ops.mul(out, Tensor(weights)))


def naive_conv(x, w, b, stride, padding):
    n, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    out = np.zeros((n, f, oh, ow))
    for i in range(oh):
        for j in range(ow):
            patch = xp[:, :, i * stride:i * stride + kh, j * stride:j * stride + kw]
            out[:, :, i, j] = np.tensordot(patch, w, axes=([1, 2, 3], [1, 2, 3])) + b
    return out


class TestConv2d:
    def test_ones_kernel(self):
        x = Tensor(np.ones((1, 1, 3, 3)))
        w = Tensor(np.ones((1, 1, 2, 2)))
        out = ops.conv2d(x, w)
        assert out.shape == (1, 1, 2, 2)
        assert np.allclose(out.data, 4.0)

    def test_padding_and_stride_output_size(self):
        out = ops.conv2d(Tensor(np.ones((2, 3, 7, 7))), Tensor(np.ones((5, 3, 3, 3))), stride=2, padding=1)
        assert out.shape == (2, 5, 4, 4)

    @pytest.mark.parametrize("stride,padding,k", [(1, 0, 3), (2, 1, 3), (1, 1, 1), (2, 0, 1), (2, 3, 7)])
    def test_matches_naive_loops(self, float64, rng, stride, padding, k):
        x = rng.normal(size=(2, 3, 9, 9))
        w = rng.normal(size=(4, 3, k, k))
        b = rng.normal(size=4)
        out = ops.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=stride, padding=padding)
        assert np.allclose(out.data, naive_conv(x, w, b, stride, padding))

    def test_linear_in_input(self, float64, rng):
        x1, x2 = rng.normal(size=(2, 2, 3, 6, 6))
        w = Tensor(rng.normal(size=(4, 3, 3, 3)))
        a, b = 1.5, -0.75
        combined = ops.conv2d(Tensor(a * x1 + b * x2), w, stride=2, padding=1).data
        separate = a * ops.conv2d(Tensor(x1), w, stride=2, padding=1).data + b * ops.conv2d(Tensor(x2), w, stride=2, padding=1).data
        assert np.allclose(combined, separate)

    @pytest.mark.parametrize("seed", range(50))
    def test_output_size_for_random_geometry(self, seed):
        draw = np.random.default_rng(seed)
        n, c, f = (int(v) for v in draw.integers(1, 4, size=3))
        h, w = (int(v) for v in draw.integers(3, 12, size=2))
        padding = int(draw.integers(0, 3))
        k = int(draw.integers(1, min(h, w) + 2 * padding + 1))
        stride = int(draw.integers(1, 4))
        out = ops.conv2d(Tensor(np.ones((n, c, h, w))), Tensor(np.ones((f, c, k, k))), stride=stride, padding=padding)
        expected = (n, f, (h + 2 * padding - k) // stride + 1, (w + 2 * padding - k) // stride + 1)
        assert out.shape == expected
        assert expected[2:] == (output_size(h, k, stride, padding), output_size(w, k, stride, padding))

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            ops.conv2d(Tensor(np.ones((1, 2, 4, 4))), Tensor(np.ones((1, 3, 3, 3))))

    def test_kernel_larger_than_input(self):
        with pytest.raises(ShapeError):
            ops.conv2d(Tensor(np.ones((1, 1, 2, 2))), Tensor(np.ones((1, 1, 3, 3))))

    @pytest.mark.parametrize("stride,padding,k", [(1, 1, 3), (2, 0, 3), (1, 0, 1)])
    def test_gradients(self, float64, stride, padding, k):
        for seed in SEEDS:
            rng = np.random.default_rng(seed)
            x = Tensor(rng.normal(size=(2, 2, 5, 5)), requires_grad=True)
            w = Tensor(rng.normal(size=(3, 2, k, k)), requires_grad=True)
            b = Tensor(rng.normal(size=3), requires_grad=True)
            out_shape = ops.conv2d(x, w, b, stride, padding).shape
            weights = rng.normal(size=out_shape)
            assert_gradients_match(lambda: weighted_sum(ops.conv2d(x, w, b, stride, padding), weights), [x, w, b])


class TestIm2col:
    def test_col2im_is_adjoint(self, float64, rng):
        x = rng.normal(size=(2, 3, 6, 6))
        cols, _, _ = im2col(x, 3, 3, 2, 1)
        y = rng.normal(size=cols.shape)
        lhs = np.sum(cols * y)
        rhs = np.sum(x * col2im(y, x.shape, 3, 3, 2, 1))
        assert math.isclose(lhs, rhs, rel_tol=1e-10)


class TestPooling:
    def test_maxpool_values(self):
        x = Tensor(np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4))
        out = ops.maxpool2d(x, 2, 2)
        assert np.array_equal(out.data[0, 0], [[5, 7], [13, 15]])

    def test_maxpool_tie_goes_to_first(self, float64):
        x = Tensor(np.ones((1, 1, 2, 2)), requires_grad=True)
        backward(ops.sum_all(ops.maxpool2d(x, 2, 2)))
        assert np.array_equal(x.grad[0, 0], [[1, 0], [0, 0]])

    def test_overlapping_windows_accumulate(self, float64):
        x = np.zeros((1, 1, 3, 5))
        x[0, 0, 1, 2] = 9.0
        t = Tensor(x, requires_grad=True)
        backward(ops.sum_all(ops.maxpool2d(t, 3, 1)))
        assert t.grad[0, 0, 1, 2] == 3.0

    def test_window_exceeds_input(self):
        with pytest.raises(ShapeError):
            ops.maxpool2d(Tensor(np.ones((1, 1, 2, 2))), 3, 2)

    def test_maxpool_gradients(self, float64):
        for seed in SEEDS:
            rng = np.random.default_rng(seed)
            # distinct values spaced far apart relative to h
            values = rng.permutation(2 * 2 * 7 * 7).astype(np.float64) * 0.01
            x = Tensor(values.reshape(2, 2, 7, 7), requires_grad=True)
            weights = rng.normal(size=(2, 2, 3, 3))
            assert_gradients_match(lambda: weighted_sum(ops.maxpool2d(x, 3, 2), weights), [x])

    def test_global_avg_pool(self, float64):
        x = Tensor(np.arange(8, dtype=np.float64).reshape(1, 2, 2, 2), requires_grad=True)
        out = ops.global_avg_pool(x)
        assert np.allclose(out.data, [[1.5, 5.5]])
        backward(ops.sum_all(out))
        assert np.allclose(x.grad, 0.25)

    def test_global_avg_pool_gradients(self, float64):
        for seed in SEEDS:
            rng = np.random.default_rng(seed)
            x = Tensor(rng.normal(size=(2, 3, 4, 4)), requires_grad=True)
            weights = rng.normal(size=(2, 3))
            assert_gradients_match(lambda: weighted_sum(ops.global_avg_pool(x), weights), [x])


class TestElementwise:
    def test_relu_gradient_is_zero_at_zero(self, float64):
        x = Tensor([-1.0, 0.0, 2.0], requires_grad=True)
        backward(ops.sum_all(ops.relu(x)))
        assert np.array_equal(x.grad, [0.0, 0.0, 1.0])

    def test_relu_gradients(self, float64):
        for seed in SEEDS:
            rng = np.random.default_rng(seed)
            values = rng.uniform(0.1, 2.0, size=(3, 4)) * rng.choice([-1.0, 1.0], size=(3, 4))
            x = Tensor(values, requires_grad=True)
            weights = rng.normal(size=(3, 4))
            assert_gradients_match(lambda: weighted_sum(ops.relu(x), weights), [x])

    def test_add_shape_mismatch(self):
        with pytest.raises(ShapeError):
            ops.add(Tensor(np.ones(3)), Tensor(np.ones(4)))

    def test_add_and_mul_gradients(self, float64):
        for seed in SEEDS:
            rng = np.random.default_rng(seed)
            a = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
            b = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
            assert_gradients_match(lambda: ops.sum_all(ops.square(ops.add(ops.mul(a, b), a))), [a, b])

    def test_concat_channels(self, float64):
        a = Tensor(np.zeros((2, 1, 3, 3)), requires_grad=True)
        b = Tensor(np.ones((2, 2, 3, 3)), requires_grad=True)
        out = ops.concat_channels(a, b)
        assert out.shape == (2, 3, 3, 3)
        assert np.array_equal(out.data[:, 1:], np.ones((2, 2, 3, 3)))

    def test_concat_spatial_mismatch(self):
        with pytest.raises(ShapeError):
            ops.concat_channels(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 2, 3))))

    def test_concat_gradients(self, float64):
        for seed in SEEDS:
            rng = np.random.default_rng(seed)
            a = Tensor(rng.normal(size=(2, 2, 3, 3)), requires_grad=True)
            b = Tensor(rng.normal(size=(2, 3, 3, 3)), requires_grad=True)
            weights = rng.normal(size=(2, 5, 3, 3))
            assert_gradients_match(lambda: weighted_sum(ops.concat_channels(a, b), weights), [a, b])

    def test_flatten_gradients(self, float64):
        for seed in SEEDS:
            rng = np.random.default_rng(seed)
            x = Tensor(rng.normal(size=(2, 3, 2, 2)), requires_grad=True)
            weights = rng.normal(size=(2, 12))
            assert_gradients_match(lambda: weighted_sum(ops.flatten(x), weights), [x])


class TestDropout:
    def test_identity_in_eval(self):
        x = Tensor(np.ones((4, 4)))
        assert ops.dropout(x, 0.5, np.random.default_rng(0), training=False) is x

    def test_inverted_scaling(self):
        out = ops.dropout(Tensor(np.ones((200, 200))), 0.5, np.random.default_rng(0))
        assert set(np.unique(out.data)) <= {0.0, 2.0}
        assert abs(out.data.mean() - 1.0) < 0.05

    def test_bad_probability(self):
        with pytest.raises(ContractError):
            ops.dropout(Tensor(np.ones(3)), 1.0, np.random.default_rng(0))

    def test_gradients_with_fixed_mask(self, float64):
        for seed in SEEDS:
            rng = np.random.default_rng(seed)
            x = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
            weights = rng.normal(size=(3, 5))
            loss = lambda: weighted_sum(ops.dropout(x, 0.3, np.random.default_rng(seed)), weights)
            assert_gradients_match(loss, [x])


class TestBatchNorm:
    def test_train_output_is_normalised(self, float64, rng):
        x = Tensor(rng.normal(3.0, 2.0, size=(8, 3, 4, 4)))
        stats = ops.RunningStats.create(3)
        out = ops.batch_norm2d(x, Tensor(np.ones(3)), Tensor(np.zeros(3)), stats)
        assert np.allclose(out.data.mean(axis=(0, 2, 3)), 0.0, atol=1e-10)
        assert np.allclose(out.data.var(axis=(0, 2, 3)), 1.0, atol=1e-3)

    def test_running_stats_use_unbiased_variance(self, float64, rng):
        data = rng.normal(size=(4, 2, 3, 3))
        stats = ops.RunningStats.create(2)
        ops.batch_norm2d(Tensor(data), Tensor(np.ones(2)), Tensor(np.zeros(2)), stats)
        count = 4 * 3 * 3
        mean = data.mean(axis=(0, 2, 3))
        unbiased = data.var(axis=(0, 2, 3)) * count / (count - 1)
        assert np.allclose(stats.mean, 0.1 * mean)
        assert np.allclose(stats.var, 0.9 + 0.1 * unbiased)

    def test_eval_uses_running_stats(self, float64, rng):
        x = rng.normal(size=(2, 2, 2, 2))
        stats = ops.RunningStats.create(2)
        out = ops.batch_norm2d(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)), stats, mode="eval")
        assert np.allclose(out.data, x / np.sqrt(1.0 + ops.BN_EPS))
        assert np.array_equal(stats.mean, np.zeros(2))

    def test_single_value_per_channel_in_train(self):
        stats = ops.RunningStats.create(2)
        with pytest.raises(DegenerateBatchError):
            ops.batch_norm2d(Tensor(np.ones((1, 2, 1, 1))), Tensor(np.ones(2)), Tensor(np.zeros(2)), stats)

    def test_single_value_allowed_in_eval(self):
        stats = ops.RunningStats.create(2)
        out = ops.batch_norm2d(Tensor(np.ones((1, 2, 1, 1))), Tensor(np.ones(2)), Tensor(np.zeros(2)), stats, mode="eval")
        assert out.shape == (1, 2, 1, 1)

    @pytest.mark.parametrize("mode", ["train", "eval"])
    def test_gradients(self, float64, mode):
        for seed in SEEDS:
            rng = np.random.default_rng(seed)
            x = Tensor(rng.normal(size=(3, 2, 3, 3)), requires_grad=True)
            gamma = Tensor(rng.uniform(0.5, 1.5, size=2), requires_grad=True)
            beta = Tensor(rng.normal(size=2), requires_grad=True)
            stats = ops.RunningStats(rng.normal(size=2), rng.uniform(0.5, 2.0, size=2))
            weights = rng.normal(size=(3, 2, 3, 3))
            loss = lambda: weighted_sum(ops.batch_norm2d(x, gamma, beta, stats, mode=mode), weights)
            assert_gradients_match(loss, [x, gamma, beta])


class TestDenseAndLoss:
    def test_dense_shape_mismatch(self):
        with pytest.raises(ShapeError):
            ops.dense(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))

    def test_dense_gradients(self, float64):
        for seed in SEEDS:
            rng = np.random.default_rng(seed)
            x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
            w = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
            b = Tensor(rng.normal(size=2), requires_grad=True)
            weights = rng.normal(size=(4, 2))
            assert_gradients_match(lambda: weighted_sum(ops.dense(x, w, b), weights), [x, w, b])

    def test_dense_worked_example(self, float64):
        out = ops.dense(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[5.0, 6.0], [7.0, 8.0]]))
        assert np.array_equal(out.data, [[19.0, 22.0], [43.0, 50.0]])

    def test_cross_entropy_closed_form(self, float64):
        loss = ops.softmax_cross_entropy(Tensor([[2.0, 0.5]]), [0])
        assert loss.item() == pytest.approx(0.2014132779, abs=1e-9)
        assert loss.item() == pytest.approx(math.log1p(math.exp(-1.5)), rel=1e-12)

    def test_uniform_logits_give_ln2(self, float64):
        loss = ops.softmax_cross_entropy(Tensor(np.zeros((4, 2))), [0, 1, 1, 0])
        assert math.isclose(loss.item(), math.log(2.0), rel_tol=1e-12)

    def test_large_logits_stay_finite(self):
        loss = ops.softmax_cross_entropy(Tensor([[1000.0, -1000.0], [-1000.0, 1000.0]]), [0, 1])
        assert math.isfinite(loss.item())
        assert loss.item() < 1e-6

    def test_label_out_of_range(self):
        with pytest.raises(LabelError):
            ops.softmax_cross_entropy(Tensor(np.zeros((2, 2))), [0, 2])

    def test_label_count_mismatch(self):
        with pytest.raises(ShapeError):
            ops.softmax_cross_entropy(Tensor(np.zeros((3, 2))), [0, 1])

    def test_cross_entropy_gradients(self, float64):
        for seed in SEEDS:
            rng = np.random.default_rng(seed)
            logits = Tensor(rng.normal(scale=3.0, size=(5, 2)), requires_grad=True)
            labels = rng.integers(0, 2, size=5)
            assert_gradients_match(lambda: ops.softmax_cross_entropy(logits, labels), [logits])

    def test_softmax_rows_sum_to_one(self, rng):
        probs = ops.softmax(rng.normal(scale=50.0, size=(10, 2)))
        assert np.allclose(probs.sum(axis=1), 1.0)
