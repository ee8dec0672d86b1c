import numpy as np
import pytest

from mefnow.errors import FormatError, NumericalError
from mefnow.grid import ops
from mefnow.grid.tape import Tape
from mefnow.grid.optim import Adam, AdamState, adam_step
from mefnow.grid.checkpoint import parse_checkpoint, read_checkpoint, write_checkpoint
from mefnow.grid.gradcheck import gradient_errors

TOLERANCE = 1e-4
SEEDS = range(20)


def check_gradient(f, inputs):
    assert max(gradient_errors(f, inputs)) <= TOLERANCE


def weighted_sum(y, weights):
    return ops.sum_(ops.mul(y, weights))


# ---------------------------------------------------------------------------------------------------------------------
# conv2d

class TestConv2d:

    def test_identity_kernel(self, rng):
        x = rng.normal(size=(1, 5, 7))
        w = np.ones((1, 1, 1, 1))
        np.testing.assert_array_equal(ops.conv2d(x, w), x)

    def test_all_ones_kernel(self):
        out = ops.conv2d(np.ones((1, 3, 3)), np.ones((1, 1, 3, 3)), pad=1)
        assert out[0, 1, 1] == 9.0
        for corner in [(0, 0), (0, 2), (2, 0), (2, 2)]:
            assert out[(0,) + corner] == 4.0
        assert out[0, 0, 1] == 6.0

    def test_matches_direct_loops(self, rng):
        x = rng.normal(size=(2, 6, 5))
        w = rng.normal(size=(3, 2, 3, 3))
        out = ops.conv2d(x, w)
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
        expected = np.zeros((3, 6, 5))
        for o in range(3):
            for i in range(6):
                for j in range(5):
                    expected[o, i, j] = np.sum(w[o] * xp[:, i:i + 3, j:j + 3])
        np.testing.assert_allclose(out, expected, rtol=1e-12, atol=1e-12)

    def test_batched_matches_unbatched(self, rng):
        x = rng.normal(size=(3, 2, 6, 6))
        w = rng.normal(size=(4, 2, 3, 3))
        batched = ops.conv2d(x, w, stride=2)
        for n in range(3):
            np.testing.assert_allclose(batched[n], ops.conv2d(x[n], w, stride=2), rtol=1e-12)

    def test_stride_two_halves_size(self, rng):
        out = ops.conv2d(rng.normal(size=(1, 8, 8)), rng.normal(size=(2, 1, 3, 3)), stride=2)
        assert out.shape == (2, 4, 4)

    @pytest.mark.parametrize('shape', [(1, 1, 2, 2), (1, 1, 3, 5), (1, 2, 3, 3)])
    def test_invalid_kernels(self, shape):
        with pytest.raises(ValueError):
            ops.conv2d(np.ones((1, 5, 5)), np.ones(shape))

    @pytest.mark.parametrize('seed', SEEDS)
    def test_gradients(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(1, 5, 5))
        w = rng.normal(size=(1, 1, 3, 3))
        check_gradient(lambda a, b: ops.sum_(ops.conv2d(a, b)), [x, w])

    @pytest.mark.parametrize('seed', SEEDS)
    def test_gradients_multichannel_strided(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(2, 2, 6, 6))
        w = rng.normal(size=(3, 2, 3, 3))
        weights = rng.normal(size=(2, 3, 3, 3))
        check_gradient(lambda a, b: weighted_sum(ops.conv2d(a, b, stride=2), weights), [x, w])

    def test_adjointness(self, rng):
        for stride in [1, 2]:
            x = rng.normal(size=(2, 3, 8, 8))
            w = rng.normal(size=(4, 3, 3, 3))
            y = rng.normal(size=ops.conv2d(x, w, stride=stride).shape)
            lhs = np.sum(ops.conv2d(x, w, stride=stride) * y)
            rhs = np.sum(x * ops.conv2d_input_grad(y, w, x.shape, stride=stride))
            assert abs(lhs - rhs) <= 1e-10 * abs(lhs)


# ---------------------------------------------------------------------------------------------------------------------
# Pooling and resampling

class TestResampling:

    def test_pool_example(self):
        np.testing.assert_array_equal(ops.pool_avg2(np.array([[[1.0, 3.0], [5.0, 7.0]]])), [[[4.0]]])

    def test_pool_constant(self):
        np.testing.assert_array_equal(ops.pool_avg2(np.full((2, 8, 8), 3.5)), np.full((2, 4, 4), 3.5))

    def test_pool_preserves_mean(self, rng):
        for _ in range(10):
            x = rng.normal(size=(3, 16, 16))
            assert abs(ops.pool_avg2(x).mean() - x.mean()) <= 1e-12

    def test_pool_inverts_nearest_upsample(self, rng):
        x = rng.normal(size=(2, 5, 7))
        np.testing.assert_array_equal(ops.pool_avg2(ops.upsample(x, 2, 'nearest')), x)

    def test_pool_odd_extent(self):
        with pytest.raises(ValueError):
            ops.pool_avg2(np.ones((1, 3, 4)))

    def test_upsample_nearest_example(self):
        out = ops.upsample(np.array([[[1.0, 2.0]]]), 2, 'nearest')
        np.testing.assert_array_equal(out, [[[1, 1, 2, 2], [1, 1, 2, 2]]])

    @pytest.mark.parametrize('mode', ['nearest', 'bilinear'])
    def test_upsample_factor_one(self, rng, mode):
        x = rng.normal(size=(1, 4, 4))
        np.testing.assert_allclose(ops.upsample(x, 1, mode), x, rtol=0, atol=1e-15)

    def test_bilinear_constant(self):
        np.testing.assert_allclose(ops.upsample(np.full((1, 3, 3), 2.5), 2, 'bilinear'), 2.5, atol=1e-15)

    def test_bilinear_align_corners_false(self):
        out = ops.upsample(np.array([[[0.0, 4.0]]]), 2, 'bilinear')
        # samples at -0.25 (clamped), 0.25, 0.75 and 1.25 (clamped)
        np.testing.assert_allclose(out[0, 0], [0.0, 1.0, 3.0, 4.0])

    @pytest.mark.parametrize('factor', [0, 1.5, -2])
    def test_upsample_invalid_factor(self, factor):
        with pytest.raises(ValueError):
            ops.upsample(np.ones((1, 2, 2)), factor)

    @pytest.mark.parametrize('seed', SEEDS)
    def test_gradients(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(2, 4, 6))
        w_pool = rng.normal(size=(2, 2, 3))
        w_near = rng.normal(size=(2, 8, 12))
        w_bil = rng.normal(size=(2, 12, 18))
        check_gradient(lambda a: weighted_sum(ops.pool_avg2(a), w_pool), [x])
        check_gradient(lambda a: weighted_sum(ops.upsample(a, 2, 'nearest'), w_near), [x])
        check_gradient(lambda a: weighted_sum(ops.upsample(a, 3, 'bilinear'), w_bil), [x])


# ---------------------------------------------------------------------------------------------------------------------
# Elementwise and structural

class TestElementwise:

    def test_values_at_origin(self):
        assert ops.elementwise('sigmoid', np.zeros(3)).tolist() == [0.5, 0.5, 0.5]
        assert ops.elementwise('tanh', np.zeros(3)).tolist() == [0.0, 0.0, 0.0]

    def test_mul_annihilator(self, rng):
        a = rng.normal(size=(2, 3, 3))
        np.testing.assert_array_equal(ops.elementwise('mul', a, np.zeros_like(a)), np.zeros_like(a))

    def test_leaky_relu(self):
        np.testing.assert_allclose(ops.elementwise('leaky_relu', np.array([-1.0, 2.0]), alpha=0.1), [-0.1, 2.0])

    def test_bias_broadcast(self):
        x = np.zeros((2, 3, 4, 4))
        bias = np.array([1.0, 2.0, 3.0]).reshape(3, 1, 1)
        out = ops.add(x, bias)
        assert out.shape == x.shape
        np.testing.assert_array_equal(out[1, 2], np.full((4, 4), 3.0))

    @pytest.mark.parametrize('shapes', [((2, 3, 3), (2, 3, 4)), ((3, 4, 4), (2, 1, 1)), ((4,), (1,))])
    def test_incompatible_shapes(self, shapes):
        with pytest.raises(ValueError):
            ops.add(np.ones(shapes[0]), np.ones(shapes[1]))

    def test_unknown_operation(self):
        with pytest.raises(ValueError):
            ops.elementwise('softplus', np.zeros(2))

    @pytest.mark.parametrize('seed', SEEDS)
    @pytest.mark.parametrize('op', ['sigmoid', 'tanh', 'leaky_relu', 'relu'])
    def test_unary_gradients(self, seed, op):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(2, 4, 4))
        x = np.where(np.abs(x) < 0.01, 0.5, x)
        weights = rng.normal(size=x.shape)
        check_gradient(lambda a: weighted_sum(ops.elementwise(op, a), weights), [x])

    @pytest.mark.parametrize('seed', SEEDS)
    def test_binary_gradients(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(2, 3, 4, 4))
        b = rng.normal(size=(2, 3, 4, 4))
        bias = rng.normal(size=(3, 1, 1))
        weights = rng.normal(size=a.shape)
        check_gradient(lambda p, q, r: weighted_sum(ops.add(ops.mul(p, q), r), weights), [a, b, bias])
        check_gradient(lambda p, q: weighted_sum(ops.sub(p, ops.scale(q, 0.3)), weights), [a, b])

    @pytest.mark.parametrize('seed', SEEDS)
    def test_structural_gradients(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(2, 2, 4, 4))
        b = rng.normal(size=(2, 1, 4, 4))
        w = rng.normal(size=(3, 3))
        bias = rng.normal(size=3)
        weights = rng.normal(size=(2, 3))

        def network(p, q, w_, b_):
            pooled = ops.global_avg_pool(ops.concat([p, q]))
            return weighted_sum(ops.dense(pooled, w_, b_), weights)

        check_gradient(network, [a, b, w, bias])
        check_gradient(lambda p: ops.sum_(ops.mul(ops.reshape(p, (2, 32)), ops.reshape(p, (2, 32)))), [a])


# ---------------------------------------------------------------------------------------------------------------------
# Losses

class TestLosses:

    def test_bce_half(self):
        assert abs(float(ops.bce(np.array([0.5]), np.array([1.0]))) - np.log(2.0)) <= 1e-12

    def test_bce_clamps(self):
        assert np.isfinite(float(ops.bce(np.array([0.0, 1.0]), np.array([1.0, 0.0]))))

    def test_bce_zero_gradient_when_clamped(self):
        tape = Tape()
        p = tape.watch(np.array([0.0, 0.3]), 'p')
        grads = tape.backward(ops.bce(p, np.array([1.0, 1.0])))
        assert grads['p'][0] == 0.0
        assert grads['p'][1] != 0.0

    def test_bce_length_mismatch(self):
        with pytest.raises(ValueError):
            ops.bce(np.array([0.5, 0.5]), np.array([1.0]))

    @pytest.mark.parametrize('seed', SEEDS)
    def test_gradients(self, seed):
        rng = np.random.default_rng(seed)
        p = rng.uniform(0.05, 0.95, size=6)
        labels = (rng.uniform(size=6) > 0.5).astype(float)
        a = rng.normal(size=(3, 4))
        b = rng.normal(size=(3, 4))
        check_gradient(lambda q: ops.bce(q, labels), [p])
        check_gradient(lambda x, y: ops.mean_squared_error(x, y), [a, b])
        check_gradient(lambda x: ops.mean_abs_error(x, b), [a])
        check_gradient(lambda x: ops.mean(ops.tanh(x)), [a])


# ---------------------------------------------------------------------------------------------------------------------
# Tape

class TestTape:

    def test_sum_gradient_is_ones(self, rng):
        tape = Tape()
        p = tape.watch(rng.normal(size=(2, 3)), 'p')
        np.testing.assert_array_equal(tape.backward(ops.sum_(p))['p'], np.ones((2, 3)))

    def test_square_gradient(self, rng):
        value = rng.normal(size=(3, 3))
        tape = Tape()
        p = tape.watch(value, 'p')
        np.testing.assert_allclose(tape.backward(ops.sum_(ops.mul(p, p)))['p'], 2.0 * value, rtol=1e-15)

    def test_unreached_values_get_zero(self):
        tape = Tape()
        p = tape.watch(np.ones(3), 'p')
        q = tape.watch(np.ones(4), 'q')
        grads = tape.backward(ops.sum_(p))
        np.testing.assert_array_equal(grads['q'], np.zeros(4))

    def test_second_backward_fails(self):
        tape = Tape()
        loss = ops.sum_(tape.watch(np.ones(2), 'p'))
        tape.backward(loss)
        with pytest.raises(RuntimeError):
            tape.backward(loss)

    def test_non_scalar_loss(self):
        tape = Tape()
        p = tape.watch(np.ones(3), 'p')
        with pytest.raises(ValueError):
            tape.backward(ops.scale(p, 2.0))

    def test_duplicate_name(self):
        tape = Tape()
        tape.watch(np.ones(1), 'p')
        with pytest.raises(ValueError):
            tape.watch(np.ones(1), 'p')

    def test_mixed_tapes(self):
        a = Tape().watch(np.ones(2), 'a')
        b = Tape().watch(np.ones(2), 'b')
        with pytest.raises(ValueError):
            ops.add(a, b)

    def test_non_finite_values_abort(self):
        tape = Tape()
        p = tape.watch(np.array([1e308, 1e308]), 'p')
        with pytest.raises(NumericalError):
            ops.scale(p, 10.0)

    def test_untaped_operands_return_arrays(self, rng):
        out = ops.sigmoid(rng.normal(size=(2, 2)))
        assert isinstance(out, np.ndarray)

    @pytest.mark.parametrize('seed', SEEDS)
    def test_two_layer_network(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(2, 1, 6, 6))
        w1 = rng.normal(size=(3, 1, 3, 3)) * 0.5
        b1 = rng.normal(size=(3, 1, 1))
        w2 = rng.normal(size=(1, 3, 3, 3)) * 0.5
        b2 = rng.normal(size=(1, 1, 1))
        target = rng.uniform(size=(2, 1, 6, 6))

        def network(w1_, b1_, w2_, b2_):
            h = ops.sigmoid(ops.add(ops.conv2d(x, w1_), b1_))
            return ops.mean_squared_error(ops.sigmoid(ops.add(ops.conv2d(h, w2_), b2_)), target)

        check_gradient(network, [w1, b1, w2, b2])


# ---------------------------------------------------------------------------------------------------------------------
# Adam

class TestAdam:

    def test_zero_gradient_leaves_parameter(self):
        param = np.array([1.0, -2.0])
        new_param, state = adam_step(param, np.zeros(2), AdamState.zeros_like(param))
        np.testing.assert_array_equal(new_param, param)
        assert state.t == 1

    def test_hand_computed_step(self):
        param = np.array(1.0)
        new_param, state = adam_step(param, np.array(0.5), AdamState.zeros_like(param))
        assert abs(float(new_param) - 0.998) <= 1e-9
        assert float(state.m) == 0.25
        assert abs(float(state.v) - 0.00025) <= 1e-15

    def test_pure_and_deterministic(self, rng):
        param = rng.normal(size=(3, 3))
        grad = rng.normal(size=(3, 3))
        state = AdamState.zeros_like(param)
        first = adam_step(param, grad, state)
        second = adam_step(param.copy(), grad.copy(), state)
        np.testing.assert_array_equal(first[0], second[0])
        assert state.t == 0
        np.testing.assert_array_equal(state.m, np.zeros((3, 3)))

    def test_second_moment_non_negative(self, rng):
        param = rng.normal(size=5)
        state = AdamState.zeros_like(param)
        for _ in range(5):
            param, state = adam_step(param, rng.normal(size=5), state)
        assert np.all(state.v >= 0)
        assert state.t == 5

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            adam_step(np.ones(3), np.ones(4), AdamState.zeros_like(np.ones(3)))

    def test_optimiser_counts_steps(self):
        params = {'a': np.ones(2), 'b': np.zeros((2, 2))}
        optimiser = Adam()
        optimiser.step(params, {'a': np.ones(2), 'b': np.ones((2, 2))})
        assert optimiser.steps == 1
        assert optimiser.states['a'].t == 1
        assert params['a'][0] < 1.0


# ---------------------------------------------------------------------------------------------------------------------
# Checkpoints

class TestCheckpoint:

    def test_roundtrip(self, tmp_path, rng):
        params = {
            'layer0.W_xi': rng.normal(size=(2, 1, 3, 3)), 'head.b': rng.normal(size=(1, 1, 1)), 'ß': np.array(3.0),
        }
        path = str(tmp_path / 'model.mefw')
        write_checkpoint(params, path)
        loaded = read_checkpoint(path)
        assert list(loaded) == list(params)
        for name in params:
            np.testing.assert_array_equal(loaded[name], params[name])
            assert loaded[name].shape == params[name].shape

    def test_bad_magic(self):
        with pytest.raises(FormatError) as err:
            parse_checkpoint(b'XXXX' + b'\x01\x00' + b'\x00\x00\x00\x00')
        assert err.value.offset == 0

    def test_bad_version(self, tmp_path):
        path = str(tmp_path / 'model.mefw')
        write_checkpoint({'a': np.ones(2)}, path)
        data = bytearray(open(path, 'rb').read())
        data[4] = 9
        with pytest.raises(FormatError) as err:
            parse_checkpoint(bytes(data))
        assert err.value.offset == 4

    def test_truncated(self, tmp_path):
        path = str(tmp_path / 'model.mefw')
        write_checkpoint({'a': np.ones((4, 4))}, path)
        data = open(path, 'rb').read()
        with pytest.raises(FormatError):
            parse_checkpoint(data[:-8])

    def test_trailing_bytes(self, tmp_path):
        path = str(tmp_path / 'model.mefw')
        write_checkpoint({'a': np.ones(2)}, path)
        data = open(path, 'rb').read()
        with pytest.raises(FormatError):
            parse_checkpoint(data + b'\x00')
