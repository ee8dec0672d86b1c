"""
Differentiable array operations.

Arrays follow a ``[C, H, W]`` layout with an optional leading batch extent, i.e. ``[N, C, H, W]``. Every operation
accepts numpy arrays or tape nodes. With no node among the operands the result is a plain array, which gives a
tape-free inference path through the same code.

"""
import numpy as np
import scipy.special

from .tape import value_of, tape_of

PROBABILITY_FLOOR = 1e-7


def _emit(value, parents, vjp, op):
    tape = tape_of(*parents)
    if tape is None:
        return value
    return tape.record(value, parents, vjp, op)


def _check_binary(a, b, op):
    if a.shape == b.shape:
        return
    if _is_bias_for(b, a) or _is_bias_for(a, b):
        return
    raise ValueError(
        'Incompatible shapes for ' + op + ': ' + str(a.shape) + ' and ' + str(b.shape)
        + ' (operands must match or one must be a [C, 1, 1] bias)'
    )


def _is_bias_for(bias, x):
    return (
        bias.ndim == 3 and bias.shape[1:] == (1, 1) and x.ndim >= 3 and bias.shape[0] == x.shape[-3]
        and bias.shape != x.shape
    )


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------------------------------------------------------
# Convolution, pooling and resampling

def _im2col(xp, k, stride, out_h, out_w):
    n, c = xp.shape[:2]
    cols = np.empty((n, c, k, k, out_h, out_w), dtype=xp.dtype)
    for di in range(k):
        for dj in range(k):
            cols[:, :, di, dj] = xp[:, :, di:di + stride * out_h:stride, dj:dj + stride * out_w:stride]
    return cols.reshape(n, c * k * k, out_h * out_w)


def _col2im(cols, padded_shape, k, stride, out_h, out_w):
    n, c = padded_shape[:2]
    cols = cols.reshape(n, c, k, k, out_h, out_w)
    xp = np.zeros(padded_shape, dtype=cols.dtype)
    for di in range(k):
        for dj in range(k):
            xp[:, :, di:di + stride * out_h:stride, dj:dj + stride * out_w:stride] += cols[:, :, di, dj]
    return xp


def _conv_geometry(x_shape, w_shape, pad, stride):
    if len(w_shape) != 4:
        raise ValueError('Kernel must have shape [C_out, C_in, k, k], got ' + str(w_shape))
    c_out, c_in, k, k2 = w_shape
    if k != k2:
        raise ValueError('Kernel must be square, got ' + str(k) + 'x' + str(k2))
    if k % 2 == 0:
        raise ValueError('Kernel size must be odd, got ' + str(k))
    if len(x_shape) not in (3, 4):
        raise ValueError('Input must have shape [C, H, W] or [N, C, H, W], got ' + str(x_shape))
    if x_shape[-3] != c_in:
        raise ValueError(
            'Input has ' + str(x_shape[-3]) + ' channels but kernel expects ' + str(c_in)
        )
    if stride < 1:
        raise ValueError('Stride must be at least 1')
    if pad is None:
        pad = (k - 1) // 2
    height, width = x_shape[-2:]
    out_h = (height + 2 * pad - k) // stride + 1
    out_w = (width + 2 * pad - k) // stride + 1
    if out_h < 1 or out_w < 1:
        raise ValueError('Input of size ' + str((height, width)) + ' is too small for a ' + str(k) + 'x' + str(k) + ' kernel')
    return k, pad, out_h, out_w


def conv2d(x, w, pad=None, stride=1):
    """
    Zero-padded 2D cross-correlation (no kernel flip).

    Args:
        x (numpy.ndarray or Node): Input of shape ``[C_in, H, W]`` or ``[N, C_in, H, W]``.
        w (numpy.ndarray or Node): Kernel of shape ``[C_out, C_in, k, k]`` with odd ``k``.
        pad (int): Zero padding on each border. Defaults to ``(k - 1) // 2``, which keeps the spatial size for
            ``stride=1``.
        stride (int): Step between output samples.

    """
    xv = value_of(x)
    wv = value_of(w)
    k, pad, out_h, out_w = _conv_geometry(xv.shape, wv.shape, pad, stride)
    batched = xv.ndim == 4
    xb = xv if batched else xv[np.newaxis]
    xp = np.pad(xb, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = _im2col(xp, k, stride, out_h, out_w)
    w_mat = wv.reshape(wv.shape[0], -1)
    out = np.matmul(w_mat, cols).reshape(xb.shape[0], wv.shape[0], out_h, out_w)
    if not batched:
        out = out[0]

    def vjp(g):
        gb = g if batched else g[np.newaxis]
        g_mat = gb.reshape(gb.shape[0], gb.shape[1], -1)
        grad_w = np.einsum('nol,nkl->ok', g_mat, cols).reshape(wv.shape)
        grad_cols = np.matmul(w_mat.T, g_mat)
        grad_xp = _col2im(grad_cols, xp.shape, k, stride, out_h, out_w)
        grad_x = grad_xp[:, :, pad:pad + xb.shape[2], pad:pad + xb.shape[3]]
        if not batched:
            grad_x = grad_x[0]
        return grad_x, grad_w

    return _emit(out, [x, w], vjp, 'conv2d')


def conv2d_input_grad(y, w, input_shape, pad=None, stride=1):
    """Adjoint of ``conv2d`` with respect to its input: maps an output-shaped array back to ``input_shape``."""
    wv = np.asarray(w)
    k, pad, out_h, out_w = _conv_geometry(input_shape, wv.shape, pad, stride)
    batched = len(input_shape) == 4
    yb = y if batched else y[np.newaxis]
    n = yb.shape[0]
    padded_shape = (n, input_shape[-3], input_shape[-2] + 2 * pad, input_shape[-1] + 2 * pad)
    grad_cols = np.matmul(wv.reshape(wv.shape[0], -1).T, yb.reshape(n, yb.shape[1], -1))
    grad_xp = _col2im(grad_cols, padded_shape, k, stride, out_h, out_w)
    grad_x = grad_xp[:, :, pad:pad + input_shape[-2], pad:pad + input_shape[-1]]
    return grad_x if batched else grad_x[0]


def pool_avg2(x):
    """2x2 average pooling over the last two axes."""
    xv = value_of(x)
    height, width = xv.shape[-2:]
    if height % 2 or width % 2:
        raise ValueError('Average pooling needs even extents, got ' + str(height) + 'x' + str(width))
    # Pairwise sums keep pooling of constant 2x2 blocks exact
    out = ((xv[..., 0::2, 0::2] + xv[..., 0::2, 1::2]) + (xv[..., 1::2, 0::2] + xv[..., 1::2, 1::2])) * 0.25

    def vjp(g):
        grad = np.repeat(np.repeat(g, 2, axis=-2), 2, axis=-1) * 0.25
        return (grad,)

    return _emit(out, [x], vjp, 'pool_avg2')


def _bilinear_matrix(n, factor):
    # Align-corners-false: output sample i reads source position (i + 0.5) / factor - 0.5, clamped to the borders
    positions = (np.arange(n * factor) + 0.5) / factor - 0.5
    positions = np.clip(positions, 0.0, n - 1)
    lower = np.floor(positions).astype(int)
    upper = np.minimum(lower + 1, n - 1)
    frac = positions - lower
    matrix = np.zeros((n * factor, n))
    rows = np.arange(n * factor)
    np.add.at(matrix, (rows, lower), 1.0 - frac)
    np.add.at(matrix, (rows, upper), frac)
    return matrix


def upsample(x, factor, mode='nearest'):
    """
    Upsample the last two axes by an integer factor.

    ``mode='nearest'`` replicates each cell into a ``factor x factor`` block; ``mode='bilinear'`` interpolates with the
    align-corners-false convention, clamping sample positions at the borders.

    """
    if int(factor) != factor or factor < 1:
        raise ValueError('Upsampling factor must be a positive integer, got ' + str(factor))
    factor = int(factor)
    xv = value_of(x)

    if mode == 'nearest':
        out = np.repeat(np.repeat(xv, factor, axis=-2), factor, axis=-1)

        def vjp(g):
            lead = g.shape[:-2]
            h, w = g.shape[-2] // factor, g.shape[-1] // factor
            return (g.reshape(lead + (h, factor, w, factor)).sum(axis=(-3, -1)),)

    elif mode == 'bilinear':
        a_h = _bilinear_matrix(xv.shape[-2], factor).astype(xv.dtype)
        a_w = _bilinear_matrix(xv.shape[-1], factor).astype(xv.dtype)
        out = a_h @ xv @ a_w.T

        def vjp(g):
            return (a_h.T @ g @ a_w,)

    else:
        raise ValueError('Unknown upsampling mode: ' + str(mode))

    return _emit(out, [x], vjp, 'upsample')


# ---------------------------------------------------------------------------------------------------------------------
# Elementwise

def sigmoid(x):
    xv = value_of(x)
    out = scipy.special.expit(xv)
    return _emit(out, [x], lambda g: (g * out * (1.0 - out),), 'sigmoid')


def tanh(x):
    xv = value_of(x)
    out = np.tanh(xv)
    return _emit(out, [x], lambda g: (g * (1.0 - out * out),), 'tanh')


def leaky_relu(x, alpha=0.2):
    xv = value_of(x)
    positive = xv > 0
    out = np.where(positive, xv, alpha * xv)
    return _emit(out, [x], lambda g: (np.where(positive, g, alpha * g),), 'leaky_relu')


def relu(x):
    return leaky_relu(x, alpha=0.0)


def add(a, b):
    av, bv = value_of(a), value_of(b)
    _check_binary(av, bv, 'add')
    out = av + bv
    return _emit(out, [a, b], lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)), 'add')


def sub(a, b):
    av, bv = value_of(a), value_of(b)
    _check_binary(av, bv, 'sub')
    out = av - bv
    return _emit(out, [a, b], lambda g: (_unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)), 'sub')


def mul(a, b):
    """Hadamard product."""
    av, bv = value_of(a), value_of(b)
    _check_binary(av, bv, 'mul')
    out = av * bv
    return _emit(out, [a, b], lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)), 'mul')


def scale(x, factor):
    out = value_of(x) * factor
    return _emit(out, [x], lambda g: (g * factor,), 'scale')


UNARY = {'sigmoid': sigmoid, 'tanh': tanh, 'leaky_relu': leaky_relu, 'relu': relu}
BINARY = {'add': add, 'sub': sub, 'mul': mul}


def elementwise(op, *operands, **kwargs):
    """Dispatch by name, e.g. ``elementwise('leaky_relu', x, alpha=0.1)`` or ``elementwise('mul', a, b)``."""
    if op in UNARY:
        if len(operands) != 1:
            raise ValueError(op + ' takes one operand')
        return UNARY[op](operands[0], **kwargs)
    if op in BINARY:
        if len(operands) != 2:
            raise ValueError(op + ' takes two operands')
        return BINARY[op](*operands)
    raise ValueError('Unknown elementwise operation: ' + str(op))


# ---------------------------------------------------------------------------------------------------------------------
# Structural

def concat(operands, axis=-3):
    """Concatenate along the channel axis (by default)."""
    values = [value_of(x) for x in operands]
    out = np.concatenate(values, axis=axis)
    sizes = np.cumsum([v.shape[axis] for v in values])[:-1]

    def vjp(g):
        return tuple(np.split(g, sizes, axis=axis))

    return _emit(out, list(operands), vjp, 'concat')


def reshape(x, shape):
    xv = value_of(x)
    out = xv.reshape(shape)
    return _emit(out, [x], lambda g: (g.reshape(xv.shape),), 'reshape')


def global_avg_pool(x):
    """``[N, C, H, W] -> [N, C]``."""
    xv = value_of(x)
    h, w = xv.shape[-2:]
    out = xv.mean(axis=(-2, -1))

    def vjp(g):
        return (np.broadcast_to(g[..., np.newaxis, np.newaxis] / (h * w), xv.shape).copy(),)

    return _emit(out, [x], vjp, 'global_avg_pool')


def dense(x, w, b):
    """Affine map ``[N, F] -> [N, O]`` with weights ``[O, F]`` and bias ``[O]``."""
    xv, wv, bv = value_of(x), value_of(w), value_of(b)
    if xv.shape[-1] != wv.shape[1] or bv.shape != (wv.shape[0],):
        raise ValueError(
            'Incompatible shapes for dense: ' + str(xv.shape) + ', ' + str(wv.shape) + ', ' + str(bv.shape)
        )
    out = xv @ wv.T + bv

    def vjp(g):
        return g @ wv, g.T @ xv, g.sum(axis=0)

    return _emit(out, [x, w, b], vjp, 'dense')


# ---------------------------------------------------------------------------------------------------------------------
# Reductions and losses (always accumulated in 64-bit)

def sum_(x):
    xv = value_of(x)
    out = np.sum(xv, dtype=np.float64)
    return _emit(np.asarray(out), [x], lambda g: (np.full(xv.shape, g, dtype=np.float64),), 'sum')


def mean(x):
    xv = value_of(x)
    n = xv.size
    out = np.sum(xv, dtype=np.float64) / n
    return _emit(np.asarray(out), [x], lambda g: (np.full(xv.shape, g / n, dtype=np.float64),), 'mean')


def mean_squared_error(a, b):
    av, bv = value_of(a), value_of(b)
    if av.shape != bv.shape:
        raise ValueError('Shape mismatch in mean_squared_error: ' + str(av.shape) + ' and ' + str(bv.shape))
    diff = av.astype(np.float64) - bv.astype(np.float64)
    n = diff.size
    out = np.sum(diff * diff) / n

    def vjp(g):
        grad = (2.0 / n) * g * diff
        return grad, -grad

    return _emit(np.asarray(out), [a, b], vjp, 'mean_squared_error')


def mean_abs_error(a, b):
    av, bv = value_of(a), value_of(b)
    if av.shape != bv.shape:
        raise ValueError('Shape mismatch in mean_abs_error: ' + str(av.shape) + ' and ' + str(bv.shape))
    diff = av.astype(np.float64) - bv.astype(np.float64)
    n = diff.size
    out = np.sum(np.abs(diff)) / n

    def vjp(g):
        grad = g * np.sign(diff) / n
        return grad, -grad

    return _emit(np.asarray(out), [a, b], vjp, 'mean_abs_error')


def bce(probabilities, labels):
    """
    Mean binary cross-entropy.

    Probabilities are clamped to ``[1e-7, 1 - 1e-7]`` before taking logs; the gradient is zero where clamping is
    active.

    """
    pv = value_of(probabilities).astype(np.float64)
    av = np.asarray(labels, dtype=np.float64)
    if pv.shape != av.shape:
        if pv.size != av.size:
            raise ValueError(
                'Length mismatch in bce: ' + str(pv.size) + ' probabilities and ' + str(av.size) + ' labels'
            )
        av = av.reshape(pv.shape)
    n = pv.size
    clipped = np.clip(pv, PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)
    out = -np.sum(av * np.log(clipped) + (1.0 - av) * np.log(1.0 - clipped)) / n
    active = (pv >= PROBABILITY_FLOOR) & (pv <= 1.0 - PROBABILITY_FLOOR)

    def vjp(g):
        grad = -g * (av / clipped - (1.0 - av) / (1.0 - clipped)) / n
        return (np.where(active, grad, 0.0),)

    return _emit(np.asarray(out), [probabilities], vjp, 'bce')
