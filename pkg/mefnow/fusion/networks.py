import numpy as np

from ..grid import ops
from ..grid.tape import value_of

LEAKY_SLOPE = 0.2


def _conv_init(rng, c_out, c_in, k, init_scale, dtype):
    weight = rng.normal(0.0, init_scale / np.sqrt(c_in * k * k), (c_out, c_in, k, k)).astype(dtype)
    bias = np.zeros((c_out, 1, 1), dtype=dtype)
    return weight, bias


class GeneratorParams:
    """
    U-shaped encoder-decoder generator.

    Layers (``c`` base channels, depth ``D``):

     * ``enc0``: 3x3 convolution at full resolution, leaky ReLU, ``c`` channels.
     * ``enc1`` ... ``encD``: stride-2 3x3 convolutions, leaky ReLU, ``c * 2**d`` channels.
     * ``decD`` ... ``dec1``: factor-2 nearest upsampling then 3x3 convolution and ReLU with ``c * 2**(d - 1)``
       channels, concatenated with the encoder features of equal resolution.
     * ``out``: 1x1 convolution and sigmoid to one channel.

    Args:
        params (dict): Parameter arrays by name (``enc{d}.w``, ``enc{d}.b``, ``dec{d}.w``, ``dec{d}.b``, ``out.w``,
            ``out.b``).

    """

    def __init__(self, params):
        self.params = dict(params)
        depth = 0
        while 'enc' + str(depth + 1) + '.w' in self.params:
            depth += 1
        if 'enc0.w' not in self.params or depth == 0:
            raise ValueError('Generator parameters need enc0 and at least one down level')
        self.depth = depth

    @classmethod
    def initialise(cls, in_channels, base_channels=8, depth=2, seed=0, init_scale=1.0, dtype=np.float64):
        rng = np.random.default_rng(seed)
        params = {}
        params['enc0.w'], params['enc0.b'] = _conv_init(rng, base_channels, in_channels, 3, init_scale, dtype)
        for d in range(1, depth + 1):
            params['enc' + str(d) + '.w'], params['enc' + str(d) + '.b'] = _conv_init(
                rng, base_channels * 2 ** d, base_channels * 2 ** (d - 1), 3, init_scale, dtype
            )
        c_in = base_channels * 2 ** depth
        for d in range(depth, 0, -1):
            c_out = base_channels * 2 ** (d - 1)
            params['dec' + str(d) + '.w'], params['dec' + str(d) + '.b'] = _conv_init(
                rng, c_out, c_in, 3, init_scale, dtype
            )
            c_in = 2 * c_out
        params['out.w'], params['out.b'] = _conv_init(rng, 1, c_in, 1, init_scale, dtype)
        return cls(params)

    @property
    def in_channels(self):
        return self.params['enc0.w'].shape[1]

    @property
    def dtype(self):
        return self.params['out.w'].dtype

    def astype(self, dtype):
        return GeneratorParams({name: value.astype(dtype) for name, value in self.params.items()})


class DiscriminatorParams:
    """
    Classification network over the pair ``(x, y)``.

    ``conv0`` ... ``conv{D-1}`` are stride-2 3x3 convolutions with leaky ReLU; a global average pool, an affine map
    (``fc``) and a sigmoid give one probability per sample.

    """

    def __init__(self, params):
        self.params = dict(params)
        depth = 0
        while 'conv' + str(depth) + '.w' in self.params:
            depth += 1
        if depth == 0 or 'fc.w' not in self.params:
            raise ValueError('Discriminator parameters need at least one convolution and an fc layer')
        self.depth = depth

    @classmethod
    def initialise(cls, in_channels, base_channels=8, depth=3, seed=0, init_scale=1.0, dtype=np.float64):
        rng = np.random.default_rng(seed)
        params = {}
        c_in = in_channels
        for d in range(depth):
            c_out = base_channels * 2 ** d
            params['conv' + str(d) + '.w'], params['conv' + str(d) + '.b'] = _conv_init(
                rng, c_out, c_in, 3, init_scale, dtype
            )
            c_in = c_out
        params['fc.w'] = rng.normal(0.0, init_scale / np.sqrt(c_in), (1, c_in)).astype(dtype)
        params['fc.b'] = np.zeros(1, dtype=dtype)
        return cls(params)

    @property
    def in_channels(self):
        return self.params['conv0.w'].shape[1]

    @property
    def dtype(self):
        return self.params['fc.w'].dtype

    def astype(self, dtype):
        return DiscriminatorParams({name: value.astype(dtype) for name, value in self.params.items()})


def generator_forward(x, params, values=None):
    """
    Fused frame from a conditioning stack.

    Args:
        x (numpy.ndarray or Node): Conditioning stack ``[C, S, S]`` or ``[N, C, S, S]`` with ``S`` divisible by
            ``2**depth``.
        params (GeneratorParams): Generator.
        values (dict): Optional replacement parameter values (e.g. tape nodes).

    Returns:
        ``[1, S, S]`` (or ``[N, 1, S, S]``) prediction in ``(0, 1)``.

    """
    v = params.params if values is None else values
    shape = value_of(x).shape
    factor = 2 ** params.depth
    if shape[-1] % factor or shape[-2] % factor:
        raise ValueError(
            'Generator input size ' + str(shape[-2:]) + ' is not divisible by 2**depth = ' + str(factor)
        )
    if shape[-3] != params.in_channels:
        raise ValueError(
            'Generator expects ' + str(params.in_channels) + ' input channels, got ' + str(shape[-3])
        )

    features = [ops.leaky_relu(ops.add(ops.conv2d(x, v['enc0.w']), v['enc0.b']), LEAKY_SLOPE)]
    for d in range(1, params.depth + 1):
        h = ops.conv2d(features[-1], v['enc' + str(d) + '.w'], stride=2)
        features.append(ops.leaky_relu(ops.add(h, v['enc' + str(d) + '.b']), LEAKY_SLOPE))

    h = features[-1]
    for d in range(params.depth, 0, -1):
        u = ops.conv2d(ops.upsample(h, 2, mode='nearest'), v['dec' + str(d) + '.w'])
        u = ops.relu(ops.add(u, v['dec' + str(d) + '.b']))
        h = ops.concat([u, features[d - 1]])

    return ops.sigmoid(ops.add(ops.conv2d(h, v['out.w']), v['out.b']))


def discriminator_forward(x, y, params, values=None):
    """
    Probability that ``y`` is a real frame given conditioning ``x``.

    Args:
        x (numpy.ndarray or Node): Conditioning stack ``[C, S, S]`` or ``[N, C, S, S]``.
        y (numpy.ndarray or Node): Real or generated frame ``[1, S, S]`` or ``[N, 1, S, S]``.
        params (DiscriminatorParams): Discriminator.
        values (dict): Optional replacement parameter values (e.g. tape nodes).

    Returns:
        Probability in ``(0, 1)``: a scalar for unbatched input, shape ``[N]`` otherwise.

    """
    v = params.params if values is None else values
    x_shape, y_shape = value_of(x).shape, value_of(y).shape
    if len(x_shape) != len(y_shape) or x_shape[:-3] != y_shape[:-3] or x_shape[-2:] != y_shape[-2:]:
        raise ValueError('Discriminator inputs disagree in shape: ' + str(x_shape) + ' and ' + str(y_shape))
    if x_shape[-3] + y_shape[-3] != params.in_channels:
        raise ValueError(
            'Discriminator expects ' + str(params.in_channels) + ' channels in total, got '
            + str(x_shape[-3] + y_shape[-3])
        )

    batched = len(x_shape) == 4
    h = ops.concat([x, y])
    if not batched:
        h = ops.reshape(h, (1,) + value_of(h).shape)
    for d in range(params.depth):
        h = ops.conv2d(h, v['conv' + str(d) + '.w'], stride=2)
        h = ops.leaky_relu(ops.add(h, v['conv' + str(d) + '.b']), LEAKY_SLOPE)
    logits = ops.dense(ops.global_avg_pool(h), v['fc.w'], v['fc.b'])
    probability = ops.sigmoid(logits)
    return ops.reshape(probability, (x_shape[0],) if batched else ())
