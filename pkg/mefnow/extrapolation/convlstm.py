import dataclasses

import numpy as np

from ..grid import ops
from ..grid.tape import Node, value_of

GATE_PARAMETERS = [
    'W_xi', 'W_xf', 'W_xc', 'W_xo',
    'W_hi', 'W_hf', 'W_hc', 'W_ho',
    'W_ci', 'W_cf', 'W_co',
    'b_i', 'b_f', 'b_c', 'b_o',
]


@dataclasses.dataclass
class ConvLSTMCellParams:
    """
    Parameters of one ConvLSTM cell with peephole connections.

    Input kernels ``W_x*`` have shape ``[C_hidden, C_in, k, k]``, state kernels ``W_h*`` have shape
    ``[C_hidden, C_hidden, k, k]``, and peephole weights ``W_c*`` and biases ``b_*`` have shape
    ``[C_hidden, 1, 1]``. Fields may be arrays or tape nodes.

    """
    W_xi: object
    W_xf: object
    W_xc: object
    W_xo: object
    W_hi: object
    W_hf: object
    W_hc: object
    W_ho: object
    W_ci: object
    W_cf: object
    W_co: object
    b_i: object
    b_f: object
    b_c: object
    b_o: object

    @property
    def hidden_channels(self):
        return value_of(self.W_xi).shape[0]

    @property
    def input_channels(self):
        return value_of(self.W_xi).shape[1]

    @property
    def kernel_size(self):
        return value_of(self.W_xi).shape[-1]

    def validate(self):
        c_hidden, c_in, k = self.hidden_channels, self.input_channels, self.kernel_size
        expected = {}
        for gate in 'ifco':
            expected['W_x' + gate] = (c_hidden, c_in, k, k)
            expected['W_h' + gate] = (c_hidden, c_hidden, k, k)
            expected['b_' + gate] = (c_hidden, 1, 1)
        for gate in 'ifo':
            expected['W_c' + gate] = (c_hidden, 1, 1)
        for name, shape in expected.items():
            actual = value_of(getattr(self, name)).shape
            if actual != shape:
                raise ValueError('ConvLSTM parameter ' + name + ' has shape ' + str(actual) + ', expected ' + str(shape))


@dataclasses.dataclass
class CellState:
    H: object
    C: object


@dataclasses.dataclass
class GateActivations:
    i: object
    f: object
    o: object


def zero_state(x, hidden_channels, dtype=np.float64):
    """Zero ``H`` and ``C`` matching the batch and spatial extents of input ``x``."""
    shape = value_of(x).shape[:-3] + (hidden_channels,) + value_of(x).shape[-2:]
    return CellState(H=np.zeros(shape, dtype=dtype), C=np.zeros(shape, dtype=dtype))


def cell_step(x, prev, params):
    """
    Advance one ConvLSTM cell by one time step.

    Args:
        x (numpy.ndarray or Node): Input ``X_t`` of shape ``[C_in, H, W]`` or ``[N, C_in, H, W]``.
        prev (CellState): Previous hidden state ``H_{t-1}`` and cell state ``C_{t-1}``.
        params (ConvLSTMCellParams): Cell parameters.

    Returns:
        tuple: New ``CellState`` and the ``GateActivations`` of this step.

    """
    if value_of(prev.H).shape != value_of(prev.C).shape:
        raise ValueError('Hidden and cell states must share one shape')
    expected = value_of(x).shape[:-3] + (params.hidden_channels,) + value_of(x).shape[-2:]
    if value_of(prev.H).shape != expected:
        raise ValueError('State shape ' + str(value_of(prev.H).shape) + ' does not match ' + str(expected))

    def gate_input(gate):
        return ops.add(
            ops.conv2d(x, getattr(params, 'W_x' + gate)), ops.conv2d(prev.H, getattr(params, 'W_h' + gate))
        )

    i = ops.sigmoid(ops.add(ops.add(gate_input('i'), ops.mul(params.W_ci, prev.C)), params.b_i))
    f = ops.sigmoid(ops.add(ops.add(gate_input('f'), ops.mul(params.W_cf, prev.C)), params.b_f))
    candidate = ops.tanh(ops.add(gate_input('c'), params.b_c))
    c = ops.add(ops.mul(f, prev.C), ops.mul(i, candidate))
    o = ops.sigmoid(ops.add(ops.add(gate_input('o'), ops.mul(params.W_co, c)), params.b_o))
    h = ops.mul(o, ops.tanh(c))
    return CellState(H=h, C=c), GateActivations(i=i, f=f, o=o)


def init_cell_params(rng, input_channels, hidden_channels, kernel_size=3, init_scale=1.0, dtype=np.float64):
    params = {}
    for gate in 'ifco':
        fan_in = input_channels * kernel_size ** 2
        params['W_x' + gate] = rng.normal(
            0.0, init_scale / np.sqrt(fan_in), (hidden_channels, input_channels, kernel_size, kernel_size)
        )
        fan_in = hidden_channels * kernel_size ** 2
        params['W_h' + gate] = rng.normal(
            0.0, init_scale / np.sqrt(fan_in), (hidden_channels, hidden_channels, kernel_size, kernel_size)
        )
        params['b_' + gate] = np.zeros((hidden_channels, 1, 1))
    for gate in 'ifo':
        params['W_c' + gate] = np.zeros((hidden_channels, 1, 1))
    params['b_f'] += 1.0
    return {name: params[name].astype(dtype) for name in GATE_PARAMETERS}


class ConvLSTMStack:
    """
    Layered ConvLSTM next-frame predictor.

    The input of layer ``l`` is the hidden state of layer ``l - 1``; a 1x1 convolution and a sigmoid map the top
    hidden state to one frame in ``(0, 1)``.

    Args:
        params (dict): Parameter arrays by name, ``layer{l}.{W_xi, ...}`` for each layer plus ``head.w``
            (``[1, C_top, 1, 1]``) and ``head.b`` (``[1, 1, 1]``).

    """

    def __init__(self, params):
        self.params = dict(params)
        n_layers = 0
        while 'layer' + str(n_layers) + '.W_xi' in self.params:
            n_layers += 1
        if n_layers == 0:
            raise ValueError('No ConvLSTM layers found in parameters')
        self.n_layers = n_layers

        in_channels = None
        for layer in range(n_layers):
            cell = self.cell_params(layer)
            cell.validate()
            if in_channels is not None and cell.input_channels != in_channels:
                raise ValueError(
                    'Layer ' + str(layer) + ' expects ' + str(cell.input_channels) + ' input channels but layer '
                    + str(layer - 1) + ' has ' + str(in_channels) + ' hidden channels'
                )
            in_channels = cell.hidden_channels
        if self.params['head.w'].shape != (1, in_channels, 1, 1) or self.params['head.b'].shape != (1, 1, 1):
            raise ValueError('Output head must map ' + str(in_channels) + ' hidden channels to one channel')

    @classmethod
    def initialise(cls, hidden=(8, 8), kernel_size=3, in_channels=1, seed=0, init_scale=1.0, dtype=np.float64):
        rng = np.random.default_rng(seed)
        params = {}
        for layer, hidden_channels in enumerate(hidden):
            cell = init_cell_params(rng, in_channels, hidden_channels, kernel_size, init_scale, dtype)
            for name, value in cell.items():
                params['layer' + str(layer) + '.' + name] = value
            in_channels = hidden_channels
        params['head.w'] = rng.normal(0.0, init_scale / np.sqrt(in_channels), (1, in_channels, 1, 1)).astype(dtype)
        params['head.b'] = np.zeros((1, 1, 1), dtype=dtype)
        return cls(params)

    @property
    def hidden(self):
        return [self.params['layer' + str(layer) + '.W_xi'].shape[0] for layer in range(self.n_layers)]

    @property
    def kernel_size(self):
        return self.params['layer0.W_xi'].shape[-1]

    @property
    def dtype(self):
        return self.params['head.w'].dtype

    def cell_params(self, layer, values=None):
        values = self.params if values is None else values
        prefix = 'layer' + str(layer) + '.'
        return ConvLSTMCellParams(**{name: values[prefix + name] for name in GATE_PARAMETERS})

    def astype(self, dtype):
        return ConvLSTMStack({name: value.astype(dtype) for name, value in self.params.items()})

    def forward_next(self, inputs, values=None):
        return forward_next(inputs, self, values)

    def rollout2(self, inputs, values=None):
        return rollout2(inputs, self, values)


def _frame_list(inputs):
    if isinstance(inputs, Node):
        raise ValueError('Pass a list of frames rather than a single recorded array')
    frames = list(inputs)
    if len(frames) < 1:
        raise ValueError('At least one input frame is required')
    shape = value_of(frames[0]).shape
    for frame in frames[1:]:
        if value_of(frame).shape != shape:
            raise ValueError('Input frames must share one shape')
    if len(shape) not in (3, 4) or shape[-3] != 1:
        raise ValueError('Input frames must have shape [1, H, W] or [N, 1, H, W], got ' + str(shape))
    return frames


def forward_next(inputs, model, values=None):
    """
    Predict the next frame from a sequence of frames.

    The stack runs over ``inputs`` from zero initial states; the output head maps the final top hidden state to a
    frame in ``(0, 1)`` of the same shape as each input frame.

    Args:
        inputs (sequence): Frames normalised to ``[0, 1]``, each ``[1, H, W]`` (or ``[N, 1, H, W]`` for a batch).
            A ``[T, 1, H, W]`` array is accepted as a sequence of ``T`` frames.
        model (ConvLSTMStack): Predictor.
        values (dict): Optional replacement parameter values (e.g. tape nodes) keyed as ``model.params``.

    """
    frames = _frame_list(inputs)
    values = model.params if values is None else values
    cells = [model.cell_params(layer, values) for layer in range(model.n_layers)]
    states = [zero_state(frames[0], cell.hidden_channels, model.dtype) for cell in cells]

    for frame in frames:
        x = frame
        for layer, cell in enumerate(cells):
            states[layer], _ = cell_step(x, states[layer], cell)
            x = states[layer].H

    logits = ops.add(ops.conv2d(states[-1].H, values['head.w']), values['head.b'])
    return ops.sigmoid(logits)


def rollout2(inputs, model, values=None):
    """
    Two-hour autoregressive rollout.

    The second prediction slides the input window forward by one frame and substitutes the first prediction for the
    missing observation.

    Returns:
        tuple: Predictions for one and two hours ahead.

    """
    frames = _frame_list(inputs)
    first = forward_next(frames, model, values)
    second = forward_next(frames[1:] + [first], model, values)
    return first, second
