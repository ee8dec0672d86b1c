import dataclasses

import numpy as np
import pandas as pd

from ..errors import NumericalError
from ..grid import ops
from ..grid.optim import Adam
from ..grid.tape import Tape
from .convlstm import ConvLSTMStack, rollout2

PRECISIONS = {64: np.float64, 32: np.float32}


@dataclasses.dataclass
class PredictorHyper:
    """
    Phase-1 predictor architecture and training settings.

    Args:
        hidden (tuple): Hidden channels per ConvLSTM layer.
        kernel_size (int): Odd kernel size shared by all cell convolutions.
        batch_size (int): Windows per optimiser step. Default 4.
        epochs (int): Passes over the training windows. Default 150.
        max_steps (int): Optional cap on the total number of optimiser steps.
        lr (float): Adam learning rate. Default 0.002.
        beta1 (float): Adam first-moment decay. Default 0.5.
        beta2 (float): Adam second-moment decay. Default 0.999.
        eps (float): Adam denominator offset.
        init_scale (float): Multiplier on the default weight initialisation spread.
        precision (int): 64 or 32 bit parameters and activations. Losses always accumulate in 64-bit.
        seed (int): Seed for initialisation and shuffling.

    """
    hidden: tuple = (8, 8)
    kernel_size: int = 3
    batch_size: int = 4
    epochs: int = 150
    max_steps: int = None
    lr: float = 0.002
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    init_scale: float = 1.0
    precision: int = 64
    seed: int = 0

    @classmethod
    def from_dict(cls, dc):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(dc) - names
        if unknown:
            raise ValueError('Unknown predictor settings: ' + ', '.join(sorted(unknown)))
        dc = dict(dc)
        if 'hidden' in dc:
            dc['hidden'] = tuple(dc['hidden'])
        hyper = cls(**dc)
        if hyper.precision not in PRECISIONS:
            raise ValueError('Precision must be 64 or 32, got ' + str(hyper.precision))
        return hyper

    @property
    def dtype(self):
        return PRECISIONS[self.precision]


def rollout_loss(batch, model, values, input_len=6):
    """
    Mean squared error summed over both rollout steps, each averaged per pixel and batch member.

    ``batch`` has shape ``[B, input_len + 2, 1, H, W]`` with values in ``[0, 1]``.

    """
    frames = list(np.moveaxis(batch, 1, 0))
    first, second = rollout2(frames[:input_len], model, values)
    return ops.add(
        ops.mean_squared_error(first, frames[input_len]),
        ops.mean_squared_error(second, frames[input_len + 1]),
    )


def train_predictor(windows, hyper, model=None, input_len=6, verbose=False):
    """
    Train a ConvLSTM predictor on normalised windows.

    Step 2 of each rollout consumes the step-1 prediction, so training follows the same autoregressive path that is
    used in forecasting.

    Args:
        windows: Training windows of shape ``[W, input_len + 2, 1, H, W]`` with values in ``[0, 1]``. Any object
            supporting ``len()`` and integer-array indexing returning such batches is accepted.
        hyper (PredictorHyper): Architecture and training settings.
        model (ConvLSTMStack): Optional initial model (e.g. to continue training).
        input_len (int): Number of input frames per window.
        verbose (bool): Print the mean loss after each epoch.

    Returns:
        tuple: Trained ``ConvLSTMStack`` and a ``pandas.DataFrame`` loss log with columns ``epoch``, ``step`` and
        ``loss``.

    """
    n_windows = len(windows)
    if n_windows == 0:
        raise ValueError('Cannot train a predictor on an empty set of windows')

    seed_sequence = np.random.SeedSequence(hyper.seed)
    init_seed, shuffle_seed = seed_sequence.spawn(2)
    if model is None:
        model = ConvLSTMStack.initialise(
            hidden=hyper.hidden, kernel_size=hyper.kernel_size, seed=init_seed, init_scale=hyper.init_scale,
            dtype=hyper.dtype,
        )
    else:
        model = model.astype(hyper.dtype)
    rng = np.random.default_rng(shuffle_seed)
    optimiser = Adam(lr=hyper.lr, beta1=hyper.beta1, beta2=hyper.beta2, eps=hyper.eps)
    params = dict(model.params)

    epochs = []
    steps = []
    losses = []
    step = 0
    for epoch in range(1, hyper.epochs + 1):
        order = rng.permutation(n_windows)
        epoch_losses = []
        for start in range(0, n_windows, hyper.batch_size):
            if hyper.max_steps is not None and step >= hyper.max_steps:
                break
            step += 1
            batch = np.asarray(windows[order[start:start + hyper.batch_size]], dtype=hyper.dtype)

            tape = Tape()
            values = {name: tape.watch(value, name) for name, value in params.items()}
            try:
                loss = rollout_loss(batch, model, values, input_len)
            except NumericalError as err:
                raise NumericalError('Predictor training diverged: ' + str(err), step=step)
            loss_value = float(loss.value)
            if not np.isfinite(loss_value):
                raise NumericalError('Predictor loss is ' + str(loss_value), step=step)
            grads = tape.backward(loss)
            optimiser.step(params, grads)
            model = ConvLSTMStack(params)

            epochs.append(epoch)
            steps.append(step)
            losses.append(loss_value)
            epoch_losses.append(loss_value)

        if verbose and epoch_losses:
            print('  - epoch ' + str(epoch) + ': loss ' + '{:.5f}'.format(np.mean(epoch_losses)))
        if hyper.max_steps is not None and step >= hyper.max_steps:
            break

    history = pd.DataFrame({'epoch': epochs, 'step': steps, 'loss': losses})
    return model, history
