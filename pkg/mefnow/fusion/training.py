import dataclasses

import numpy as np
import pandas as pd

from ..errors import NumericalError
from ..grid.optim import Adam
from ..grid.tape import Tape
from ..extrapolation.training import PRECISIONS
from .losses import bce, loss_g
from .networks import DiscriminatorParams, GeneratorParams, discriminator_forward, generator_forward


@dataclasses.dataclass
class GanHyper:
    """
    Phase-2 fusion network and training settings.

    Args:
        lambda1 (float): Weight of the adversarial generator term. Default 1.
        lambda2 (float): Weight of the L1 reconstruction term. Default 100.
        batch_size (int): Samples per batch. Default 2.
        epochs (int): Passes over the samples. Default 300.
        max_rounds (int): Optional cap on the number of training rounds.
        lr (float): Adam learning rate. Default 0.002.
        beta1 (float): Adam first-moment decay. Default 0.5.
        beta2 (float): Adam second-moment decay. Default 0.999.
        eps (float): Adam denominator offset.
        noise (bool): Whether conditioning stacks carry a noise channel.
        d_batches (int): Discriminator batches per round (one real-labelled, one fake-labelled). Fixed at 2.
        generator_channels (int): Base channels of the generator.
        generator_depth (int): Down levels of the generator.
        discriminator_channels (int): Base channels of the discriminator.
        discriminator_depth (int): Stride-2 convolutions in the discriminator.
        init_scale (float): Multiplier on the default weight initialisation spread.
        precision (int): 64 or 32 bit parameters and activations.
        seed (int): Seed for initialisation and batching.

    """
    lambda1: float = 1.0
    lambda2: float = 100.0
    batch_size: int = 2
    epochs: int = 300
    max_rounds: int = None
    lr: float = 0.002
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    noise: bool = True
    d_batches: int = 2
    generator_channels: int = 8
    generator_depth: int = 2
    discriminator_channels: int = 8
    discriminator_depth: int = 3
    init_scale: float = 1.0
    precision: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0 or (self.lambda1 == 0 and self.lambda2 == 0):
            raise ValueError('lambda1 and lambda2 must be non-negative and not both zero')
        if self.d_batches != 2:
            raise ValueError('Each round uses exactly two discriminator batches (one real, one generated)')
        if self.precision not in PRECISIONS:
            raise ValueError('Precision must be 64 or 32, got ' + str(self.precision))

    @classmethod
    def from_dict(cls, dc):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(dc) - names
        if unknown:
            raise ValueError('Unknown fusion settings: ' + ', '.join(sorted(unknown)))
        return cls(**dc)

    @property
    def dtype(self):
        return PRECISIONS[self.precision]


def initialise_networks(in_channels, hyper):
    g_seed, d_seed = np.random.SeedSequence(hyper.seed).spawn(2)
    generator = GeneratorParams.initialise(
        in_channels, hyper.generator_channels, hyper.generator_depth, seed=g_seed, init_scale=hyper.init_scale,
        dtype=hyper.dtype,
    )
    discriminator = DiscriminatorParams.initialise(
        in_channels + 1, hyper.discriminator_channels, hyper.discriminator_depth, seed=d_seed,
        init_scale=hyper.init_scale, dtype=hyper.dtype,
    )
    return generator, discriminator


def discriminator_update(x, y, generator, discriminator, optimiser, real):
    """
    One discriminator step on a real-labelled (``real=True``) or generated, fake-labelled batch.

    The generator runs without a tape, so its parameters are untouched. Returns the batch loss.

    """
    if real:
        target = y
    else:
        target = generator_forward(x, generator)
    tape = Tape()
    values = {name: tape.watch(value, name) for name, value in discriminator.params.items()}
    probability = discriminator_forward(x, target, discriminator, values)
    labels = np.full(probability.shape, 1.0 if real else 0.0)
    loss = bce(probability, labels)
    optimiser.step(discriminator.params, tape.backward(loss))
    return float(loss.value)


def generator_update(x, y, generator, discriminator, optimiser, lambda1, lambda2):
    """
    One generator step. Discriminator parameters enter as constants and are untouched.

    Returns:
        tuple: Generator loss and mean L1 error of the batch.

    """
    tape = Tape()
    values = {name: tape.watch(value, name) for name, value in generator.params.items()}
    y_hat = generator_forward(x, generator, values)
    d_fake = discriminator_forward(x, y_hat, discriminator) if lambda1 > 0 else None
    loss = loss_g(d_fake, y_hat, y, lambda1, lambda2)
    mean_l1 = float(np.mean(np.abs(y_hat.value.astype(np.float64) - y)))
    optimiser.step(generator.params, tape.backward(loss))
    return float(loss.value), mean_l1


def train_gan(x, y, hyper, generator=None, discriminator=None, verbose=False):
    """
    Alternating conditional GAN training.

    Every round draws one batch and performs two discriminator updates (real-labelled, then generated and
    fake-labelled) followed by one generator update.

    Args:
        x (numpy.ndarray): Conditioning stacks ``[N, C, S, S]``.
        y (numpy.ndarray): Real frames ``[N, 1, S, S]`` in ``[0, 1]``.
        hyper (GanHyper): Settings.
        generator (GeneratorParams): Optional initial generator.
        discriminator (DiscriminatorParams): Optional initial discriminator.
        verbose (bool): Print mean losses after each epoch.

    Returns:
        tuple: Trained ``GeneratorParams``, ``DiscriminatorParams`` and a ``pandas.DataFrame`` log with columns
        ``round``, ``epoch``, ``L_D``, ``L_G``, ``mean_L1``, ``d_updates`` and ``g_updates``.

    """
    n_samples = len(x)
    if n_samples == 0:
        raise ValueError('Cannot train the fusion networks on an empty sample set')
    if len(y) != n_samples:
        raise ValueError('Conditioning stacks and targets differ in count')

    if generator is None or discriminator is None:
        g_init, d_init = initialise_networks(x.shape[1], hyper)
        generator = g_init if generator is None else generator
        discriminator = d_init if discriminator is None else discriminator
    generator = generator.astype(hyper.dtype)
    discriminator = discriminator.astype(hyper.dtype)

    rng = np.random.default_rng(np.random.SeedSequence([hyper.seed, 1]))
    adam = dict(lr=hyper.lr, beta1=hyper.beta1, beta2=hyper.beta2, eps=hyper.eps)
    g_optimiser = Adam(**adam)
    d_optimiser = Adam(**adam)

    log = {key: [] for key in ['round', 'epoch', 'L_D', 'L_G', 'mean_L1', 'd_updates', 'g_updates']}
    round_index = 0
    for epoch in range(1, hyper.epochs + 1):
        order = rng.permutation(n_samples)
        epoch_start = len(log['round'])
        for start in range(0, n_samples, hyper.batch_size):
            if hyper.max_rounds is not None and round_index >= hyper.max_rounds:
                break
            round_index += 1
            batch = order[start:start + hyper.batch_size]
            xb = np.asarray(x[batch], dtype=hyper.dtype)
            yb = np.asarray(y[batch], dtype=hyper.dtype)

            try:
                loss_real = discriminator_update(xb, yb, generator, discriminator, d_optimiser, real=True)
                loss_fake = discriminator_update(xb, yb, generator, discriminator, d_optimiser, real=False)
                loss_generator, mean_l1 = generator_update(
                    xb, yb, generator, discriminator, g_optimiser, hyper.lambda1, hyper.lambda2
                )
            except NumericalError as err:
                raise NumericalError('Fusion training diverged: ' + str(err), round_index=round_index)
            loss_discriminator = loss_real + loss_fake
            if not (np.isfinite(loss_discriminator) and np.isfinite(loss_generator)):
                raise NumericalError('Fusion loss is not finite', round_index=round_index)

            log['round'].append(round_index)
            log['epoch'].append(epoch)
            log['L_D'].append(loss_discriminator)
            log['L_G'].append(loss_generator)
            log['mean_L1'].append(mean_l1)
            log['d_updates'].append(d_optimiser.steps)
            log['g_updates'].append(g_optimiser.steps)

        if verbose and len(log['round']) > epoch_start:
            print(
                '  - epoch ' + str(epoch) + ': L_D ' + '{:.4f}'.format(np.mean(log['L_D'][epoch_start:]))
                + ', L_G ' + '{:.4f}'.format(np.mean(log['L_G'][epoch_start:]))
                + ', L1 ' + '{:.4f}'.format(np.mean(log['mean_L1'][epoch_start:]))
            )
        if hyper.max_rounds is not None and round_index >= hyper.max_rounds:
            break

    return generator, discriminator, pd.DataFrame(log)


def discriminator_accuracy(x, y, generator, discriminator, batch_size=8):
    """Fraction of real samples scored above 0.5 and generated samples scored below 0.5."""
    correct = 0
    for start in range(0, len(x), batch_size):
        xb = np.asarray(x[start:start + batch_size], dtype=generator.dtype)
        yb = np.asarray(y[start:start + batch_size], dtype=generator.dtype)
        correct += int(np.sum(discriminator_forward(xb, yb, discriminator) > 0.5))
        y_hat = generator_forward(xb, generator)
        correct += int(np.sum(discriminator_forward(xb, y_hat, discriminator) < 0.5))
    return correct / (2.0 * len(x))
