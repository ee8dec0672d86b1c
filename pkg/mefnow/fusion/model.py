import os

import numpy as np

from ..errors import ConfigurationError
from ..grid.checkpoint import read_checkpoint, write_checkpoint
from ..extrapolation.pyramid import fusion_input
from .. import utils
from .dataset import select_channels, stack_samples
from .networks import DiscriminatorParams, GeneratorParams, generator_forward
from .training import GanHyper, discriminator_accuracy, train_gan

VARIANTS = ['mef', 'single_scale']


class FusionModel:
    """
    Phase-2 fusion of multi-scale predictions with a conditional GAN.

    Args:
        spec (PyramidSpec): Pyramid layout of the phase-1 predictions.
        hyper (GanHyper): Network and training settings.
        variant (str): ``'mef'`` conditions on every pyramid level; ``'single_scale'`` conditions on the stitched
            full-resolution (level 0) prediction only.
        output_folder (str): Folder for checkpoints and training logs.

    """

    def __init__(self, spec, hyper=None, variant='mef', output_folder='./output/phase2'):
        if variant not in VARIANTS:
            raise ValueError('Unknown fusion variant ' + repr(variant) + ', expected one of ' + str(VARIANTS))
        self.spec = spec
        self.hyper = GanHyper() if hyper is None else hyper
        self.variant = variant
        self.output_folder = output_folder
        self.levels = list(range(spec.levels)) if variant == 'mef' else [0]

        #: GeneratorParams: Trained or loaded generator
        self.generator = None

        #: DiscriminatorParams: Trained or loaded discriminator
        self.discriminator = None

    @property
    def in_channels(self):
        return len(self.levels) + int(self.hyper.noise)

    def checkpoint_path(self, network):
        return os.path.join(self.output_folder, self.variant + '_' + network + '.mefw')

    def select(self, x):
        """Channels used by this variant from a full conditioning stack (all levels plus optional noise)."""
        return select_channels(x, self.levels, self.hyper.noise, self.spec.levels)

    def train(self, samples, verbose=True):
        """
        Train on fusion samples built with every level (see ``build_fusion_dataset()``).

        Writes generator and discriminator checkpoints and a ``gan_{variant}.csv`` log.

        Returns:
            pandas.DataFrame: Training log.

        """
        print('Phase 2 training (' + self.variant + ')')
        x, y = stack_samples(samples)
        x = self.select(x)
        print('  - ' + str(len(x)) + ' samples with ' + str(x.shape[1]) + ' conditioning channels')
        self.generator, self.discriminator, history = train_gan(x, y, self.hyper, verbose=verbose)
        write_checkpoint(self.generator.params, self.checkpoint_path('generator'))
        write_checkpoint(self.discriminator.params, self.checkpoint_path('discriminator'))
        utils.write_csv_(history, os.path.join(self.output_folder, 'gan_' + self.variant + '.csv'))
        print('  - Completed')
        return history

    def load(self):
        paths = [self.checkpoint_path('generator'), self.checkpoint_path('discriminator')]
        missing = [path for path in paths if not os.path.exists(path)]
        if missing:
            raise ConfigurationError('Missing ' + self.variant + ' checkpoint(s): ' + ', '.join(missing))
        self.generator = GeneratorParams(read_checkpoint(paths[0])).astype(self.hyper.dtype)
        self.discriminator = DiscriminatorParams(read_checkpoint(paths[1])).astype(self.hyper.dtype)
        if self.generator.in_channels != self.in_channels:
            raise ConfigurationError(
                'Generator checkpoint expects ' + str(self.generator.in_channels) + ' channels but the '
                + self.variant + ' variant provides ' + str(self.in_channels)
            )

    def fuse(self, prediction, lead, seed=0):
        """Fused ``[1, S, S]`` frame in ``(0, 1)`` from a ``PyramidPrediction``."""
        if self.generator is None:
            raise ConfigurationError('The ' + self.variant + ' generator has not been trained or loaded')
        x = fusion_input(prediction, lead, noise=self.hyper.noise, seed=seed, levels=self.levels)
        return generator_forward(x.astype(self.generator.dtype), self.generator)

    def accuracy(self, samples):
        x, y = stack_samples(samples)
        return discriminator_accuracy(self.select(x), y, self.generator, self.discriminator)


def evaluation_seed(seed, window, lead):
    return np.random.SeedSequence([seed, 1000003, window, lead])
