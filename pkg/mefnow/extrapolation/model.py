import dataclasses
import os

import numpy as np

from ..errors import ConfigurationError
from ..grid.checkpoint import read_checkpoint, write_checkpoint
from ..dataset.frames import denormalise
from ..dataset.fseq import write_frames
from ..dataset.windows import WindowSpec, train_window_starts
from .. import utils
from . import pyramid
from .convlstm import ConvLSTMStack
from .training import PredictorHyper, train_predictor


class ExtrapolationModel:
    """
    Phase-1 multi-scale extrapolation: one ConvLSTM predictor per pyramid level.

    Args:
        spec (pyramid.PyramidSpec): Pyramid layout.
        hyper (training.PredictorHyper): Predictor architecture and training settings, shared by all levels.
        output_folder (str): Folder for loss logs and prediction files.
        window_spec (WindowSpec): Window layout. Defaults to 8-frame windows with 6 inputs.
        checkpoint_folder (str): Folder for checkpoints. Defaults to ``output_folder``.

    Notes:
        Checkpoints are named ``level{l}.mefw`` for the shared model of level ``l`` and ``level{l}_pos{p}.mefw`` for
        per-position models. Each level is trained independently of the others.
        ``predictions_level{l}.fseq`` holds the level-l predictions over the training windows.

    """

    def __init__(self, spec, hyper=None, output_folder='./output/phase1', window_spec=None, checkpoint_folder=None):
        self.spec = spec
        self.hyper = PredictorHyper() if hyper is None else hyper
        self.output_folder = output_folder
        self.checkpoint_folder = output_folder if checkpoint_folder is None else checkpoint_folder
        self.window_spec = WindowSpec() if window_spec is None else window_spec

        #: list: Shared ``ConvLSTMStack`` per level (None until trained or loaded)
        self.models = [None] * spec.levels

        #: dict: Per-position model lists by level
        self.position_models = {}

    def checkpoint_path(self, level, position=None):
        name = 'level' + str(level)
        if position is not None:
            name += '_pos' + str(position)
        return os.path.join(self.checkpoint_folder, name + '.mefw')

    def training_windows(self, sequence, level, positions=None, hours=None):
        """
        Lazily gathered tile windows of ``level`` from a normalised ``[T, 1, S, S]`` training sequence.

        ``hours`` holds the hour index of each frame (contiguous if omitted); windows never straddle a missing hour.

        """
        starts = train_window_starts(sequence.shape[0] if hours is None else hours, self.window_spec)
        return pyramid.TileWindows(
            sequence, self.spec, level, starts, length=self.window_spec.length, positions=positions
        )

    def train_level(self, sequence, level, verbose=True, hours=None):
        """
        Train the shared predictor of one level on all tile sequences of that level.

        Args:
            sequence (numpy.ndarray): Normalised training frames ``[T, 1, S, S]``.
            level (int): Pyramid level.
            verbose (bool): Print per-epoch losses.
            hours (numpy.ndarray): Hour index of each frame. Defaults to contiguous hours.

        Returns:
            pandas.DataFrame: Loss log.

        """
        print('Phase 1 training (level ' + str(level) + ')')
        windows = self.training_windows(sequence, level, hours=hours)
        print('  - ' + str(len(windows)) + ' tile windows of size ' + str(self.spec.tile))
        hyper = _level_hyper(self.hyper, level)
        model, history = train_predictor(windows, hyper, input_len=self.window_spec.input_len, verbose=verbose)
        self.models[level] = model
        write_checkpoint(model.params, self.checkpoint_path(level))
        utils.write_csv_(history, os.path.join(self.output_folder, 'loss_level' + str(level) + '.csv'))
        print('  - Completed')
        return history

    def train_level_per_position(self, sequence, level, verbose=False, hours=None):
        """Train one predictor per grid position of ``level`` (for the shared-versus-per-position comparison)."""
        print('Phase 1 per-position training (level ' + str(level) + ')')
        layout = self.spec.level_layout(level)
        hyper = _level_hyper(self.hyper, level)
        models = []
        for position in range(layout.n_tiles):
            windows = self.training_windows(sequence, level, positions=[position], hours=hours)
            model, history = train_predictor(windows, hyper, input_len=self.window_spec.input_len, verbose=verbose)
            write_checkpoint(model.params, self.checkpoint_path(level, position))
            utils.write_csv_(
                history, os.path.join(self.output_folder, 'loss_level' + str(level) + '_pos' + str(position) + '.csv')
            )
            models.append(model)
            print('  - Position ' + str(position) + ' of ' + str(layout.n_tiles) + ' trained')
        self.position_models[level] = models
        print('  - Completed')
        return models

    def load(self, levels=None, required=True):
        """Load shared checkpoints, raising ``ConfigurationError`` for missing ones if ``required``."""
        levels = range(self.spec.levels) if levels is None else levels
        missing = []
        for level in levels:
            path = self.checkpoint_path(level)
            if os.path.exists(path):
                self.models[level] = ConvLSTMStack(read_checkpoint(path)).astype(self.hyper.dtype)
            else:
                missing.append(path)
        if missing and required:
            raise ConfigurationError('Missing phase-1 checkpoint(s): ' + ', '.join(missing))
        return missing

    def load_per_position(self, level):
        models = []
        for position in range(self.spec.n_tiles(level)):
            path = self.checkpoint_path(level, position)
            if not os.path.exists(path):
                raise ConfigurationError('Missing per-position checkpoint: ' + path)
            models.append(ConvLSTMStack(read_checkpoint(path)).astype(self.hyper.dtype))
        self.position_models[level] = models
        return models

    def predict(self, inputs):
        """``PyramidPrediction`` for normalised full-resolution inputs ``[6, 1, S, S]``."""
        return pyramid.predict_multiscale(inputs, self.models, self.spec)

    def write_predictions(self, predictions):
        """
        Write per-level predictions as ``predictions_level{l}.fseq`` in gray levels.

        Frame ``2 * w + lead - 1`` of each file is the ``lead``-hour prediction of window ``w`` at the level's own
        resolution.

        Args:
            predictions (list of pyramid.PyramidPrediction): One prediction per window.

        Returns:
            list of str: File path per level.

        """
        paths = []
        for level in range(self.spec.levels):
            frames = [prediction.frames[lead][level][0] for prediction in predictions for lead in pyramid.LEADS]
            path = os.path.join(self.output_folder, 'predictions_level' + str(level) + '.fseq')
            write_frames(denormalise(np.stack(frames)), path)
            paths.append(path)
        return paths


def _level_hyper(hyper, level):
    # Distinct but reproducible initialisation per level
    seed = np.random.SeedSequence([hyper.seed, level]).generate_state(1)[0]
    return dataclasses.replace(hyper, seed=int(seed))
