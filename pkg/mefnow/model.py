import os

import numpy as np
import pandas as pd
import bokeh.plotting

from .errors import ConfigurationError
from .config import derive_seed
from .dataset.frames import denormalise, normalise
from .dataset.fseq import read_fseq, write_fseq
from .dataset.synthetic import gen_synthetic
from .dataset.windows import window_test, window_train
from .extrapolation.model import ExtrapolationModel
from .extrapolation.pyramid import PyramidPrediction, predict_level
from .fusion.dataset import build_fusion_dataset, read_fusion_dataset, write_fusion_dataset
from .fusion.model import FusionModel, evaluation_seed
from .evaluation.baselines import optical_flow_forecast, persistence_forecast
from .evaluation.harness import compare_position_strategies, evaluate_all, seam_report
from .evaluation import plotting
from . import utils

LEARNED_METHODS = ['tiled', 'single_scale', 'mef']


class NowcastModel:
    """
    Two-phase nowcasting workflow: synthetic data, multi-scale extrapolation, GAN fusion and evaluation.

    Each step reads what earlier steps wrote below ``config.output_dir``, so steps can be run in separate processes
    (as the command-line interface does) or in sequence on one instance.

    Args:
        config (mefnow.config.RunConfig): Run configuration.

    Notes:
        The output directory is laid out as::

            data/      train.fseq, test.fseq, manifest.json
            phase1/    level{l}.mefw, loss_level{l}.csv, positions_level{l}.csv, predictions_level{l}.fseq
            fusion/    x.fseq, y.fseq, manifest.json
            phase2/    {variant}_generator.mefw, {variant}_discriminator.mefw, gan_{variant}.csv, accuracy.csv
            report.csv, cases.csv, seams.csv, panels/case_{i}.png

        Checkpoints of phase 1 go to ``config.checkpoint_dir`` (``phase1/`` unless configured).

    """

    def __init__(self, config):
        print('Nowcast model initialisation')
        self.config = config
        self.output_folder = config.output_dir
        self.data_folder = os.path.join(self.output_folder, 'data')
        self.fusion_folder = os.path.join(self.output_folder, 'fusion')
        self.phase2_folder = os.path.join(self.output_folder, 'phase2')

        #: ExtrapolationModel: Phase-1 predictors by pyramid level
        self.extrapolation_model = ExtrapolationModel(
            config.pyramid, config.predictor, os.path.join(self.output_folder, 'phase1'), config.window,
            checkpoint_folder=config.checkpoint_dir,
        )

        #: dict: FusionModel per variant
        self.fusion_models = {}

        print('  - Completed')

    # ---------------------------------------------------------------------------------------------------------------
    # Data

    def synthesize(self):
        """
        Prepare the train and test sequences below ``data/`` with a manifest.

        With ``dataset.source`` set to ``synthetic`` the sequences are generated; with ``fseq`` they are read from
        ``dataset.train_path`` and ``dataset.test_path``, checked against the pyramid base size and copied.

        Returns:
            tuple: Train and test ``FrameSequence`` objects.

        """
        if self.config.source == 'fseq':
            print('FSEQ data import')
        else:
            print('Synthetic data generation')
        sequences = {}
        manifest = {'size': self.config.pyramid.base_size, 'source': self.config.source}
        for split in ['train', 'test']:
            if self.config.source == 'fseq':
                source_path = getattr(self.config, split + '_path')
                seq = self._import_sequence(source_path)
            else:
                source_path = None
                seq = gen_synthetic(self.config.synthetic_config(split))
            file_name = split + '.fseq'
            write_fseq(seq, os.path.join(self.data_folder, file_name))
            manifest[split] = {
                'file': file_name,
                'n_frames': len(seq),
                'start_hour': seq.start_hour,
                'contiguous': seq.is_contiguous,
                'source_path': source_path,
            }
            sequences[split] = seq
            print('  - ' + split.capitalize() + ' sequence: ' + str(len(seq)) + ' frames')
        utils.write_json(manifest, os.path.join(self.data_folder, 'manifest.json'))
        print('  - Completed')
        return sequences['train'], sequences['test']

    def _import_sequence(self, path):
        if not os.path.exists(path):
            raise ConfigurationError('FSEQ input file not found: ' + path)
        seq = read_fseq(path)
        self._check_size(seq, path)
        return seq

    def load_sequence(self, split):
        path = os.path.join(self.data_folder, split + '.fseq')
        if not os.path.exists(path):
            raise ConfigurationError('Missing ' + split + ' data ' + path + ' (run synth first)')
        seq = read_fseq(path)
        self._check_size(seq, path)
        return seq

    def _check_size(self, seq, path):
        if seq.frames.shape[-1] != self.config.pyramid.base_size or seq.frames.shape[-2] != seq.frames.shape[-1]:
            raise ConfigurationError(
                'Frames in ' + path + ' have size ' + str(seq.frames.shape[-2:]) + ' but the pyramid expects '
                + str(self.config.pyramid.base_size)
            )

    def test_windows(self):
        return window_test(self.load_sequence('test'), self.config.window.length)

    # ---------------------------------------------------------------------------------------------------------------
    # Phase 1

    def train_extrapolation(self, level=None, per_position=False, verbose=True):
        """
        Train phase-1 predictors.

        Args:
            level (int): Pyramid level to train. Defaults to every level in turn.
            per_position (bool): Also train one model per grid position of ``level`` and write the shared versus
                per-position comparison (``positions_level{l}.csv``). The shared model is trained first if it has no
                checkpoint yet.
            verbose (bool): Print per-epoch losses.

        """
        train = self.load_sequence('train')
        sequence = train.normalised()
        levels = range(self.config.pyramid.levels) if level is None else [level]
        for lvl in levels:
            self.config.pyramid.level_size(lvl)  # raises for levels outside the pyramid
            if per_position:
                if self.extrapolation_model.load([lvl], required=False):
                    self.extrapolation_model.train_level(sequence, lvl, verbose=verbose, hours=train.hours)
                self.extrapolation_model.train_level_per_position(sequence, lvl, verbose=verbose, hours=train.hours)
                self.compare_positions(lvl)
            else:
                self.extrapolation_model.train_level(sequence, lvl, verbose=verbose, hours=train.hours)

    def compare_positions(self, level):
        """Shared versus per-position predictors of one level on the test windows."""
        print('Shared versus per-position comparison (level ' + str(level) + ')')
        model = self.extrapolation_model
        if model.models[level] is None:
            model.load([level])
        if level not in model.position_models:
            model.load_per_position(level)
        df = compare_position_strategies(
            self.test_windows(), model.models[level], model.position_models[level], self.config.pyramid, level,
            input_len=self.config.window.input_len,
        )
        utils.write_csv_(df, os.path.join(model.output_folder, 'positions_level' + str(level) + '.csv'))
        for row in df.itertuples():
            print('  - ' + row.strategy + ': MAE ' + '{:.4f}'.format(row.MAE) + ', MSE ' + '{:.4f}'.format(row.MSE))
        print('  - Completed')
        return df

    # ---------------------------------------------------------------------------------------------------------------
    # Phase 2

    def build_fusion(self):
        """
        Build the fusion training set from phase-1 predictions over every training window.

        Returns:
            list of FusionSample: Two samples per training window.

        """
        print('Fusion dataset construction')
        self.extrapolation_model.load()
        windows = window_train(self.load_sequence('train'), self.config.window)
        if not windows:
            raise ConfigurationError('The training sequence is shorter than one window')
        predictions = []
        samples = build_fusion_dataset(
            windows, self.extrapolation_model.models, self.config.pyramid, noise=self.config.gan.noise,
            seed=derive_seed(self.config.seed, 'fusion_noise'), input_len=self.config.window.input_len,
            predictions=predictions,
        )
        self.extrapolation_model.write_predictions(predictions)
        write_fusion_dataset(samples, self.fusion_folder, self.config.pyramid.levels, self.config.gan.noise)
        print('  - ' + str(len(windows)) + ' windows, ' + str(len(samples)) + ' samples')
        print('  - Completed')
        return samples

    def load_fusion_samples(self):
        if not os.path.exists(os.path.join(self.fusion_folder, 'manifest.json')):
            raise ConfigurationError('Missing fusion dataset in ' + self.fusion_folder + ' (run build-fusion first)')
        samples, manifest = read_fusion_dataset(self.fusion_folder)
        if manifest['levels'] != self.config.pyramid.levels or manifest['noise'] != self.config.gan.noise:
            raise ConfigurationError(
                'Fusion dataset was built with ' + str(manifest['levels']) + ' levels and noise '
                + str(manifest['noise']) + ', which does not match the configuration'
            )
        return samples

    def train_fusion(self, variants=None, verbose=True):
        """
        Train the fusion GAN of each variant and log discriminator accuracy.

        Accuracy is measured on the training samples and on held-out samples built from the test windows.

        Args:
            variants (list of str): Variants to train. Defaults to the configured ``fusion.variants``.
            verbose (bool): Print per-epoch losses.

        """
        variants = self.config.variants if variants is None else variants
        samples = self.load_fusion_samples()
        held_out = self._held_out_samples()
        rows = []
        for variant in variants:
            fusion_model = FusionModel(self.config.pyramid, self.config.gan, variant, self.phase2_folder)
            fusion_model.train(samples, verbose=verbose)
            self.fusion_models[variant] = fusion_model
            row = {'variant': variant, 'train_accuracy': fusion_model.accuracy(samples), 'test_accuracy': np.nan}
            if held_out:
                row['test_accuracy'] = fusion_model.accuracy(held_out)
            print(
                '  - ' + variant + ' discriminator accuracy: train ' + '{:.3f}'.format(row['train_accuracy'])
                + ', held-out ' + '{:.3f}'.format(row['test_accuracy'])
            )
            rows.append(row)
        df = pd.DataFrame(rows, columns=['variant', 'train_accuracy', 'test_accuracy'])
        utils.write_csv_(df, os.path.join(self.phase2_folder, 'accuracy.csv'))
        return df

    def _held_out_samples(self):
        windows = self.test_windows()
        if not windows:
            return []
        self.extrapolation_model.load()
        return build_fusion_dataset(
            windows, self.extrapolation_model.models, self.config.pyramid, noise=self.config.gan.noise,
            seed=derive_seed(self.config.seed, 'eval_noise'), input_len=self.config.window.input_len,
        )

    # ---------------------------------------------------------------------------------------------------------------
    # Evaluation

    def forecasters(self, methods):
        """
        Forecast callables for ``evaluate_all()``, loading the checkpoints each learned method needs.

        Raises:
            ConfigurationError: Listing every method with a missing checkpoint.

        """
        problems = []
        for method in methods:
            if method not in LEARNED_METHODS:
                continue
            try:
                self._load_for(method)
            except ConfigurationError as exc:
                problems.append(method + ': ' + str(exc))
        if problems:
            raise ConfigurationError('Missing checkpoints for method(s) ' + '; '.join(problems))

        flow = self.config.flow
        available = {
            'persistence': lambda inputs, window=0: persistence_forecast(inputs),
            'flow': lambda inputs, window=0: optical_flow_forecast(inputs, **flow),
            'tiled': self._tiled_forecast,
            'single_scale': lambda inputs, window=0: self._fused_forecast('single_scale', inputs, window),
            'mef': lambda inputs, window=0: self._fused_forecast('mef', inputs, window),
        }
        return {method: available[method] for method in methods}

    def _load_for(self, method):
        if method == 'mef':
            self.extrapolation_model.load()
        elif self.extrapolation_model.models[0] is None:
            self.extrapolation_model.load([0])
        if method in ('single_scale', 'mef') and method not in self.fusion_models:
            fusion_model = FusionModel(self.config.pyramid, self.config.gan, method, self.phase2_folder)
            fusion_model.load()
            self.fusion_models[method] = fusion_model

    def _tiled_forecast(self, inputs, window=0):
        first, second, _ = predict_level(normalise(inputs), self.extrapolation_model.models[0], self.config.pyramid, 0)
        return denormalise(first), denormalise(second)

    def _fused_forecast(self, variant, inputs, window):
        inputs = normalise(inputs)
        if variant == 'mef':
            prediction = self.extrapolation_model.predict(inputs)
        else:
            first, second, layout = predict_level(inputs, self.extrapolation_model.models[0], self.config.pyramid, 0)
            prediction = PyramidPrediction(frames={1: [first], 2: [second]}, spec=self.config.pyramid, layouts=[layout])
        seed = derive_seed(self.config.seed, 'eval_noise')
        return tuple(
            denormalise(self.fusion_models[variant].fuse(prediction, lead, seed=evaluation_seed(seed, window, lead)))
            for lead in (1, 2)
        )

    def evaluate(self, methods=None, render=None):
        """
        Compare methods on the test windows and write ``report.csv``, ``cases.csv`` and ``seams.csv``.

        Args:
            methods (list of str): Methods to compare. Defaults to the configured ``eval.methods``.
            render (int): Number of cases to render as PNG panels. Defaults to ``eval.render``.

        Returns:
            pandas.DataFrame: Averaged report with one row per method and lead time.

        """
        print('Evaluation')
        methods = self.config.methods if methods is None else methods
        render = self.config.render if render is None else render
        windows = self.test_windows()
        if not windows:
            raise ConfigurationError('The test sequence holds no complete window')
        forecasters = self.forecasters(methods)
        input_len = self.config.window.input_len
        print('  - ' + str(len(windows)) + ' test windows, methods: ' + ', '.join(methods))

        report, cases = evaluate_all(windows, methods, forecasters, self.config.metrics, input_len=input_len)
        utils.write_csv_(report, os.path.join(self.output_folder, 'report.csv'))
        utils.write_csv_(cases, os.path.join(self.output_folder, 'cases.csv'))
        for row in report.itertuples():
            print(
                '  - ' + row.method + ' (' + str(row.lead_hours) + ' h): MAE ' + '{:.3f}'.format(row.MAE) + ', RMSE '
                + '{:.3f}'.format(row.RMSE) + ', SSIM ' + '{:.4f}'.format(row.SSIM)
            )

        seam_methods = [method for method in self.config.seam_methods if method in forecasters]
        if seam_methods:
            seams = seam_report(windows, forecasters, self.config.pyramid.tile, seam_methods, input_len=input_len)
            utils.write_csv_(seams, os.path.join(self.output_folder, 'seams.csv'))
            for row in seams.itertuples():
                print(
                    '  - ' + row.method + ' seam jump (' + str(row.lead_hours) + ' h): max '
                    + '{:.3f}'.format(row.max_jump) + ', ratio ' + '{:.3f}'.format(row.ratio)
                )

        for index in range(min(render, len(windows))):
            frames = windows[index].frames.astype(np.float64)
            inputs = frames[:input_len]
            predictions = {method: forecasters[method](inputs, window=index) for method in methods}
            plotting.render_panel(
                inputs, frames[input_len:], predictions,
                os.path.join(self.output_folder, 'panels', 'case_' + '{:03d}'.format(index) + '.png'),
            )
        if render:
            print('  - ' + str(min(render, len(windows))) + ' panels rendered')
        print('  - Completed')
        return report

    def plot(self, show=False):
        """
        Bokeh figures of the training histories found in the output folder.

        Returns:
            bokeh layout or None if no history has been written yet.

        """
        figures = []
        phase1_folder = self.extrapolation_model.output_folder
        for level in range(self.config.pyramid.levels):
            path = os.path.join(phase1_folder, 'loss_level' + str(level) + '.csv')
            if os.path.exists(path):
                figures.append(plotting.plot_training_history(
                    utils.read_csv_(path), ['loss'], 'Phase 1 level ' + str(level),
                ))
        for variant in self.config.variants:
            path = os.path.join(self.phase2_folder, 'gan_' + variant + '.csv')
            if os.path.exists(path):
                figures.append(plotting.plot_training_history(
                    utils.read_csv_(path), ['L_D', 'L_G', 'mean_L1'], 'Phase 2 ' + variant, x='round',
                ))
        if not figures:
            return None
        layout = plotting.construct_gridplot(figures)
        if show:
            bokeh.plotting.show(layout)
        return layout
