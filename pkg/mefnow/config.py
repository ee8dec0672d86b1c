import copy
import dataclasses
import os

import numpy as np
import yaml

from .errors import ConfigurationError
from .dataset.synthetic import SyntheticConfig
from .dataset.windows import WindowSpec
from .extrapolation.pyramid import PyramidSpec
from .extrapolation.training import PredictorHyper
from .fusion.training import GanHyper
from .fusion.model import VARIANTS
from .evaluation.metrics import MetricsConfig
from .evaluation.harness import METHODS

SEED_ENV_VAR = 'MEF_SEED'
SOURCES = ['synthetic', 'fseq']

DEFAULT_CONFIG = {
    'dataset': {
        'source': 'synthetic',
        'train_path': None,
        'test_path': None,
        'synthetic': {
            'size': 64,
            'n_blobs': 8,
            'amplitude': [80.0, 220.0],
            'radius': [2.0, 10.0],
            'speed': [0.0, 2.0],
            'growth': [-0.05, 0.05],
            'advection_amplitude': 1.5,
            'advection_wavelength': 1.0,
            'noise': 0.0,
        },
        'train_frames': 200,
        'test_frames': 80,
        'test_missing_fraction': 0.0,
        'window': {'length': 8, 'step': 1, 'input_len': 6, 'target_len': 2},
    },
    'pyramid': {'base_size': 64, 'tile': 16, 'levels': 3, 'checkpoint_dir': None},
    'predictor': {
        'hidden': [8, 8],
        'kernel_size': 3,
        'batch_size': 4,
        'epochs': 150,
        'max_steps': None,
        'lr': 0.002,
        'beta1': 0.5,
        'beta2': 0.999,
        'eps': 1e-8,
        'init_scale': 1.0,
        'precision': 64,
    },
    'fusion': {
        'variants': ['mef', 'single_scale'],
        'lambda1': 1.0,
        'lambda2': 100.0,
        'batch_size': 2,
        'epochs': 300,
        'max_rounds': None,
        'lr': 0.002,
        'beta1': 0.5,
        'beta2': 0.999,
        'eps': 1e-8,
        'noise': True,
        'generator_channels': 8,
        'generator_depth': 2,
        'discriminator_channels': 8,
        'discriminator_depth': 3,
        'init_scale': 1.0,
        'precision': 64,
    },
    'eval': {
        'methods': ['persistence', 'flow', 'tiled', 'single_scale', 'mef'],
        'metrics': {'max_i': 255.0, 'k1': 0.01, 'k2': 0.03, 'window_size': 11, 'sigma': 1.5},
        'flow': {'block_size': 8, 'search_radius': 4, 'n_levels': 3},
        'render': 0,
        'seam_methods': ['tiled', 'mef'],
    },
    'output_dir': './output',
    'seed': 0,
}

# Stream tags so that every component draws from its own reproducible stream of the global seed
SEED_STREAMS = {
    'train_data': 1,
    'test_data': 2,
    'predictor': 3,
    'gan': 4,
    'fusion_noise': 5,
    'eval_noise': 6,
}


def derive_seed(seed, stream):
    return int(np.random.SeedSequence([int(seed), SEED_STREAMS[stream]]).generate_state(1)[0])


class RunConfig:
    """
    Validated run configuration built from a nested dictionary.

    Args:
        dc (dict): Complete configuration (defaults already merged in), see ``DEFAULT_CONFIG``.

    Notes:
        Component seeds are derived from the single global ``seed``, so sections do not take their own ``seed`` key.
        Any invalid or unknown setting raises ``ConfigurationError``.

    """

    def __init__(self, dc):
        self.dc = copy.deepcopy(dc)
        try:
            self._build()
        except ConfigurationError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigurationError('Invalid configuration: ' + str(exc)) from exc

    def _build(self):
        dc = self.dc
        _check_keys(dc, DEFAULT_CONFIG, '')
        self.seed = int(dc['seed'])
        self.output_dir = dc['output_dir']

        dataset = dc['dataset']
        self.train_frames = int(dataset['train_frames'])
        self.test_frames = int(dataset['test_frames'])
        self.test_missing_fraction = float(dataset['test_missing_fraction'])
        if self.train_frames < 1 or self.test_frames < 1:
            raise ConfigurationError(
                'Frame counts must be positive, got train ' + str(self.train_frames) + ' and test '
                + str(self.test_frames)
            )
        self.synthetic = SyntheticConfig.from_dict(dataset['synthetic'])
        self.window = WindowSpec.from_dict(dataset['window'])
        self.source = dataset['source']
        self.train_path = dataset['train_path']
        self.test_path = dataset['test_path']
        if self.source not in SOURCES:
            raise ConfigurationError(
                'Unknown dataset source ' + repr(self.source) + ', expected one of ' + ', '.join(SOURCES)
            )
        if self.source == 'fseq':
            for key in ['train_path', 'test_path']:
                if not isinstance(dataset[key], str) or not dataset[key]:
                    raise ConfigurationError('dataset.' + key + ' must name an FSEQ file when dataset.source is fseq')
        elif self.train_path is not None or self.test_path is not None:
            raise ConfigurationError('dataset.train_path and dataset.test_path are only used with dataset.source fseq')

        pyramid = dict(dc['pyramid'])
        checkpoint_dir = pyramid.pop('checkpoint_dir')
        self.pyramid = PyramidSpec(**pyramid)
        if self.source == 'synthetic' and self.synthetic.size != self.pyramid.base_size:
            raise ConfigurationError(
                'Synthetic grid size ' + str(self.synthetic.size) + ' differs from the pyramid base size '
                + str(self.pyramid.base_size)
            )
        self.checkpoint_dir = os.path.join(self.output_dir, 'phase1') if checkpoint_dir is None else checkpoint_dir

        self.predictor = dataclasses.replace(
            PredictorHyper.from_dict(dc['predictor']), seed=derive_seed(self.seed, 'predictor')
        )

        fusion = dict(dc['fusion'])
        self.variants = list(fusion.pop('variants'))
        unknown = [v for v in self.variants if v not in VARIANTS]
        if unknown:
            raise ConfigurationError('Unknown fusion variant(s): ' + ', '.join(unknown))
        self.gan = dataclasses.replace(GanHyper.from_dict(fusion), seed=derive_seed(self.seed, 'gan'))

        evaluation = dc['eval']
        self.methods = list(evaluation['methods'])
        self.seam_methods = list(evaluation['seam_methods'])
        unknown = [m for m in self.methods + self.seam_methods if m not in METHODS]
        if unknown:
            raise ConfigurationError('Unknown evaluation method(s): ' + ', '.join(unknown))
        self.metrics = MetricsConfig(**evaluation['metrics'])
        self.flow = dict(evaluation['flow'])
        self.render = int(evaluation['render'])

    def synthetic_config(self, split):
        """``SyntheticConfig`` for the ``'train'`` or ``'test'`` sequence."""
        if split == 'train':
            n_frames, missing = self.train_frames, 0.0
        elif split == 'test':
            n_frames, missing = self.test_frames, self.test_missing_fraction
        else:
            raise ValueError('Unknown split ' + repr(split))
        config = dataclasses.replace(
            self.synthetic, n_frames=n_frames, missing_fraction=missing, seed=derive_seed(self.seed, split + '_data'),
        )
        config.validate()
        return config

    def to_dict(self):
        return copy.deepcopy(self.dc)


def _check_keys(dc, reference, prefix):
    if not isinstance(dc, dict):
        raise ConfigurationError('Section ' + repr(prefix.rstrip('.')) + ' must be a mapping')
    unknown = sorted(set(dc) - set(reference))
    if unknown:
        raise ConfigurationError('Unknown configuration key(s): ' + ', '.join(prefix + key for key in unknown))
    for key, value in reference.items():
        if key not in dc:
            raise ConfigurationError('Missing configuration key: ' + prefix + key)
        # Open-ended sections are checked by their dataclass constructors
        if isinstance(value, dict) and key not in ('synthetic',):
            _check_keys(dc[key], value, prefix + key + '.')


def merge(base, updates):
    """Recursive dictionary merge returning a new dictionary; ``updates`` wins."""
    merged = copy.deepcopy(base)
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_override(text):
    """
    Parse one ``section.key=value`` override into a nested dictionary.

    The value is read as a YAML scalar or flow collection, so ``3``, ``0.5``, ``true``, ``null`` and ``[8, 8]`` all
    take their natural types.

    """
    if '=' not in text:
        raise ConfigurationError('Override ' + repr(text) + ' is not of the form section.key=value')
    path, value = text.split('=', 1)
    keys = [key for key in path.strip().split('.') if key]
    if not keys:
        raise ConfigurationError('Override ' + repr(text) + ' names no key')
    try:
        value = yaml.safe_load(value)
    except yaml.YAMLError as exc:
        raise ConfigurationError('Could not parse override value in ' + repr(text)) from exc
    dc = value
    for key in reversed(keys):
        dc = {key: dc}
    return dc


def read_config_file(file_path):
    # JSON is a subset of YAML
    if not os.path.exists(file_path):
        raise ConfigurationError('Configuration file not found: ' + file_path)
    with open(file_path, 'r') as fh:
        try:
            dc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigurationError('Could not parse configuration file ' + file_path + ': ' + str(exc)) from exc
    if dc is None:
        return {}
    if not isinstance(dc, dict):
        raise ConfigurationError('Configuration file ' + file_path + ' must hold a mapping')
    return dc


def load_config(file_path=None, overrides=None, environ=None):
    """
    Build the run configuration.

    Args:
        file_path (str): Optional JSON configuration file, merged onto ``DEFAULT_CONFIG``.
        overrides (list of str): ``section.key=value`` overrides applied after the file.
        environ (dict): Environment to read ``MEF_SEED`` from. Defaults to ``os.environ``.

    Returns:
        RunConfig: Validated configuration.

    """
    environ = os.environ if environ is None else environ
    dc = copy.deepcopy(DEFAULT_CONFIG)
    if file_path is not None:
        dc = merge(dc, read_config_file(file_path))
    for text in overrides or []:
        dc = merge(dc, parse_override(text))
    if environ.get(SEED_ENV_VAR, '') != '':
        try:
            dc['seed'] = int(environ[SEED_ENV_VAR])
        except ValueError:
            raise ConfigurationError(SEED_ENV_VAR + ' must be an integer, got ' + repr(environ[SEED_ENV_VAR]))
    return RunConfig(dc)
