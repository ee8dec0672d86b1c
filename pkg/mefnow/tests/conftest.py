import numpy as np
import pytest

from mefnow.dataset.frames import FrameSequence
from mefnow.dataset.synthetic import SyntheticConfig


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-running learning experiments (deselect with -m "not slow")')


@pytest.fixture
def rng():
    return np.random.default_rng(np.random.SeedSequence(20240601))


@pytest.fixture
def translating_config():
    """One blob moving two columns per hour on a 32 x 32 grid, no large-scale field."""
    return SyntheticConfig(
        size=32, n_frames=12, advection_amplitude=0.0,
        blobs=[dict(x=8.0, y=16.0, amplitude=200.0, radius=3.0, u=2.0, v=0.0, growth=0.0)],
    )


@pytest.fixture
def small_sequence(rng):
    frames = rng.uniform(0.0, 255.0, size=(10, 1, 8, 8))
    return FrameSequence(frames, start_hour=100)


@pytest.fixture
def tiny_config(tmp_path):
    """Nested configuration dictionary for a fast 16 x 16, two-level run writing below ``tmp_path``."""
    return {
        'output_dir': str(tmp_path / 'run'),
        'dataset': {
            'synthetic': {'size': 16, 'n_blobs': 2, 'radius': [2.0, 3.0]},
            'train_frames': 12,
            'test_frames': 16,
        },
        'pyramid': {'base_size': 16, 'tile': 8, 'levels': 2},
        'predictor': {'hidden': [2], 'epochs': 1, 'max_steps': 2},
        'fusion': {
            'epochs': 1, 'max_rounds': 2, 'generator_channels': 2, 'generator_depth': 1,
            'discriminator_channels': 2, 'discriminator_depth': 2,
        },
        'eval': {'flow': {'block_size': 4, 'search_radius': 2, 'n_levels': 2}},
    }
