import dataclasses
import os

import numpy as np

from ..dataset.fseq import read_frames, write_frames
from ..dataset.frames import normalise
from ..extrapolation.pyramid import LEADS, fusion_input, predict_multiscale
from .. import utils


@dataclasses.dataclass
class FusionSample:
    """Conditioning stack ``x`` (``[C, S, S]``) paired with the real frame ``y`` (``[1, S, S]`` in ``[0, 1]``)."""
    x: np.ndarray
    y: np.ndarray
    lead: int
    window: int = 0

    def __post_init__(self):
        if self.x.shape[-2:] != self.y.shape[-2:]:
            raise ValueError('Conditioning stack and target differ in size')
        if self.y.min() < 0 or self.y.max() > 1:
            raise ValueError('Fusion targets must lie within [0, 1]')


def sample_seed(seed, window, lead):
    return np.random.SeedSequence([seed, window, lead])


def build_fusion_dataset(windows, models, spec, noise=True, seed=0, input_len=6, predictions=None):
    """
    Fusion training samples from phase-1 predictions over training windows.

    Args:
        windows (list): Training windows (``FrameSequence`` objects or ``[length, 1, S, S]`` arrays in ``[0, 255]``).
        models (list): Phase-1 model per pyramid level.
        spec (PyramidSpec): Pyramid layout.
        noise (bool): Append a unit-Gaussian channel to every conditioning stack.
        seed (int): Seed for the noise channels.
        input_len (int): Number of input frames per window.
        predictions (list): Optional list that receives the ``PyramidPrediction`` of every window.

    Returns:
        list of FusionSample: Two samples per window, lead 1 (target frame ``input_len + 1``) then lead 2.

    """
    samples = []
    for index, window in enumerate(windows):
        frames = normalise(getattr(window, 'frames', window))
        prediction = predict_multiscale(frames[:input_len], models, spec)
        if predictions is not None:
            predictions.append(prediction)
        for lead in LEADS:
            x = fusion_input(prediction, lead, noise=noise, seed=sample_seed(seed, index, lead))
            samples.append(FusionSample(
                x=x.astype(np.float32), y=frames[input_len + lead - 1].astype(np.float32), lead=lead, window=index,
            ))
    return samples


def select_channels(x, levels, noise, n_levels):
    """Channels of a full conditioning stack used by a fusion variant (chosen levels plus the noise channel)."""
    channels = list(levels)
    if noise:
        channels.append(n_levels)
    return x[..., channels, :, :]


def stack_samples(samples):
    x = np.stack([s.x for s in samples])
    y = np.stack([s.y for s in samples])
    return x, y


def write_fusion_dataset(samples, folder, n_levels, noise):
    """
    Persist samples as paired FSEQ files plus a JSON manifest.

    ``x.fseq`` holds every conditioning channel as a frame (sample-major); ``y.fseq`` holds one target per sample.

    """
    x, y = stack_samples(samples)
    n_samples, n_channels, size, _ = x.shape
    write_frames(x.reshape(n_samples * n_channels, size, size), os.path.join(folder, 'x.fseq'))
    write_frames(y.reshape(n_samples, size, size), os.path.join(folder, 'y.fseq'))
    manifest = {
        'n_samples': n_samples,
        'channels': n_channels,
        'levels': n_levels,
        'noise': bool(noise),
        'size': size,
        'x': 'x.fseq',
        'y': 'y.fseq',
        'leads': [int(s.lead) for s in samples],
        'windows': [int(s.window) for s in samples],
    }
    utils.write_json(manifest, os.path.join(folder, 'manifest.json'))
    return manifest


def read_fusion_dataset(folder):
    manifest = utils.read_json(os.path.join(folder, 'manifest.json'))
    x, _ = read_frames(os.path.join(folder, manifest['x']))
    y, _ = read_frames(os.path.join(folder, manifest['y']))
    n, c, s = manifest['n_samples'], manifest['channels'], manifest['size']
    x = x.reshape(n, c, s, s)
    y = y.reshape(n, 1, s, s)
    samples = [
        FusionSample(x=x[i], y=y[i], lead=manifest['leads'][i], window=manifest['windows'][i]) for i in range(n)
    ]
    return samples, manifest
