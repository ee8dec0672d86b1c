import dataclasses

import numpy as np

from .frames import FrameSequence, MAX_VALUE


@dataclasses.dataclass
class SyntheticConfig:
    """
    Settings for the synthetic cloud-advection generator.

    Args:
        size (int): Grid size H = W in pixels.
        n_frames (int): Number of hourly frames.
        n_blobs (int): Number of Gaussian blobs.
        amplitude (tuple): Range of initial blob peak values (gray levels).
        radius (tuple): Range of blob standard deviations (pixels).
        speed (tuple): Range of per-blob speeds (pixels per hour); directions are uniform.
        growth (tuple): Range of multiplicative growth rates (per hour); ``exp(growth)`` is applied each hour.
        advection_amplitude (float): Peak speed of the large-scale velocity field (pixels per hour).
        advection_wavelength (float): Wavelength of the large-scale field as a fraction of the domain size.
        noise (float): Standard deviation of additive Gaussian noise (gray levels).
        missing_fraction (float): Fraction of hours dropped at random after generation, leaving gaps.
        blobs (list of dict): Optional explicit blobs overriding the random draw. Keys are ``x``, ``y``,
            ``amplitude``, ``radius``, ``u``, ``v`` and ``growth``; ``u`` moves along columns and ``v`` along rows.
        seed (int): Random seed.

    Notes:
        The domain is periodic for blob positions so that long sequences keep a stationary blob population.
        Amplitudes that leave the ``amplitude`` range reverse the sign of their growth rate.

    """
    size: int = 64
    n_frames: int = 100
    n_blobs: int = 8
    amplitude: tuple = (80.0, 220.0)
    radius: tuple = (2.0, 10.0)
    speed: tuple = (0.0, 2.0)
    growth: tuple = (-0.05, 0.05)
    advection_amplitude: float = 1.5
    advection_wavelength: float = 1.0
    noise: float = 0.0
    missing_fraction: float = 0.0
    blobs: list = None
    seed: int = 0

    @classmethod
    def from_dict(cls, dc):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(dc) - names
        if unknown:
            raise ValueError('Unknown synthetic dataset settings: ' + ', '.join(sorted(unknown)))
        dc = dict(dc)
        for key in ['amplitude', 'radius', 'speed', 'growth']:
            if key in dc:
                dc[key] = tuple(dc[key])
        return cls(**dc)

    def validate(self):
        if self.size < 1:
            raise ValueError('Synthetic grid size must be positive, got ' + str(self.size))
        if self.n_frames < 1:
            raise ValueError('Synthetic frame count must be positive, got ' + str(self.n_frames))
        if self.blobs is None and self.n_blobs < 1:
            raise ValueError('At least one blob is required')
        if not 0.0 <= self.missing_fraction < 1.0:
            raise ValueError('missing_fraction must lie in [0, 1)')
        values = [
            *self.amplitude, *self.radius, *self.speed, *self.growth, self.advection_amplitude,
            self.advection_wavelength, self.noise,
        ]
        if not np.all(np.isfinite(values)):
            raise ValueError('Synthetic dataset rates must be finite')


def gen_synthetic(config):
    """
    Generate a sequence of Gaussian blobs advected by a smooth large-scale field plus per-blob motion.

    Deterministic for a given ``config.seed``.

    """
    config.validate()
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    blobs = _initial_blobs(config, rng)
    size = float(config.size)

    # Cell-centre coordinates
    rows, cols = np.meshgrid(np.arange(config.size, dtype=np.float64), np.arange(config.size, dtype=np.float64),
                             indexing='ij')

    frames = np.zeros((config.n_frames, 1, config.size, config.size), dtype=np.float64)
    for t in range(config.n_frames):
        frame = np.zeros((config.size, config.size))
        for blob in blobs:
            dx = _wrap(cols - blob['x'], size)
            dy = _wrap(rows - blob['y'], size)
            frame += blob['amplitude'] * np.exp(-(dx * dx + dy * dy) / (2.0 * blob['radius'] ** 2))
        if config.noise > 0:
            frame += rng.normal(0.0, config.noise, frame.shape)
        frames[t, 0] = np.clip(frame, 0.0, MAX_VALUE)
        _advance(blobs, config)

    hours = np.arange(config.n_frames, dtype=np.int64)
    if config.missing_fraction > 0:
        n_missing = int(round(config.missing_fraction * config.n_frames))
        missing = rng.choice(config.n_frames, size=n_missing, replace=False)
        keep = np.setdiff1d(hours, missing)
        frames = frames[keep]
        hours = hours[keep]

    return FrameSequence(frames.astype(np.float32), hours)


def advection_field(x, y, config):
    """Large-scale velocity ``(u, v)`` at position ``(x, y)``: a single sinusoidal gyre pattern."""
    k = 2.0 * np.pi / (config.advection_wavelength * config.size)
    u = config.advection_amplitude * np.sin(k * y)
    v = config.advection_amplitude * np.cos(k * x)
    return u, v


def _initial_blobs(config, rng):
    if config.blobs is not None:
        keys = ['x', 'y', 'amplitude', 'radius', 'u', 'v', 'growth']
        return [{key: float(blob.get(key, 0.0)) for key in keys} for blob in config.blobs]

    blobs = []
    for _ in range(config.n_blobs):
        speed = rng.uniform(*config.speed)
        direction = rng.uniform(0.0, 2.0 * np.pi)
        blobs.append(dict(
            x=rng.uniform(0.0, config.size),
            y=rng.uniform(0.0, config.size),
            amplitude=rng.uniform(*config.amplitude),
            radius=rng.uniform(*config.radius),
            u=speed * np.cos(direction),
            v=speed * np.sin(direction),
            growth=rng.uniform(*config.growth),
        ))
    return blobs


def _advance(blobs, config):
    low, high = min(config.amplitude), max(config.amplitude)
    for blob in blobs:
        u, v = advection_field(blob['x'], blob['y'], config)
        blob['x'] = (blob['x'] + blob['u'] + u) % config.size
        blob['y'] = (blob['y'] + blob['v'] + v) % config.size
        if blob['growth'] != 0.0:
            blob['amplitude'] *= np.exp(blob['growth'])
            if (blob['amplitude'] > high and blob['growth'] > 0) or (blob['amplitude'] < low and blob['growth'] < 0):
                blob['growth'] = -blob['growth']


def _wrap(d, period):
    return (d + period / 2.0) % period - period / 2.0
