import numpy as np

MAX_VALUE = 255.0


class FrameSequence:
    """
    Hourly single-channel image sequence.

    Args:
        frames (numpy.ndarray): Array of shape ``[T, 1, H, W]`` with values in ``[0, 255]``.
        hours (array-like): Integer hour index of each frame, strictly increasing. Gaps are allowed (a missing hour
            is simply absent). If omitted, hours run contiguously from ``start_hour``.
        start_hour (int): First hour index if ``hours`` is not given.

    Notes:
        The cadence is fixed at one frame per hour. A sequence with no gaps is contiguous; test windows are only
        formed within contiguous runs (see ``mefnow.dataset.windows.window_test()``).

    """

    cadence = 1

    def __init__(self, frames, hours=None, start_hour=0):
        frames = np.asarray(frames)
        if frames.ndim != 4 or frames.shape[1] != 1:
            raise ValueError('Frames must have shape [T, 1, H, W], got ' + str(frames.shape))
        if frames.size and (not np.all(np.isfinite(frames)) or frames.min() < 0 or frames.max() > MAX_VALUE):
            raise ValueError('Frame values must be finite and lie within [0, 255]')
        if hours is None:
            hours = np.arange(start_hour, start_hour + frames.shape[0], self.cadence, dtype=np.int64)
        else:
            hours = np.asarray(hours, dtype=np.int64)
        if hours.shape != (frames.shape[0],):
            raise ValueError('Expected ' + str(frames.shape[0]) + ' hour indices, got ' + str(hours.shape))
        if hours.size > 1 and np.any(np.diff(hours) < self.cadence):
            raise ValueError('Hour indices must be strictly increasing')

        self.frames = frames
        self.hours = hours

    def __len__(self):
        return self.frames.shape[0]

    @property
    def start_hour(self):
        return int(self.hours[0]) if len(self) else 0

    @property
    def frame_shape(self):
        return self.frames.shape[1:]

    @property
    def is_contiguous(self):
        return bool(np.all(np.diff(self.hours) == self.cadence))

    def subsequence(self, start, stop):
        return FrameSequence(self.frames[start:stop], self.hours[start:stop])

    def normalised(self):
        """Frames scaled to ``[0, 1]`` as float64, the representation used for training."""
        return normalise(self.frames)


def normalise(frames):
    return np.asarray(frames, dtype=np.float64) / MAX_VALUE


def denormalise(frames):
    return np.asarray(frames, dtype=np.float64) * MAX_VALUE
