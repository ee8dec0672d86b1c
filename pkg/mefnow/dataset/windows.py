import dataclasses

import numpy as np

from .frames import FrameSequence


@dataclasses.dataclass(frozen=True)
class WindowSpec:
    """
    Sliding-window layout.

    Args:
        length (int): Frames per window. Default 8.
        step (int): Offset between consecutive training windows. Default 1.
        input_len (int): Leading frames used as model input. Default 6.
        target_len (int): Trailing frames used as targets. Default 2.

    """
    length: int = 8
    step: int = 1
    input_len: int = 6
    target_len: int = 2

    def __post_init__(self):
        if self.input_len + self.target_len != self.length:
            raise ValueError('input_len + target_len must equal length')
        if self.step < 1:
            raise ValueError('Window step must be at least 1')
        if self.input_len < 1 or self.target_len < 1:
            raise ValueError('Windows need at least one input and one target frame')

    @classmethod
    def from_dict(cls, dc):
        return cls(**dc)


def count_train_windows(n_frames, length, step=1):
    if n_frames < length:
        return 0
    return (n_frames - length) // step + 1


def train_window_starts(hours, spec):
    """
    Start indices of the training windows over frames with hour indices ``hours``.

    Windows are laid out every ``spec.step`` frames inside each contiguous run of hours, so no window straddles a
    missing hour. An integer stands for that many contiguous frames.

    """
    if np.ndim(hours) == 0:
        hours = np.arange(int(hours), dtype=np.int64)
    starts = [
        start + np.arange(count_train_windows(stop - start, spec.length, spec.step), dtype=np.int64) * spec.step
        for start, stop in contiguous_runs(np.asarray(hours), FrameSequence.cadence)
    ]
    if not starts:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(starts)


def window_train(seq, spec):
    """
    Overlapping training windows inside each contiguous run of hours.

    A contiguous sequence of ``n`` frames gives ``floor((n - length) / step) + 1`` windows, or none if it is shorter
    than one window. Runs separated by a missing hour are windowed independently.

    """
    starts = train_window_starts(seq.hours, spec)
    return [seq.subsequence(start, start + spec.length) for start in starts]


def window_test(seq, length):
    """
    Disjoint test windows.

    Windows are consecutive non-overlapping chunks inside each contiguous run of hours. Partial chunks at the end of
    a run are discarded, so no window spans a missing hour.

    """
    if length < 1:
        raise ValueError('Window length must be at least 1')
    windows = []
    for start, stop in contiguous_runs(seq.hours, seq.cadence):
        for chunk_start in range(start, stop - length + 1, length):
            windows.append(seq.subsequence(chunk_start, chunk_start + length))
    return windows


def contiguous_runs(hours, cadence=1):
    """Half-open index ranges ``(start, stop)`` of runs with no gap in ``hours``."""
    if len(hours) == 0:
        return []
    breaks = np.flatnonzero(np.diff(hours) != cadence) + 1
    bounds = np.concatenate([[0], breaks, [len(hours)]])
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def split_io(window, spec):
    """
    Split one window into model inputs (frames 1 to ``input_len``) and targets (the remaining frames).

    ``window`` may be a ``FrameSequence`` or an array whose first axis is time.

    """
    frames = window.frames if isinstance(window, FrameSequence) else np.asarray(window)
    if frames.shape[0] != spec.length:
        raise ValueError('Expected a window of ' + str(spec.length) + ' frames, got ' + str(frames.shape[0]))
    return frames[:spec.input_len], frames[spec.input_len:]


def stack_windows(windows):
    """``[W, length, 1, H, W]`` array from a list of window sequences."""
    return np.stack([w.frames for w in windows])
