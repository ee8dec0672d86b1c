import os

import numpy as np
import pytest
from PIL import Image

from mefnow.errors import FormatError
from mefnow.dataset.frames import FrameSequence, normalise, denormalise
from mefnow.dataset.synthetic import SyntheticConfig, gen_synthetic
from mefnow.dataset.windows import (
    WindowSpec, count_train_windows, window_train, window_test, split_io, contiguous_runs, stack_windows,
    train_window_starts,
)
from mefnow.dataset.fseq import parse_frames, read_fseq, write_fseq, write_frames, read_frames
from mefnow.dataset.images import to_gray8, write_png


def centroid_column(frame):
    frame = np.asarray(frame, dtype=np.float64)[0]
    cols = np.arange(frame.shape[1])
    return float(np.sum(frame * cols[np.newaxis, :]) / np.sum(frame))


# ---------------------------------------------------------------------------------------------------------------------
# Frame sequences

class TestFrameSequence:

    def test_contiguous_hours(self, small_sequence):
        assert small_sequence.hours.tolist() == list(range(100, 110))
        assert small_sequence.is_contiguous
        assert small_sequence.frame_shape == (1, 8, 8)

    def test_gapped_hours(self, rng):
        seq = FrameSequence(rng.uniform(0, 255, (3, 1, 4, 4)), hours=[0, 1, 5])
        assert not seq.is_contiguous
        assert seq.start_hour == 0

    @pytest.mark.parametrize('hours', [[0, 0, 1], [2, 1, 3], [0, 1]])
    def test_invalid_hours(self, rng, hours):
        with pytest.raises(ValueError):
            FrameSequence(rng.uniform(0, 255, (3, 1, 4, 4)), hours=hours)

    @pytest.mark.parametrize('value', [-1.0, 256.0, np.nan])
    def test_values_out_of_range(self, value):
        frames = np.zeros((2, 1, 4, 4))
        frames[1, 0, 2, 2] = value
        with pytest.raises(ValueError):
            FrameSequence(frames)

    def test_wrong_layout(self):
        with pytest.raises(ValueError):
            FrameSequence(np.zeros((2, 3, 4, 4)))

    def test_normalisation(self, small_sequence):
        x = small_sequence.normalised()
        assert x.dtype == np.float64
        assert 0.0 <= x.min() and x.max() <= 1.0
        np.testing.assert_allclose(denormalise(x), small_sequence.frames, rtol=1e-12)
        np.testing.assert_array_equal(normalise(np.array([255.0])), [1.0])


# ---------------------------------------------------------------------------------------------------------------------
# Synthetic generator

class TestSynthetic:

    def test_static_scene(self):
        config = SyntheticConfig(
            size=32, n_frames=5, speed=(0.0, 0.0), growth=(0.0, 0.0), advection_amplitude=0.0, noise=0.0, seed=3,
        )
        seq = gen_synthetic(config)
        for t in range(1, 5):
            np.testing.assert_array_equal(seq.frames[t], seq.frames[0])

    def test_translating_blob(self, translating_config):
        seq = gen_synthetic(translating_config)
        columns = [centroid_column(seq.frames[t]) for t in range(6)]
        for before, after in zip(columns[:-1], columns[1:]):
            assert abs((after - before) - 2.0) <= 0.1

    def test_deterministic(self):
        config = SyntheticConfig(size=32, n_frames=6, noise=2.0, seed=11)
        np.testing.assert_array_equal(gen_synthetic(config).frames, gen_synthetic(config).frames)

    def test_seed_changes_scene(self):
        first = gen_synthetic(SyntheticConfig(size=32, n_frames=2, seed=1))
        second = gen_synthetic(SyntheticConfig(size=32, n_frames=2, seed=2))
        assert not np.array_equal(first.frames, second.frames)

    def test_values_in_range(self):
        seq = gen_synthetic(SyntheticConfig(size=32, n_frames=20, n_blobs=20, noise=30.0, seed=5))
        assert seq.frames.min() >= 0.0
        assert seq.frames.max() <= 255.0
        assert seq.frames.dtype == np.float32

    def test_missing_fraction_leaves_gaps(self):
        seq = gen_synthetic(SyntheticConfig(size=32, n_frames=40, missing_fraction=0.1, seed=4))
        assert len(seq) == 36
        assert not seq.is_contiguous

    @pytest.mark.parametrize('changes', [dict(size=0), dict(n_frames=0), dict(n_blobs=0), dict(noise=np.inf)])
    def test_invalid_config(self, changes):
        config = SyntheticConfig(**changes)
        with pytest.raises(ValueError):
            gen_synthetic(config)

    def test_unknown_keys(self):
        with pytest.raises(ValueError):
            SyntheticConfig.from_dict({'size': 32, 'colour': 'red'})


# ---------------------------------------------------------------------------------------------------------------------
# Windows

class TestWindows:

    def test_desk_scale_training_count(self):
        assert count_train_windows(10664, 8, 1) == 10657

    @pytest.mark.parametrize('n_frames, expected', [(10, 3), (8, 1), (7, 0)])
    def test_small_counts(self, n_frames, expected):
        seq = FrameSequence(np.zeros((n_frames, 1, 2, 2)))
        assert len(window_train(seq, WindowSpec())) == expected

    def test_count_formula_matches_enumeration(self, rng):
        for _ in range(200):
            length = int(rng.integers(1, 12))
            step = int(rng.integers(1, length + 1))
            n_frames = int(rng.integers(length, 60))
            enumerated = 0
            start = 0
            while start + length <= n_frames:
                enumerated += 1
                start += step
            assert count_train_windows(n_frames, length, step) == enumerated

    def test_training_windows_overlap(self, small_sequence):
        spec = WindowSpec(length=8, step=1, input_len=6, target_len=2)
        windows = window_train(small_sequence, spec)
        np.testing.assert_array_equal(windows[0].frames[1:], windows[1].frames[:-1])
        assert windows[2].hours.tolist() == list(range(102, 110))
        assert stack_windows(windows).shape == (3, 8, 1, 8, 8)

    def test_training_windows_skip_gaps(self):
        hours = [h for h in range(20) if h != 9]
        seq = FrameSequence(np.zeros((len(hours), 1, 2, 2)), hours=hours)
        windows = window_train(seq, WindowSpec())
        # runs of 9 and 10 frames
        assert len(windows) == 2 + 3
        for window in windows:
            assert window.is_contiguous
        assert [w.start_hour for w in windows] == [0, 1, 10, 11, 12]
        assert train_window_starts(seq.hours, WindowSpec()).tolist() == [0, 1, 9, 10, 11]

    def test_training_starts_from_frame_count(self):
        assert train_window_starts(10, WindowSpec()).tolist() == [0, 1, 2]
        assert train_window_starts(7, WindowSpec()).tolist() == []

    def test_test_windows_contiguous_count(self):
        seq = FrameSequence(np.zeros((727, 1, 2, 2)))
        assert len(window_test(seq, 8)) == 90

    def test_test_windows_disjoint(self, rng):
        seq = FrameSequence(rng.uniform(0, 255, (16, 1, 2, 2)))
        windows = window_test(seq, 8)
        assert len(windows) == 2
        assert set(windows[0].hours.tolist()).isdisjoint(windows[1].hours.tolist())

    def test_test_windows_skip_gaps(self):
        hours = [h for h in range(727) if h not in (5, 300)]
        seq = FrameSequence(np.zeros((len(hours), 1, 2, 2)), hours=hours)
        windows = window_test(seq, 8)
        # runs of 5, 294 and 426 frames
        assert len(windows) == 0 + 36 + 53
        for window in windows:
            assert window.is_contiguous

    def test_contiguous_runs(self):
        assert contiguous_runs(np.array([0, 1, 2, 5, 6, 9])) == [(0, 3), (3, 5), (5, 6)]
        assert contiguous_runs(np.array([], dtype=np.int64)) == []

    def test_split_io(self):
        frames = np.arange(8, dtype=np.float64).reshape(8, 1, 1, 1)
        inputs, targets = split_io(FrameSequence(frames), WindowSpec())
        assert inputs[:, 0, 0, 0].tolist() == [0, 1, 2, 3, 4, 5]
        assert targets[:, 0, 0, 0].tolist() == [6, 7]
        np.testing.assert_array_equal(np.concatenate([inputs, targets]), frames)

    def test_split_io_wrong_length(self):
        with pytest.raises(ValueError):
            split_io(np.zeros((7, 1, 2, 2)), WindowSpec())

    @pytest.mark.parametrize('fields', [dict(length=8, input_len=5, target_len=2), dict(step=0)])
    def test_invalid_spec(self, fields):
        with pytest.raises(ValueError):
            WindowSpec(**fields)


# ---------------------------------------------------------------------------------------------------------------------
# FSEQ files

class TestFseq:

    def test_roundtrip(self, tmp_path, rng):
        seq = FrameSequence(rng.uniform(0, 255, (2, 1, 8, 8)).astype(np.float32), start_hour=42)
        path = str(tmp_path / 'seq.fseq')
        write_fseq(seq, path)
        loaded = read_fseq(path)
        np.testing.assert_array_equal(loaded.frames, seq.frames)
        np.testing.assert_array_equal(loaded.hours, seq.hours)

    def test_gapped_roundtrip(self, tmp_path, rng):
        seq = FrameSequence(rng.uniform(0, 255, (3, 1, 4, 4)).astype(np.float32), hours=[3, 4, 9])
        path = str(tmp_path / 'seq.fseq')
        write_fseq(seq, path)
        loaded = read_fseq(path)
        assert loaded.hours.tolist() == [3, 4, 9]
        np.testing.assert_array_equal(loaded.frames, seq.frames)

    def test_header_layout(self, tmp_path):
        path = str(tmp_path / 'seq.fseq')
        write_frames(np.zeros((2, 3, 5)), path, start_hour=-7)
        data = open(path, 'rb').read()
        assert data[:4] == b'FSEQ'
        assert int.from_bytes(data[4:6], 'little') == 1
        assert int.from_bytes(data[6:10], 'little') == 2
        assert int.from_bytes(data[10:14], 'little') == 3
        assert int.from_bytes(data[14:18], 'little') == 5
        assert int.from_bytes(data[18:26], 'little', signed=True) == -7
        assert len(data) == 26 + 2 * 3 * 5 * 4

    def test_bad_magic(self):
        with pytest.raises(FormatError) as err:
            parse_frames(b'XXXX' + bytes(22))
        assert err.value.offset == 0

    def test_truncated_payload(self, tmp_path):
        path = str(tmp_path / 'seq.fseq')
        write_frames(np.ones((3, 4, 4)), path)
        data = open(path, 'rb').read()[:26 + 2 * 64]
        with pytest.raises(FormatError) as err:
            parse_frames(data)
        assert err.value.offset == len(data)
        assert '2 are present' in str(err.value)

    def test_shape_overflow(self):
        header = b'FSEQ' + (1).to_bytes(2, 'little') + (2 ** 32 - 1).to_bytes(4, 'little') * 3 + bytes(8)
        with pytest.raises(FormatError) as err:
            parse_frames(header)
        assert err.value.offset == 6

    def test_unsupported_version(self):
        with pytest.raises(FormatError) as err:
            parse_frames(b'FSEQ' + (7).to_bytes(2, 'little') + bytes(20))
        assert err.value.offset == 4

    def test_unrestricted_frames(self, tmp_path, rng):
        values = rng.normal(size=(4, 2, 2)).astype(np.float32)
        path = str(tmp_path / 'x.fseq')
        write_frames(values, path)
        loaded, hours = read_frames(path)
        np.testing.assert_array_equal(loaded, values)
        assert hours.tolist() == [0, 1, 2, 3]


# ---------------------------------------------------------------------------------------------------------------------
# PNG export

def test_gray8_rounds_and_clamps():
    values = to_gray8(np.array([[[-3.0, 0.4, 0.6, 254.5, 300.0]]]))
    assert values.dtype == np.uint8
    assert values.tolist() == [[0, 0, 1, 254, 255]]


def test_write_png(tmp_path):
    frame = np.linspace(0, 255, 16).reshape(1, 4, 4)
    path = str(tmp_path / 'png' / 'frame.png')
    write_png(frame, path)
    assert os.path.exists(path)
    with Image.open(path) as image:
        assert image.mode == 'L'
        np.testing.assert_array_equal(np.asarray(image), to_gray8(frame))
