"""
FSEQ frame-sequence files.

Layout (little-endian)::

    b'FSEQ' | version u16 | frame count u32 | height u32 | width u32 | start hour i64
    frames as f32, row-major, frame-major
    version 2 only: hour index of every frame as i64

Version 1 is written for contiguous sequences and version 2 for sequences with missing hours.

"""
import os
import struct
import sys

import numpy as np

from ..errors import FormatError
from .frames import FrameSequence

MAGIC = b'FSEQ'
CONTIGUOUS_VERSION = 1
GAPPED_VERSION = 2
_HEADER = struct.Struct('<4sHIIIq')


def write_fseq(seq, file_path):
    """Write a ``FrameSequence``. Values are stored as 32-bit floats."""
    hours = None if seq.is_contiguous else seq.hours
    write_frames(seq.frames[:, 0], file_path, start_hour=seq.start_hour, hours=hours)


def read_fseq(file_path):
    frames, hours = read_frames(file_path)
    return FrameSequence(frames[:, np.newaxis], hours)


def write_frames(frames, file_path, start_hour=0, hours=None):
    """
    Write a ``[T, H, W]`` array of frames with no value-range restriction.

    Used directly for arrays that are not images in ``[0, 255]``, such as fusion conditioning stacks.

    """
    frames = np.asarray(frames)
    if frames.ndim != 3:
        raise ValueError('Frames must have shape [T, H, W], got ' + str(frames.shape))
    n_frames, height, width = frames.shape
    version = CONTIGUOUS_VERSION if hours is None else GAPPED_VERSION
    chunks = [
        _HEADER.pack(MAGIC, version, n_frames, height, width, int(start_hour)),
        np.ascontiguousarray(frames, dtype='<f4').tobytes(),
    ]
    if hours is not None:
        chunks.append(np.asarray(hours, dtype='<i8').tobytes())

    folder = os.path.dirname(file_path)
    if folder and not os.path.exists(folder):
        os.makedirs(folder)
    with open(file_path, 'wb') as fh:
        fh.write(b''.join(chunks))


def read_frames(file_path):
    """Read frames and hour indices, returning a ``[T, H, W]`` float32 array and an int64 array."""
    with open(file_path, 'rb') as fh:
        data = fh.read()
    return parse_frames(data)


def parse_frames(data):
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError('Bad magic ' + repr(bytes(data[:4])) + ', expected ' + repr(MAGIC), 0)
    if len(data) < _HEADER.size:
        raise FormatError('Truncated FSEQ header', len(data))
    _, version, n_frames, height, width, start_hour = _HEADER.unpack_from(data, 0)
    if version not in (CONTIGUOUS_VERSION, GAPPED_VERSION):
        raise FormatError('Unsupported FSEQ version ' + str(version), 4)

    n_values = n_frames * height * width
    if n_values * 4 > sys.maxsize:
        raise FormatError('Declared shape ' + str((n_frames, height, width)) + ' overflows', 6)
    payload_end = _HEADER.size + 4 * n_values
    if len(data) < payload_end:
        frame_bytes = 4 * height * width
        complete = (len(data) - _HEADER.size) // frame_bytes if frame_bytes else 0
        raise FormatError(
            'Truncated payload: header declares ' + str(n_frames) + ' frames but only ' + str(complete)
            + ' are present', len(data)
        )
    frames = np.frombuffer(data[_HEADER.size:payload_end], dtype='<f4')
    frames = frames.astype(np.float32).reshape(n_frames, height, width)

    if version == GAPPED_VERSION:
        table_end = payload_end + 8 * n_frames
        if len(data) < table_end:
            raise FormatError('Truncated hour table', len(data))
        hours = np.frombuffer(data[payload_end:table_end], dtype='<i8').astype(np.int64)
        end = table_end
    else:
        hours = np.arange(start_hour, start_hour + n_frames, dtype=np.int64)
        end = payload_end
    if len(data) != end:
        raise FormatError('Unexpected trailing bytes', end)
    return frames, hours
