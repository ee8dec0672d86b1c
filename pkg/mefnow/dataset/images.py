import os

import numpy as np
from PIL import Image

from .frames import MAX_VALUE


def to_gray8(frame):
    """8-bit grayscale values ``round(clamp(v, 0, 255))`` from a ``[H, W]`` or ``[1, H, W]`` frame."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim == 3:
        frame = frame[0]
    return np.round(np.clip(frame, 0.0, MAX_VALUE)).astype(np.uint8)


def write_png(frame, file_path):
    folder = os.path.dirname(file_path)
    if folder and not os.path.exists(folder):
        os.makedirs(folder)
    Image.fromarray(to_gray8(frame), mode='L').save(file_path, format='PNG')
