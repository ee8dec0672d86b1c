import dataclasses

import numpy as np

from ..errors import ConfigurationError
from ..grid import ops
from .convlstm import rollout2

LEADS = (1, 2)


@dataclasses.dataclass(frozen=True)
class PyramidSpec:
    """
    Multi-scale tiling layout.

    Args:
        base_size (int): Full-resolution image size S.
        tile (int): Predictor input size T.
        levels (int): Number of levels L, with ``S / 2**(L - 1) == T``. Level 0 is full resolution.

    """
    base_size: int = 256
    tile: int = 64
    levels: int = 3

    def __post_init__(self):
        if self.base_size < 1 or self.tile < 1 or self.levels < 1:
            raise ValueError('Pyramid sizes and level count must be positive')
        if self.base_size % self.tile:
            raise ValueError(
                'Base size ' + str(self.base_size) + ' is not divisible by tile size ' + str(self.tile)
            )
        if self.tile * 2 ** (self.levels - 1) != self.base_size:
            raise ValueError(
                'Base size ' + str(self.base_size) + ' with ' + str(self.levels) + ' levels does not reduce to tile '
                + 'size ' + str(self.tile)
            )

    @classmethod
    def from_sizes(cls, base_size, tile):
        levels = 1
        while tile * 2 ** (levels - 1) < base_size:
            levels += 1
        return cls(base_size, tile, levels)

    def level_size(self, level):
        self._check_level(level)
        return self.base_size // 2 ** level

    def level_layout(self, level):
        n = self.level_size(level) // self.tile
        return TileLayout(n, n, self.tile)

    def n_tiles(self, level):
        return self.level_layout(level).n_tiles

    def _check_level(self, level):
        if not 0 <= level < self.levels:
            raise ValueError('Level ' + str(level) + ' is outside 0..' + str(self.levels - 1))


@dataclasses.dataclass(frozen=True)
class TileLayout:
    """Row-major grid of ``rows x cols`` square tiles."""
    rows: int
    cols: int
    tile: int

    @property
    def n_tiles(self):
        return self.rows * self.cols

    @property
    def positions(self):
        return [(row, col) for row in range(self.rows) for col in range(self.cols)]


@dataclasses.dataclass
class PyramidPrediction:
    """
    Per-level predictions of one input sequence.

    ``frames[lead][level]`` is the ``[1, S / 2**level, S / 2**level]`` prediction for lead time ``lead`` (hours).

    """
    frames: dict
    spec: PyramidSpec
    layouts: list


def build_pyramid(frame, spec):
    """
    Down-sample a frame (or a stack of frames along leading axes) through every level by repeated 2x2 averaging.

    Level 0 is the input itself.

    """
    frame = np.asarray(frame)
    if frame.shape[-2:] != (spec.base_size, spec.base_size):
        raise ValueError(
            'Frame size ' + str(frame.shape[-2:]) + ' does not match the pyramid base size ' + str(spec.base_size)
        )
    levels = [frame]
    for _ in range(1, spec.levels):
        levels.append(ops.pool_avg2(levels[-1]))
    return levels


def split_blocks(frame, tile):
    """
    Split the last two axes into disjoint ``tile x tile`` blocks in row-major order.

    Returns:
        tuple: ``TileLayout`` and an array of blocks with the tile index as a new first axis.

    """
    frame = np.asarray(frame)
    height, width = frame.shape[-2:]
    if height % tile or width % tile:
        raise ValueError(
            'Frame of size ' + str(height) + 'x' + str(width) + ' cannot be split into ' + str(tile) + 'x' + str(tile)
            + ' tiles'
        )
    layout = TileLayout(height // tile, width // tile, tile)
    lead = frame.shape[:-2]
    blocks = frame.reshape(lead + (layout.rows, tile, layout.cols, tile))
    n_lead = len(lead)
    blocks = np.moveaxis(blocks, [n_lead, n_lead + 2], [0, 1])
    return layout, blocks.reshape((layout.n_tiles,) + lead + (tile, tile)).copy()


def stitch_blocks(layout, blocks):
    """Place blocks back onto the grid described by ``layout`` (no blending or overlap)."""
    blocks = np.asarray(blocks)
    if blocks.shape[0] != layout.n_tiles:
        raise ValueError('Expected ' + str(layout.n_tiles) + ' blocks, got ' + str(blocks.shape[0]))
    if blocks.shape[-2:] != (layout.tile, layout.tile):
        raise ValueError(
            'Blocks of size ' + str(blocks.shape[-2:]) + ' do not match the layout tile size ' + str(layout.tile)
        )
    lead = blocks.shape[1:-2]
    n_lead = len(lead)
    grid = blocks.reshape((layout.rows, layout.cols) + lead + (layout.tile, layout.tile))
    grid = np.moveaxis(grid, [0, 1], [n_lead, n_lead + 2])
    return grid.reshape(lead + (layout.rows * layout.tile, layout.cols * layout.tile))


def predict_level(inputs, model, spec, level):
    """
    Two-hour rollouts at one pyramid level.

    ``inputs`` are full-resolution frames ``[T, 1, S, S]`` in ``[0, 1]``. ``model`` is either one shared
    ``ConvLSTMStack`` (all tiles predicted in a single batch) or a list with one model per grid position.

    Returns:
        tuple: Stitched ``[1, s, s]`` predictions for leads 1 and 2, and the ``TileLayout`` used.

    """
    frames = np.asarray(inputs)
    for _ in range(level):
        frames = ops.pool_avg2(frames)
    dtype = _model_dtype(model)
    frames = frames.astype(dtype)

    if frames.shape[-1] == spec.tile:
        layout = TileLayout(1, 1, spec.tile)
        single = model[0] if isinstance(model, (list, tuple)) else model
        first, second = rollout2(list(frames), single)
        return first, second, layout

    layout, blocks = split_blocks(frames, spec.tile)  # [P, T, 1, tile, tile]
    if isinstance(model, (list, tuple)):
        if len(model) != layout.n_tiles:
            raise ConfigurationError(
                'Level ' + str(level) + ' needs ' + str(layout.n_tiles) + ' per-position models, got ' + str(len(model))
            )
        outputs = [rollout2(list(blocks[p]), model[p]) for p in range(layout.n_tiles)]
        first = np.stack([out[0] for out in outputs])
        second = np.stack([out[1] for out in outputs])
    else:
        # Tiles form the batch axis: [T, P, 1, tile, tile]
        first, second = rollout2(list(np.moveaxis(blocks, 0, 1)), model)
    return stitch_blocks(layout, first), stitch_blocks(layout, second), layout


def predict_multiscale(inputs, models, spec):
    """
    Phase-1 prediction at every pyramid level.

    For each level the inputs are down-sampled, split into tiles and every tile sequence is rolled out two hours with
    the level's model; the tile predictions are then stitched back together. The coarsest level is a single tile and
    bypasses splitting.

    Args:
        inputs (numpy.ndarray): Full-resolution input frames ``[T, 1, S, S]`` in ``[0, 1]``.
        models (list): One entry per level: a shared ``ConvLSTMStack`` or a list of per-position models.
        spec (PyramidSpec): Pyramid layout.

    Returns:
        PyramidPrediction

    """
    inputs = np.asarray(inputs)
    if inputs.shape[-2:] != (spec.base_size, spec.base_size):
        raise ValueError(
            'Input size ' + str(inputs.shape[-2:]) + ' does not match the pyramid base size ' + str(spec.base_size)
        )
    missing = [level for level in range(spec.levels) if level >= len(models) or models[level] is None]
    if missing:
        raise ConfigurationError('No phase-1 checkpoint for pyramid level(s) ' + ', '.join(str(m) for m in missing))

    frames = {lead: [] for lead in LEADS}
    layouts = []
    for level in range(spec.levels):
        first, second, layout = predict_level(inputs, models[level], spec, level)
        frames[1].append(first)
        frames[2].append(second)
        layouts.append(layout)
    return PyramidPrediction(frames=frames, spec=spec, layouts=layouts)


def fusion_input(pred, lead, noise=True, seed=0, levels=None):
    """
    Conditioning stack for the fusion generator.

    Each selected level's prediction for ``lead`` is bilinearly upsampled to full resolution and stacked as a channel,
    finest level first. With ``noise`` on, one channel of unit-Gaussian values is appended.

    Args:
        pred (PyramidPrediction): Phase-1 predictions.
        lead (int): Lead time in hours (1 or 2).
        noise (bool): Append a noise channel.
        seed (int or numpy.random.SeedSequence): Seed for the noise channel.
        levels (list of int): Levels to include. Defaults to all levels.

    Returns:
        numpy.ndarray: ``[n_levels (+1), S, S]`` stack.

    """
    if lead not in pred.frames:
        raise ValueError('Lead time must be one of ' + str(LEADS) + ', got ' + str(lead))
    spec = pred.spec
    levels = list(range(spec.levels)) if levels is None else list(levels)
    channels = []
    for level in levels:
        frame = np.asarray(pred.frames[lead][level], dtype=np.float64)
        channels.append(ops.upsample(frame, 2 ** level, mode='bilinear')[0])
    if noise:
        rng = np.random.default_rng(seed)
        channels.append(rng.standard_normal((spec.base_size, spec.base_size)))
    return np.stack(channels)


class TileWindows:
    """
    Training windows of one pyramid level, gathered lazily.

    The level's tiles of every frame are held once; a window is a (start frame, tile) pair. Indexing with an integer
    array returns a ``[B, length, 1, tile, tile]`` batch, which is the interface ``train_predictor()`` consumes.

    """

    def __init__(self, frames, spec, level, starts, length=8, positions=None):
        frames = np.asarray(frames)
        for _ in range(level):
            frames = ops.pool_avg2(frames)
        if frames.shape[-1] == spec.tile:
            tiles = frames[np.newaxis]
        else:
            _, tiles = split_blocks(frames, spec.tile)
        if positions is not None:
            tiles = tiles[list(positions)]
        self.tiles = tiles  # [P, n_frames, 1, tile, tile]
        self.starts = np.asarray(starts, dtype=np.int64)
        self.length = length

    def __len__(self):
        return len(self.starts) * self.tiles.shape[0]

    def __getitem__(self, index):
        index = np.asarray(index)
        window = index // self.tiles.shape[0]
        position = index % self.tiles.shape[0]
        offsets = self.starts[window][..., np.newaxis] + np.arange(self.length)
        return self.tiles[position[..., np.newaxis], offsets]


def _model_dtype(model):
    if isinstance(model, (list, tuple)):
        model = model[0]
    return model.dtype
