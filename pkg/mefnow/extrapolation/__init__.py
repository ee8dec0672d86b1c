from .convlstm import ConvLSTMStack, ConvLSTMCellParams, CellState, GateActivations, cell_step, forward_next, rollout2
from .training import PredictorHyper, train_predictor
from .pyramid import (
    PyramidSpec, TileLayout, PyramidPrediction, build_pyramid, split_blocks, stitch_blocks, predict_multiscale,
    fusion_input,
)
from .model import ExtrapolationModel
