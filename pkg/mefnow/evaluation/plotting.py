import os

import numpy as np
from PIL import Image, ImageDraw
from bokeh.plotting import figure
from bokeh.models import ColumnDataSource
from bokeh.layouts import gridplot

from ..dataset.images import to_gray8

COLOURS = ['#1b9e77', '#d95f02', '#7570b3', '#e7298a']

GAP = 4
LABEL_HEIGHT = 14


def render_panel(inputs, targets, predictions, file_path):
    """
    Write one case as a grayscale PNG panel.

    The first row holds the input frames, the second row the observed frames at each lead time and each further row
    one method's predictions at the same lead times. Rows are labelled on their first cell.

    Args:
        inputs (numpy.ndarray): Input frames ``[T, 1, S, S]`` in ``[0, 255]``.
        targets (numpy.ndarray): Observed frames ``[2, 1, S, S]``.
        predictions (dict): Predicted frames per method, each a pair of ``[1, S, S]`` arrays.
        file_path (str): Output ``.png`` path.

    """
    rows = [('inputs', list(inputs)), ('observed', list(targets))]
    rows += [(method, list(frames)) for method, frames in predictions.items()]
    size = np.asarray(inputs[0]).shape[-1]
    n_cols = max(len(frames) for _, frames in rows)
    width = n_cols * size + (n_cols + 1) * GAP
    height = len(rows) * (size + LABEL_HEIGHT) + (len(rows) + 1) * GAP

    panel = Image.new('L', (width, height), color=255)
    draw = ImageDraw.Draw(panel)
    for i, (label, frames) in enumerate(rows):
        top = GAP + i * (size + LABEL_HEIGHT + GAP)
        draw.text((GAP, top), label, fill=0)
        for j, frame in enumerate(frames):
            left = GAP + j * (size + GAP)
            panel.paste(Image.fromarray(to_gray8(frame), mode='L'), (left, top + LABEL_HEIGHT))

    folder = os.path.dirname(file_path)
    if folder and not os.path.exists(folder):
        os.makedirs(folder)
    panel.save(file_path, format='PNG')


def plot_training_history(df, columns, title, x='step'):
    """Line plot of training-log columns against ``x``."""
    p = figure(title=title, width=450, height=300)
    p.xaxis.axis_label = x.replace('_', ' ').capitalize()
    p.yaxis.axis_label = 'Loss'
    source = ColumnDataSource(df)
    for column, colour in zip(columns, COLOURS):
        p.line(x=x, y=column, source=source, legend_label=column, color=colour)
    p.legend.location = 'top_right'
    p.legend.background_fill_alpha = 0.2
    return p


def construct_gridplot(plots, n_cols=2):
    rows = [plots[i:i + n_cols] for i in range(0, len(plots), n_cols)]
    return gridplot(rows)
