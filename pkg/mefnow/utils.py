import os
import json

import numpy as np
import pandas as pd


def make_folder(folder):
    if folder and not os.path.exists(folder):
        os.makedirs(folder)


def write_csv_(df, file_path, renaming=None, write_index=False, float_format='%.10g'):
    """Write a table with fixed float formatting so that reruns produce identical bytes."""
    df1 = df.copy()
    if renaming is not None:
        df1.rename(renaming, axis=1, inplace=True)
    make_folder(os.path.dirname(file_path))
    df1.to_csv(file_path, index=write_index, float_format=float_format, lineterminator='\n')


def read_csv_(file_path):
    return pd.read_csv(file_path)


def write_json(dc, file_path):
    make_folder(os.path.dirname(file_path))
    with open(file_path, 'w') as fh:
        fh.write(json.dumps(dc, indent=2, sort_keys=True, default=_json_default) + '\n')


def read_json(file_path):
    with open(file_path, 'r') as fh:
        return json.load(fh)


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError('Object of type ' + type(value).__name__ + ' is not JSON serialisable')
