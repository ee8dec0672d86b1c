import numpy as np
import pandas as pd

from ..errors import ConfigurationError
from ..dataset.frames import denormalise, normalise
from ..extrapolation.pyramid import predict_level
from ..grid import ops
from .metrics import MetricsConfig, pixel_metrics, ssim

METHODS = ['persistence', 'flow', 'tiled', 'single_scale', 'mef']
REPORT_COLUMNS = ['method', 'lead_hours', 'MAE', 'RMSE', 'PSNR_dB', 'SSIM', 'n_windows']
CASE_COLUMNS = ['window', 'start_hour', 'method', 'lead_hours', 'MAE', 'RMSE', 'PSNR_dB', 'SSIM']


def _frames(window):
    return np.asarray(getattr(window, 'frames', window), dtype=np.float64)


def evaluate_all(windows, methods, forecasters, cfg=None, input_len=6):
    """
    Compare forecasting methods over test windows.

    Args:
        windows (list): Test windows (``FrameSequence`` or ``[length, 1, S, S]`` arrays) in ``[0, 255]``.
        methods (list of str): Methods to evaluate, in report order.
        forecasters (dict): Callable per method mapping input frames ``[input_len, 1, S, S]`` in ``[0, 255]`` to
            predictions for leads 1 and 2 in ``[0, 255]``. Called as ``forecaster(inputs, window=index)`` so that
            stochastic methods can seed per window.
        cfg (MetricsConfig): Metric settings.
        input_len (int): Number of input frames per window.

    Returns:
        tuple: Averaged report (``method``, ``lead_hours``, ``MAE``, ``RMSE``, ``PSNR_dB``, ``SSIM``, ``n_windows``)
        and a per-window table with the same metrics.

    """
    cfg = MetricsConfig() if cfg is None else cfg
    missing = [method for method in methods if method not in forecasters]
    if missing:
        raise ConfigurationError('No forecaster available for method(s): ' + ', '.join(missing))

    cases = []
    for index, window in enumerate(windows):
        frames = _frames(window)
        inputs, targets = frames[:input_len], frames[input_len:]
        hour = int(window.hours[0]) if hasattr(window, 'hours') else index
        for method in methods:
            predictions = forecasters[method](inputs, window=index)
            for lead, (prediction, target) in enumerate(zip(predictions, targets), start=1):
                prediction = np.clip(prediction, 0.0, cfg.max_i)
                mae, rmse, psnr = pixel_metrics(target, prediction, cfg)
                cases.append(dict(
                    window=index, start_hour=hour, method=method, lead_hours=lead, MAE=mae, RMSE=rmse,
                    PSNR_dB=psnr, SSIM=ssim(target, prediction, cfg),
                ))
    cases = pd.DataFrame(cases, columns=CASE_COLUMNS)
    return summarise(cases, methods), cases


def summarise(cases, methods):
    """Average per-window metrics by method and lead time."""
    rows = []
    for method in methods:
        for lead in sorted(cases['lead_hours'].unique()):
            df = cases.loc[(cases['method'] == method) & (cases['lead_hours'] == lead)]
            rows.append(dict(
                method=method, lead_hours=int(lead), MAE=df['MAE'].mean(), RMSE=df['RMSE'].mean(),
                PSNR_dB=df['PSNR_dB'].mean(), SSIM=df['SSIM'].mean(), n_windows=df.shape[0],
            ))
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def seam_jump(frame, tile):
    """
    Intensity jumps across the tile seams of a frame.

    Returns:
        tuple: Maximum and mean absolute difference between the pixel pairs straddling every internal tile boundary.

    """
    frame = np.asarray(frame, dtype=np.float64)
    frame = frame.reshape(frame.shape[-2:])
    height, width = frame.shape
    if height % tile or width % tile:
        raise ValueError('Frame of size ' + str(frame.shape) + ' is not a whole number of ' + str(tile) + ' tiles')
    jumps = []
    for col in range(tile, width, tile):
        jumps.append(np.abs(frame[:, col] - frame[:, col - 1]))
    for row in range(tile, height, tile):
        jumps.append(np.abs(frame[row, :] - frame[row - 1, :]))
    if not jumps:
        return 0.0, 0.0
    jumps = np.concatenate(jumps)
    return float(jumps.max()), float(jumps.mean())


def seam_report(windows, forecasters, tile, methods=('tiled', 'mef'), input_len=6):
    """
    Seam jumps of each method's predictions averaged over test windows.

    A ``ratio`` column gives each method's mean maximum jump relative to the first method's at the same lead time.

    """
    methods = [method for method in methods if method in forecasters]
    jumps = {(method, lead): [] for method in methods for lead in (1, 2)}
    for index, window in enumerate(windows):
        inputs = _frames(window)[:input_len]
        for method in methods:
            for lead, prediction in enumerate(forecasters[method](inputs, window=index), start=1):
                jumps[(method, lead)].append(seam_jump(prediction, tile))

    rows = []
    for (method, lead), values in jumps.items():
        values = np.array(values).reshape(-1, 2)
        rows.append(dict(method=method, lead_hours=lead, max_jump=values[:, 0].mean(), mean_jump=values[:, 1].mean()))
    df = pd.DataFrame(rows, columns=['method', 'lead_hours', 'max_jump', 'mean_jump'])
    if methods:
        reference = df.loc[df['method'] == methods[0]].set_index('lead_hours')['max_jump']
        denominator = df['lead_hours'].map(reference)
        df['ratio'] = np.where(denominator > 0, df['max_jump'] / denominator.where(denominator > 0, 1.0), np.nan)
    return df


def compare_position_strategies(windows, shared_model, position_models, spec, level, input_len=6):
    """
    Shared-model versus per-position prediction at one pyramid level.

    Targets are the test frames pooled to the level's size; errors are in the ``[0, 255]`` domain and pooled over
    both lead times.

    Returns:
        pandas.DataFrame: Two rows (``shared``, ``per_position``) with ``MAE`` and ``MSE``.

    """
    strategies = [('shared', shared_model), ('per_position', position_models)]
    rows = []
    for name, model in strategies:
        abs_errors = []
        sq_errors = []
        for window in windows:
            frames = normalise(_frames(window))
            first, second, _ = predict_level(frames[:input_len], model, spec, level)
            targets = frames[input_len:]
            for _ in range(level):
                targets = ops.pool_avg2(targets)
            for prediction, target in zip([first, second], targets):
                diff = denormalise(prediction) - denormalise(target)
                abs_errors.append(np.mean(np.abs(diff)))
                sq_errors.append(np.mean(diff * diff))
        rows.append(dict(strategy=name, MAE=float(np.mean(abs_errors)), MSE=float(np.mean(sq_errors))))
    return pd.DataFrame(rows, columns=['strategy', 'MAE', 'MSE'])
