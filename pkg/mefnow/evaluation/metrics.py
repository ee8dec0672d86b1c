import dataclasses

import numpy as np
import scipy.ndimage


@dataclasses.dataclass(frozen=True)
class MetricsConfig:
    """
    Image-quality metric settings.

    Args:
        max_i (float): Peak gray value. Default 255.
        k1 (float): SSIM luminance constant factor, ``c1 = (k1 * max_i)**2``.
        k2 (float): SSIM contrast constant factor, ``c2 = (k2 * max_i)**2``.
        window_size (int): SSIM Gaussian window size.
        sigma (float): SSIM Gaussian window standard deviation.

    """
    max_i: float = 255.0
    k1: float = 0.01
    k2: float = 0.03
    window_size: int = 11
    sigma: float = 1.5

    def __post_init__(self):
        if self.max_i <= 0:
            raise ValueError('MAX_I must be positive')
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError('SSIM constants must be positive')

    @property
    def c1(self):
        return (self.k1 * self.max_i) ** 2

    @property
    def c2(self):
        return (self.k2 * self.max_i) ** 2


def _as_image(x):
    x = np.asarray(x, dtype=np.float64)
    while x.ndim > 2 and x.shape[0] == 1:
        x = x[0]
    return x


def psnr_from_rmse(rmse, max_i=255.0):
    """Peak signal-to-noise ratio in dB; ``inf`` when ``rmse`` is zero."""
    if rmse == 0:
        return np.inf
    return 20.0 * np.log10(max_i) - 20.0 * np.log10(rmse)


def pixel_metrics(i, k, cfg=None):
    """
    Mean absolute error, root mean squared error and PSNR between two images.

    Returns:
        tuple: ``(MAE, RMSE, PSNR)``, with PSNR reported as ``inf`` for identical images.

    """
    cfg = MetricsConfig() if cfg is None else cfg
    i, k = _as_image(i), _as_image(k)
    if i.shape != k.shape:
        raise ValueError('Shape mismatch: ' + str(i.shape) + ' and ' + str(k.shape))
    diff = i - k
    mae = float(np.mean(np.abs(diff)))
    rmse = float(np.sqrt(np.mean(diff * diff)))
    return mae, rmse, psnr_from_rmse(rmse, cfg.max_i)


def gaussian_window(size, sigma):
    offsets = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-offsets * offsets / (2.0 * sigma * sigma))
    window = np.outer(g, g)
    return window / window.sum()


def ssim(x, y, cfg=None):
    """
    Mean structural similarity over all fully contained Gaussian windows.

    Images smaller than the window are compared globally instead.

    """
    cfg = MetricsConfig() if cfg is None else cfg
    x, y = _as_image(x), _as_image(y)
    if x.shape != y.shape:
        raise ValueError('Shape mismatch: ' + str(x.shape) + ' and ' + str(y.shape))
    c1, c2 = cfg.c1, cfg.c2

    if min(x.shape) < cfg.window_size:
        mu_x, mu_y = x.mean(), y.mean()
        var_x = np.mean(x * x) - mu_x * mu_x
        var_y = np.mean(y * y) - mu_y * mu_y
        cov_xy = np.mean(x * y) - mu_x * mu_y
    else:
        window = gaussian_window(cfg.window_size, cfg.sigma)
        r = cfg.window_size // 2
        valid = (slice(r, x.shape[0] - r), slice(r, x.shape[1] - r))

        def local_mean(a):
            return scipy.ndimage.correlate(a, window, mode='constant')[valid]

        mu_x, mu_y = local_mean(x), local_mean(y)
        var_x = local_mean(x * x) - mu_x * mu_x
        var_y = local_mean(y * y) - mu_y * mu_y
        cov_xy = local_mean(x * y) - mu_x * mu_y

    numerator = (2.0 * mu_x * mu_y + c1) * (2.0 * cov_xy + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(numerator / denominator))
