from .metrics import MetricsConfig, pixel_metrics, psnr_from_rmse, ssim
from .baselines import persistence_forecast, optical_flow_forecast, estimate_flow
from .harness import METHODS, evaluate_all, seam_jump, seam_report, compare_position_strategies
