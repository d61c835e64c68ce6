from .metrics import MetricsReport, click_to_photon, ssim, stutter_rate
from .pipeline import run_scenario
from .report import emit_report

__all__ = [
    "MetricsReport",
    "click_to_photon",
    "emit_report",
    "run_scenario",
    "ssim",
    "stutter_rate",
]
