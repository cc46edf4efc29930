from .checks import concavity_check, gradcheck, second_differences
from .drift import DriftReport, drift_check, drift_constants, lyapunov
from .prediction import prediction_error, predictive_labels
from .thme import ChainConfig, ThmeScan, quadratic_fit, sample_posterior, thme, thme_estimate, thme_scan
