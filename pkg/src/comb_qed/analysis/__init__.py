from .lm import FitResult, fit_least_squares
from .fits import damped_sinusoid, fit_comb_spectrum, fit_damped_sinusoid, fit_gaussian, gaussian
from .revivals import RevivalReport, extract_revivals, predict_revival_time
from .overlap import overlap_sensitivity, spectral_overlap

__all__ = [
    "FitResult", "fit_least_squares", "damped_sinusoid", "fit_damped_sinusoid", "gaussian",
    "fit_gaussian", "fit_comb_spectrum", "RevivalReport", "extract_revivals",
    "predict_revival_time", "spectral_overlap", "overlap_sensitivity",
]
