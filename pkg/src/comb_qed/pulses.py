"""Drive envelopes and their spectra."""
from __future__ import annotations

import functools
import math

import numpy as np
from scipy.optimize import brentq

from .model import RAD_PER_NS, PulseSpec

#: measured 2-sigma width (MHz) of the excitation pulse power spectrum
PULSE_TWO_SIGMA_F = 80.4

#: Gaussian pulses are cut at +-3 sigma unless asked otherwise
DEFAULT_N_SIGMA = 3.0


def pulse_envelope(pulse: PulseSpec, t):
    """Drive amplitude at time(s) ``t`` (ns) in units of kappa_load; zero outside the window."""
    t = np.asarray(t, dtype=float)
    inside = (t >= pulse.start) & (t <= pulse.end)
    if pulse.shape == "rectangular":
        env = np.full(t.shape, pulse.eta_peak)
    else:
        env = pulse.eta_peak * np.exp(-((t - pulse.center) ** 2) / (2.0 * pulse.sigma ** 2))
    out = np.where(inside, env, 0.0)
    return float(out) if out.ndim == 0 else out


def pulse_spectrum(pulse: PulseSpec, detuning, n_time=2001):
    """Fourier transform of the envelope at ``detuning`` (MHz from the carrier).

    F(f) = integral eta(t) exp(-i 2pi f t) dt with t in ns, so F carries
    units of kappa_load * ns.  Evaluated by trapezoidal quadrature.
    """
    f = np.atleast_1d(np.asarray(detuning, dtype=float))
    t = np.linspace(pulse.start, pulse.end, n_time)
    env = pulse_envelope(pulse, t)
    w = np.full(n_time, t[1] - t[0])
    w[0] = w[-1] = 0.5 * (t[1] - t[0])
    weighted = env * w
    out = np.empty(f.shape, dtype=complex)
    chunk = 512
    for i in range(0, f.size, chunk):
        phase = np.exp(-1j * RAD_PER_NS * np.outer(f[i:i + chunk], t - pulse.center))
        out[i:i + chunk] = phase @ weighted
    return out if np.ndim(detuning) else out[0]


def pulse_power_spectrum(pulse: PulseSpec, detuning):
    return np.abs(pulse_spectrum(pulse, detuning)) ** 2


def fit_pulse_bandwidth(pulse: PulseSpec, span=250.0, n_points=1001):
    """Gaussian fit of the power spectrum over +-``span`` MHz around the carrier."""
    from .analysis.fits import fit_gaussian

    f = np.linspace(-span, span, n_points)
    return fit_gaussian(f, pulse_power_spectrum(pulse, f))


def gaussian_with_bandwidth(two_sigma_f: float, eta_peak: float, carrier: float,
                            start: float = 0.0, n_sigma: float = DEFAULT_N_SIGMA) -> PulseSpec:
    """Gaussian pulse, cut at +-``n_sigma``, whose power spectrum fits to 2 sigma = ``two_sigma_f``."""
    sigma = _calibrated_sigma(float(two_sigma_f), float(n_sigma))
    return PulseSpec(eta_peak=eta_peak, duration=2 * n_sigma * sigma, carrier=carrier,
                     shape="gaussian", sigma=sigma, start=start)


@functools.lru_cache(maxsize=32)
def _calibrated_sigma(two_sigma_f, n_sigma):
    def mismatch(sigma):
        p = PulseSpec(eta_peak=1.0, duration=2 * n_sigma * sigma, carrier=0.0, sigma=sigma)
        return fit_pulse_bandwidth(p, span=3 * two_sigma_f).extra["two_sigma"] - two_sigma_f

    # untruncated estimate: power spectrum sigma_f = 1 / (2 pi sqrt(2) sigma_t)
    guess = 1e3 / (2 * math.pi * math.sqrt(2) * 0.5 * two_sigma_f)
    return brentq(mismatch, 0.3 * guess, 3.0 * guess, xtol=1e-10)


def default_pulse(eta_peak: float = 2.5, carrier: float = 5878.0, start: float = 0.0) -> PulseSpec:
    """The short excitation pulse: Gaussian with a 2 sigma = 80.4 MHz power spectrum."""
    return gaussian_with_bandwidth(PULSE_TWO_SIGMA_F, eta_peak, carrier, start=start)
