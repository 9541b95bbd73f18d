"""Fraction of a pulse's power that falls inside a comb's transmission."""
from __future__ import annotations

import warnings

import numpy as np
from scipy.integrate import trapezoid

from ..model import PulseSpec
from ..pulses import pulse_envelope, pulse_power_spectrum

#: below this fraction of the pulse energy on the grid the supports count as disjoint
DISJOINT_FRACTION = 1e-6


def pulse_energy(pulse: PulseSpec, n_time=4001):
    """Integral of |pulse spectrum|^2 over all frequencies (MHz), via Parseval."""
    t = np.linspace(pulse.start, pulse.end, n_time)
    return 1e3 * trapezoid(pulse_envelope(pulse, t) ** 2, t)


def spectral_overlap(pulse: PulseSpec, comb_spectrum, normalization="peak") -> float:
    """Integral of P(w) T(w) over the integral of P(w), on the spectrum's own grid.

    P is the pulse power spectrum centred on its carrier; T is the comb power
    transmission scaled to unit peak (``normalization='peak'``) or taken as
    given (``'none'``, values must already lie in [0, 1]).
    """
    freqs = np.asarray(comb_spectrum.freqs, dtype=float)
    power = np.asarray(comb_spectrum.power, dtype=float)
    if normalization == "peak":
        peak = power.max()
        transfer = power / peak if peak > 0 else np.zeros_like(power)
    elif normalization == "none":
        transfer = power
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    order = np.argsort(freqs)
    freqs, transfer = freqs[order], transfer[order]
    p = pulse_power_spectrum(pulse, freqs - pulse.carrier)
    total = trapezoid(p, freqs)
    if not total > DISJOINT_FRACTION * pulse_energy(pulse):
        warnings.warn("pulse spectrum and comb grid do not overlap", RuntimeWarning, stacklevel=2)
        return 0.0
    return float(np.clip(trapezoid(p * transfer, freqs) / total, 0.0, 1.0))


def overlap_sensitivity(pulse: PulseSpec, comb_spectrum) -> dict:
    """The overlap under alternative readings of "comb transmission".

    ``power``: |S|^2 scaled to unit peak (the default); ``amplitude``: |S|
    scaled to unit peak; ``min_area``: area under min(P / P_max, |S|^2 / max)
    relative to the area under P / P_max.
    """
    freqs = np.asarray(comb_spectrum.freqs, dtype=float)
    order = np.argsort(freqs)
    freqs = freqs[order]
    power = np.asarray(comb_spectrum.power, dtype=float)[order]
    p = pulse_power_spectrum(pulse, freqs - pulse.carrier)
    total = trapezoid(p, freqs)
    t_pow = power / power.max()
    t_amp = np.sqrt(t_pow)
    p_norm = p / p.max()
    return {
        "power": float(trapezoid(p * t_pow, freqs) / total),
        "amplitude": float(trapezoid(p * t_amp, freqs) / total),
        "min_area": float(trapezoid(np.minimum(p_norm, t_pow), freqs) / trapezoid(p_norm, freqs)),
    }
