"""Model fits used throughout: damped sinusoid, Gaussian, comb transmission."""
from __future__ import annotations

import numpy as np

from ..errors import FitError
from ..model import RAD_PER_NS
from ..spectra import comb_response
from .lm import FitResult, fit_least_squares

#: a spectral line must exceed this multiple of the median FFT magnitude
OSCILLATION_SNR = 5.0


def damped_sinusoid(t, gamma, omega, phase, offset, amplitude, t0=0.0):
    """amplitude * exp(-2pi gamma (t-t0)) * (sin(2pi omega (t-t0) + phase) + 1) + offset.

    ``gamma`` and ``omega`` in MHz, ``t`` in ns.
    """
    s = np.asarray(t, dtype=float) - t0
    return amplitude * np.exp(-RAD_PER_NS * gamma * s) * (np.sin(RAD_PER_NS * omega * s + phase) + 1.0) + offset


def _dominant_frequency(t, y):
    """Strongest non-DC line (MHz) of ``y`` and its signal-to-noise figure."""
    dt = t[1] - t[0]
    y = y - y.mean()
    n = 1 << int(np.ceil(np.log2(8 * y.size)))
    spec = np.abs(np.fft.rfft(y * np.hanning(y.size), n))
    freqs = np.fft.rfftfreq(n, dt) * 1e3
    spec[0] = 0.0
    # skip the leakage lobe of the removed mean
    spec[freqs < 2e3 / (t[-1] - t[0])] = 0.0
    k = int(np.argmax(spec))
    floor = np.median(spec[spec > 0]) if np.any(spec > 0) else 0.0
    snr = spec[k] / floor if floor > 0 else (np.inf if spec[k] > 0 else 0.0)
    if 0 < k < spec.size - 1:
        a, b, c = spec[k - 1], spec[k], spec[k + 1]
        den = a - 2 * b + c
        shift = 0.5 * (a - c) / den if den != 0 else 0.0
    else:
        shift = 0.0
    return (k + shift) * (freqs[1] - freqs[0]), snr


def fit_damped_sinusoid(trace, window=None, init=None) -> FitResult:
    """Fit the damped-sinusoid model to ``trace.abs_sq`` inside ``window = (t0, t1)`` ns.

    Accepts a TimeTrace or a ``(times, values)`` pair.  Time is measured from
    the window start.  Returned ``omega`` and ``gamma`` are in MHz.
    """
    if hasattr(trace, "abs_sq"):
        t, y = np.asarray(trace.times, float), np.asarray(trace.abs_sq, float)
    else:
        t, y = (np.asarray(v, dtype=float) for v in trace)
    if window is not None:
        m = (t >= window[0]) & (t <= window[1])
        t, y = t[m], y[m]
    if t.size < 8:
        raise FitError("window holds too few samples for a damped-sinusoid fit")
    t0 = float(t[0])

    if init is None:
        omega, snr = _dominant_frequency(t, y)
        if not snr > OSCILLATION_SNR or omega <= 0:
            raise FitError("no oscillation detected in the fit window")
        periods = omega * (t[-1] - t0) * 1e-3
        if periods < 3:
            raise FitError(f"window spans only {periods:.2f} oscillation periods, need >= 3")
        # envelope from the per-period maxima
        n_per = max(1, int(round(1e3 / omega / (t[1] - t[0]))))
        chunks = [y[i:i + n_per] for i in range(0, y.size - n_per + 1, n_per)]
        tops = np.array([c.max() - y.min() for c in chunks])
        centres = t0 + (np.arange(len(chunks)) + 0.5) * n_per * (t[1] - t[0])
        good = tops > 0
        if good.sum() >= 2:
            slope = np.polyfit(centres[good] - t0, np.log(tops[good]), 1)[0]
            gamma = max(-slope / RAD_PER_NS, 1e-6)
        else:
            gamma = 1e-3
        amplitude = max(0.5 * (y.max() - y.min()), 1e-300)
        offset = float(y.min())
        best = None
        for phase in np.linspace(-np.pi, np.pi, 8, endpoint=False):
            p = dict(gamma=gamma, omega=omega, phase=phase, offset=offset, amplitude=amplitude)
            r = y - damped_sinusoid(t, **p, t0=t0)
            c = float(r @ r)
            if best is None or c < best[0]:
                best = (c, p)
        init = best[1]
    init = {k: float(init[k]) for k in ("gamma", "omega", "phase", "offset", "amplitude")}

    def model(x, gamma, omega, phase, offset, amplitude):
        return damped_sinusoid(x, gamma, omega, phase, offset, amplitude, t0=t0)

    res = fit_least_squares(model, t, y, init,
                            bounds=([-np.inf, 0, -np.inf, -np.inf, 0], [np.inf] * 5))
    res.params["phase"] = float(np.angle(np.exp(1j * res.params["phase"])))
    res.extra["t0"] = t0
    return res


def gaussian(x, amplitude, mu, sigma):
    return amplitude * np.exp(-((np.asarray(x, float) - mu) ** 2) / (2.0 * sigma ** 2))


def fit_gaussian(x, y=None, init=None) -> FitResult:
    """Fit A exp(-(x - mu)^2 / (2 sigma^2)); ``extra['two_sigma']`` is the bandwidth figure.

    Accepts ``(x, y)`` arrays or a single ``(n, 2)`` sample array.
    """
    if y is None:
        arr = np.asarray(x, dtype=float)
        x, y = arr[:, 0], arr[:, 1]
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 4:
        raise FitError("need at least 4 samples for a Gaussian fit")
    if init is None:
        w = np.clip(y, 0, None)
        total = w.sum()
        if not total > 0:
            raise FitError("non-positive variance estimate: no positive samples")
        mu = float((w * x).sum() / total)
        var = float((w * (x - mu) ** 2).sum() / total)
        if not var > 0:
            raise FitError("non-positive variance estimate")
        init = {"amplitude": float(y.max()), "mu": mu, "sigma": np.sqrt(var)}
    res = fit_least_squares(gaussian, x, y, init)
    sigma = abs(res.params["sigma"])
    if not sigma > 0:
        raise FitError("fit collapsed to zero width")
    res.params["sigma"] = sigma
    res.extra["two_sigma"] = 2.0 * sigma
    return res


def fit_comb_spectrum(spectrum, fixed, init_omegas, init_amplitude=None) -> FitResult:
    """Fit |S(w)| with only the tooth frequencies and the amplitude free.

    ``fixed`` is ``(couplings, gammas, kappa_load, omega_c)``; couplings and
    gammas are in ensemble order.  Initial frequencies are sorted before being
    paired with the qubits, so their order does not matter.  Parameters are
    named ``omega_1 .. omega_N`` and ``A``.
    """
    couplings, gammas, kappa, omega_c = fixed
    couplings = np.asarray(couplings, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    init_omegas = np.sort(np.asarray(init_omegas, dtype=float))
    if init_omegas.size != couplings.size:
        raise FitError("need one initial frequency per coupling")
    freqs = np.asarray(spectrum.freqs, dtype=float)
    target = np.abs(np.asarray(spectrum.s_complex))
    n = couplings.size

    def shape(w, omegas):
        s, _ = comb_response(w, omega_c, kappa, omegas, couplings, gammas, 1.0)
        return np.abs(s)

    if init_amplitude is None:
        base = shape(freqs, init_omegas)
        init_amplitude = float(base @ target / (base @ base))

    def model(w, *p):
        return p[-1] * shape(w, np.asarray(p[:-1]))

    names = [f"omega_{k + 1}" for k in range(n)] + ["A"]
    res = fit_least_squares(model, freqs, target, list(init_omegas) + [init_amplitude], names=names)
    outside = [k for k in range(n) if not freqs.min() <= res.params[names[k]] <= freqs.max()]
    if outside:
        res.converged = False
        res.message += f"; teeth {[k + 1 for k in outside]} fitted outside the frequency window"
    return res
