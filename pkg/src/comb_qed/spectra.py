"""Closed-form transmission of a cavity loaded with an emitter comb."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .hilbert import dressed_sweep
from .model import CavityParams, EnsembleSpec


@dataclass
class SpectrumTrace:
    freqs: np.ndarray
    s_complex: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.s_complex) ** 2


def comb_response(omega, omega_c, kappa, omegas, couplings, gammas, amplitude=1.0,
                  gamma_squared=False):
    """Vectorised transmission over an array of probe frequencies.

    Returns ``(S, singular)`` where ``singular`` marks probe points sitting
    exactly on a lossless tooth; S is set to its limit 0 there.
    """
    w = np.asarray(omega, dtype=float)
    omegas = np.asarray(omegas, dtype=float)
    couplings = np.asarray(couplings, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    loss = gammas ** 2 if gamma_squared else gammas
    tooth = loss[None, :] + 1j * (omegas[None, :] - w.reshape(-1, 1))
    singular_cell = tooth == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        load = np.where(singular_cell, 0.0, couplings[None, :] ** 2 / np.where(singular_cell, 1.0, tooth))
    denom = kappa + 1j * (omega_c - w.reshape(-1)) + load.sum(axis=1)
    singular = singular_cell.any(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(singular, 0.0, amplitude / np.where(denom == 0, 1.0, denom))
    s = np.where((denom == 0) & ~singular, np.inf, s)
    return s.reshape(w.shape), singular.reshape(w.shape)


def transmission_semiclassical(omega, ensemble: EnsembleSpec | None, cavity: CavityParams,
                               amplitude=1.0, gamma_squared=False):
    """S(w) = A / (kappa_load + i(w_c - w) + sum_k g_k^2 / (gamma_k + i(w_k - w))).

    ``ensemble`` may be None for an empty cavity.  ``gamma_squared=True``
    switches the tooth loss to gamma_k^2, for comparing against fits that used
    that form.  Returns a complex scalar for scalar ``omega``.
    """
    if ensemble is None:
        omegas = couplings = gammas = np.zeros(0)
    else:
        omegas, couplings, gammas = ensemble.omegas, ensemble.couplings, ensemble.gammas
    s, _ = comb_response(omega, cavity.omega_c, cavity.kappa_load, omegas, couplings, gammas,
                         amplitude, gamma_squared)
    return complex(s) if np.ndim(omega) == 0 else s


def transmission_trace(freqs, ensemble, cavity, amplitude=1.0, gamma_squared=False) -> SpectrumTrace:
    freqs = np.asarray(freqs, dtype=float)
    if ensemble is None:
        omegas = couplings = gammas = np.zeros(0)
    else:
        omegas, couplings, gammas = ensemble.omegas, ensemble.couplings, ensemble.gammas
    s, singular = comb_response(freqs, cavity.omega_c, cavity.kappa_load, omegas, couplings, gammas,
                                amplitude, gamma_squared)
    meta = {"singular_points": freqs[singular].tolist()} if singular.any() else {}
    return SpectrumTrace(freqs, s, meta)


def _check_monotone(grid, name):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError(f"{name} grid must be a non-empty 1-D sequence")
    d = np.diff(grid)
    if grid.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
        raise ValidationError(f"{name} grid must be strictly monotone")
    return grid


def spectrum_map(template: EnsembleSpec, cavity: CavityParams, omega_grid, spacing_grid,
                 amplitude=1.0, gamma_squared=False) -> np.ndarray:
    """|S|^2 with one row per comb spacing, re-spreading ``template`` around its centre."""
    omega_grid = _check_monotone(omega_grid, "frequency")
    spacing_grid = _check_monotone(spacing_grid, "spacing")
    out = np.empty((spacing_grid.size, omega_grid.size))
    for i, dw in enumerate(spacing_grid):
        ens = template.with_spacing(dw)
        s, _ = comb_response(omega_grid, cavity.omega_c, cavity.kappa_load, ens.omegas,
                             ens.couplings, ens.gammas, amplitude, gamma_squared)
        out[i] = np.abs(s) ** 2
    return out


def map_ridges(template, cavity, spacing_grid):
    """Dressed-state frequencies to overlay on a :func:`spectrum_map`."""
    return dressed_sweep(template, cavity, spacing_grid)


def double_lorentzian(omega, a1, a2, omega_c, g_k, kappa_k):
    """Vacuum-Rabi doublet: two Lorentzians of FWHM ``kappa_k`` at omega_c -+ g_k."""
    if not kappa_k > 0:
        raise ValidationError("kappa_k must be > 0")
    w = np.asarray(omega, dtype=float)
    hw = 0.5 * kappa_k
    return a1 / (1 + ((w - (omega_c - g_k)) / hw) ** 2) + a2 / (1 + ((w - (omega_c + g_k)) / hw) ** 2)


def fit_double_lorentzian(freqs, power, init=None):
    """Fit the doublet; returns a FitResult with a1, a2, omega_c, g_k, kappa_k."""
    from .analysis.lm import fit_least_squares

    freqs = np.asarray(freqs, dtype=float)
    power = np.asarray(power, dtype=float)
    if init is None:
        mid = 0.5 * (freqs[0] + freqs[-1])
        lo, hi = freqs < mid, freqs >= mid
        i1, i2 = np.argmax(np.where(lo, power, -np.inf)), np.argmax(np.where(hi, power, -np.inf))
        half = 0.5 * (freqs[i2] - freqs[i1])
        # full width at half maximum of the lower peak, walking out from its top
        j, k = i1, i1
        while j > 0 and power[j] > 0.5 * power[i1]:
            j -= 1
        while k < freqs.size - 1 and power[k] > 0.5 * power[i1]:
            k += 1
        width = max(freqs[k] - freqs[j], 2 * abs(freqs[1] - freqs[0]))
        init = {"a1": power[i1], "a2": power[i2], "omega_c": 0.5 * (freqs[i1] + freqs[i2]),
                "g_k": half, "kappa_k": width}
    return fit_least_squares(
        lambda w, a1, a2, wc, g, k: double_lorentzian(w, a1, a2, wc, g, abs(k) + 1e-300),
        freqs, power, init, bounds=([0, 0, -np.inf, 0, 1e-9], [np.inf] * 5))
