"""Domain types and unit conventions shared by every module.

All frequencies and rates are stored non-angular, in MHz (the value of
omega / 2pi).  Times are in ns.  Routines that build generators multiply
by ``RAD_PER_NS`` to obtain angular frequencies in rad/ns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ValidationError

#: 1 MHz expressed as an angular frequency in rad/ns.
RAD_PER_NS = 2.0 * math.pi * 1e-3

KAPPA_SUM_TOLERANCE = 0.01  # MHz


def _finite(name, value):
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class CavityParams:
    """Single resonator mode.

    ``omega_c`` is the resonance (MHz), ``kappa_e1``/``kappa_e2`` the two port
    couplings, ``kappa_i`` the internal loss and ``kappa_load`` the loaded
    linewidth, all in MHz.
    """

    omega_c: float
    kappa_e1: float
    kappa_e2: float
    kappa_i: float
    kappa_load: float

    def __post_init__(self):
        for name in ("omega_c", "kappa_e1", "kappa_e2", "kappa_i", "kappa_load"):
            _finite(name, getattr(self, name))
        for name in ("kappa_e1", "kappa_e2", "kappa_i", "kappa_load"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0, got {getattr(self, name)}")
        total = self.kappa_e1 + self.kappa_e2 + self.kappa_i
        if abs(self.kappa_load - total) > KAPPA_SUM_TOLERANCE:
            raise ValidationError(
                f"kappa_load = {self.kappa_load} MHz inconsistent with "
                f"kappa_e1 + kappa_e2 + kappa_i = {total:.4f} MHz")


@dataclass(frozen=True)
class QubitSpec:
    omega: float
    g: float
    gamma: float = 0.0
    label: int | str | None = None

    def __post_init__(self):
        for name in ("omega", "g", "gamma"):
            _finite(name, getattr(self, name))
        if self.omega <= 0:
            raise ValidationError(f"qubit {self.label}: omega must be > 0")
        if self.g <= 0:
            raise ValidationError(f"qubit {self.label}: g must be > 0")
        if self.gamma < 0:
            raise ValidationError(f"qubit {self.label}: gamma must be >= 0")


@dataclass(frozen=True)
class EnsembleSpec:
    """Ordered qubit list plus the nominal comb spacing (MHz, may be 0)."""

    qubits: tuple[QubitSpec, ...]
    comb_spacing: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(self.qubits))
        if not self.qubits:
            raise ValidationError("ensemble needs at least one qubit")
        _finite("comb_spacing", self.comb_spacing)

    def __len__(self):
        return len(self.qubits)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([q.omega for q in self.qubits], dtype=float)

    @property
    def couplings(self) -> np.ndarray:
        return np.array([q.g for q in self.qubits], dtype=float)

    @property
    def gammas(self) -> np.ndarray:
        return np.array([q.gamma for q in self.qubits], dtype=float)

    @property
    def center(self) -> float:
        return float(self.omegas.mean())

    def with_spacing(self, spacing: float) -> "EnsembleSpec":
        """Same couplings and decay rates re-spread around ``center``."""
        ens = build_comb(self.center, spacing, self.couplings, self.gammas)
        labels = [q.label for q in self.qubits]
        return EnsembleSpec(tuple(replace(q, label=lab) for q, lab in zip(ens.qubits, labels)),
                            spacing)

    def with_omegas(self, omegas: Sequence[float]) -> "EnsembleSpec":
        if len(omegas) != len(self.qubits):
            raise ValidationError("need one frequency per qubit")
        return EnsembleSpec(tuple(replace(q, omega=float(w)) for q, w in zip(self.qubits, omegas)),
                            self.comb_spacing)


@dataclass(frozen=True)
class PulseSpec:
    """Drive pulse.

    ``eta_peak`` is the peak amplitude in units of kappa_load, ``duration``
    the full window length (ns) starting at ``start``, ``carrier`` the drive
    frequency (MHz).  ``sigma`` (ns) is required for Gaussian pulses.
    """

    eta_peak: float
    duration: float
    carrier: float
    shape: str = "gaussian"
    sigma: float | None = None
    start: float = 0.0

    def __post_init__(self):
        for name in ("eta_peak", "duration", "carrier", "start"):
            _finite(name, getattr(self, name))
        if self.duration <= 0:
            raise ValidationError("pulse duration must be > 0")
        if self.eta_peak < 0:
            raise ValidationError("eta_peak must be >= 0")
        if self.shape not in ("gaussian", "rectangular"):
            raise ValidationError(f"unknown pulse shape {self.shape!r}")
        if self.shape == "gaussian":
            if self.sigma is None or not self.sigma > 0:
                raise ValidationError("gaussian pulse needs sigma > 0")

    @property
    def end(self) -> float:
        return self.start + self.duration

    @property
    def center(self) -> float:
        return self.start + 0.5 * self.duration


@dataclass(frozen=True)
class SimGrid:
    t_start: float
    t_end: float
    dt_out: float
    fock_max: int = 10
    rtol: float = 1e-8
    atol: float = 1e-10

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValidationError("t_end must exceed t_start")
        if not self.dt_out > 0:
            raise ValidationError("dt_out must be > 0")
        if int(self.fock_max) != self.fock_max or self.fock_max < 1:
            raise ValidationError("fock_max must be an integer >= 1")
        if self.rtol <= 0 or self.atol <= 0:
            raise ValidationError("integrator tolerances must be > 0")

    @property
    def times(self) -> np.ndarray:
        n = int(math.floor((self.t_end - self.t_start) / self.dt_out + 1e-9))
        return self.t_start + self.dt_out * np.arange(n + 1)


def build_comb(center: float, spacing: float, couplings: Sequence[float],
               gammas: Sequence[float], labels: Sequence | None = None) -> EnsembleSpec:
    """Equally spaced comb: qubit k sits at ``center + (k - (N-1)/2) * spacing``."""
    couplings = list(couplings)
    gammas = list(gammas)
    if len(couplings) != len(gammas):
        raise ValidationError(
            f"got {len(couplings)} couplings but {len(gammas)} decay rates")
    if not couplings:
        raise ValidationError("comb needs at least one qubit")
    n = len(couplings)
    if labels is None:
        labels = range(n)
    qubits = tuple(
        QubitSpec(omega=center + (k - (n - 1) / 2) * spacing, g=float(g), gamma=float(gm), label=lab)
        for k, (g, gm, lab) in enumerate(zip(couplings, gammas, labels)))
    return EnsembleSpec(qubits, float(spacing))


def collective_coupling(ensemble: EnsembleSpec) -> float:
    """sqrt(sum g_k^2) in MHz."""
    return float(math.sqrt(sum(q.g ** 2 for q in ensemble.qubits)))


def drive_photon_number(eta_multiplier: float) -> float:
    """Empty-cavity input photon number for a drive of ``eta_multiplier * kappa_load``."""
    if eta_multiplier < 0:
        raise ValidationError("drive amplitude must be >= 0")
    return float(eta_multiplier) ** 2
