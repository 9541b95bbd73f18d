"""Measured parameters of the seven-qubit device.

Qubits are numbered 1..7 as on the chip.  The comb uses qubits
(2, 3, 7, 5, 6) in ascending frequency order, with qubit 7 at the centre.
"""
import numpy as np

from .model import CavityParams, EnsembleSpec, QubitSpec, build_comb

CAVITY = CavityParams(omega_c=5878.0, kappa_e1=0.42, kappa_e2=0.51, kappa_i=0.003,
                      kappa_load=0.93)

#: coupling g_k (MHz) per chip qubit
COUPLINGS = {1: 28.07, 2: 30.96, 3: 32.27, 4: 30.82, 5: 32.13, 6: 30.54, 7: 28.24}

#: decay gamma_k (MHz) per chip qubit; qubit 1 only has an upper bound (<10 kHz)
DECAYS = {1: 0.010, 2: 0.414, 3: 0.287, 4: 0.470, 5: 0.350, 6: 0.290, 7: 0.033}

COMB_QUBITS = (2, 3, 7, 5, 6)
CENTRAL_QUBIT = 7

#: qubit frequencies (MHz) of the prepared combs, keyed by spacing (MHz),
#: listed in COMB_QUBITS order
COMB_FREQUENCIES = {
    35: (5804.5, 5839.5, 5874.5, 5909.5, 5944.5),
    40: (5794.5, 5834.5, 5874.5, 5914.5, 5954.5),
    45: (5784.5, 5829.5, 5874.5, 5919.5, 5964.5),
    50: (5774.5, 5824.5, 5874.5, 5924.5, 5974.5),
}
COMB_CENTER = 5874.5

#: inverse flux quanta (1/A); rows = bias lines 1..6 and the coil, columns = qubits 1..7
CROSSTALK_MATRIX = np.array([
    [-7, 450, -12, -22, -10, 0.2, 0.16],
    [-0.16, 2.5, 439, 27, 2.5, -0.3, 0.1],
    [-3.3, -0.8, -3.1, 427, -12, 2, 0.14],
    [-0.33, -0.13, -0.13, -4, 421, 6.6, 0.9],
    [0.33, 0.05, 0.05, 1, 12, 441, -3.6],
    [0.33, 0.02, 0.02, 0.02, 2.5, -14.9, 437],
    [12820, 23809, -23696, 25974, 26455, 26247, 21505],
], dtype=float)

FLUX_OFFSETS = np.array([-0.26, 0.34, -0.27, -0.31, -0.27, 0.3, 0.1])

#: bias line (0-based row) -> qubit it is wired to (0-based column)
LOCAL_LINES = {0: 1, 1: 2, 2: 3, 3: 4, 4: 5, 5: 6}
COIL_LINE = 6

#: sweet-spot frequencies are not published; 6.4 GHz stands in for all qubits
SYNTHETIC_OMEGA_MAX = np.full(7, 6400.0)


def comb_couplings():
    return [COUPLINGS[k] for k in COMB_QUBITS]


def comb_decays():
    return [DECAYS[k] for k in COMB_QUBITS]


def comb_ensemble(spacing, center=COMB_CENTER):
    """Five-qubit comb with the measured couplings and decay rates."""
    return build_comb(center, spacing, comb_couplings(), comb_decays(), labels=COMB_QUBITS)


def prepared_comb(spacing):
    """Comb at the frequencies actually prepared for the given spacing."""
    qubits = tuple(QubitSpec(omega=w, g=COUPLINGS[k], gamma=DECAYS[k], label=k)
                   for k, w in zip(COMB_QUBITS, COMB_FREQUENCIES[spacing]))
    return EnsembleSpec(qubits, float(spacing))


def single_qubit(label=CENTRAL_QUBIT, omega=None):
    omega = CAVITY.omega_c if omega is None else omega
    return EnsembleSpec((QubitSpec(omega=omega, g=COUPLINGS[label], gamma=DECAYS[label],
                                   label=label),), 0.0)
