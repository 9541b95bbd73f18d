"""Operators on the truncated (N qubits x Fock) space and Tavis-Cummings Hamiltonians.

Basis ordering: qubit 0 is the most significant tensor factor, the cavity
the least significant.  Qubit state 0 is the ground state, so basis index 0
is the global ground state |g...g, 0>.

Operator builders return dense ``numpy`` arrays unless ``sparse=True``, in
which case a CSR matrix is returned.  Hamiltonians are in rad/ns.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .model import RAD_PER_NS, CavityParams, EnsembleSpec

HERMITIAN_RTOL = 1e-12

_SIGMA_MINUS = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))


@dataclass(frozen=True)
class HilbertConfig:
    n_qubits: int
    fock_max: int

    def __post_init__(self):
        if self.n_qubits < 0 or int(self.n_qubits) != self.n_qubits:
            raise ValidationError("n_qubits must be a non-negative integer")
        if self.fock_max < 1 or int(self.fock_max) != self.fock_max:
            raise ValidationError("fock_max must be an integer >= 1")

    @property
    def n_fock(self) -> int:
        return self.fock_max + 1

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits * self.n_fock


def _finish(op, sparse):
    return op.tocsr() if sparse else op.toarray()


def _embed(config, qubit_ops=None, cavity_op=None):
    """Tensor product with identities on every unspecified factor."""
    qubit_ops = qubit_ops or {}
    factors = [qubit_ops.get(k, sp.identity(2, format="csr")) for k in range(config.n_qubits)]
    factors.append(cavity_op if cavity_op is not None else sp.identity(config.n_fock, format="csr"))
    out = sp.identity(1, format="csr")
    for f in factors:
        out = sp.kron(out, f, format="csr")
    return out


def annihilation(config: HilbertConfig, sparse=False):
    """Cavity lowering operator a with <n-1|a|n> = sqrt(n)."""
    a = sp.diags(np.sqrt(np.arange(1, config.n_fock, dtype=float)), 1, format="csr")
    return _finish(_embed(config, cavity_op=a), sparse)


def number_operator(config: HilbertConfig, sparse=False):
    n = sp.diags(np.arange(config.n_fock, dtype=float), 0, format="csr")
    return _finish(_embed(config, cavity_op=n), sparse)


def qubit_lowering(config: HilbertConfig, k: int, sparse=False):
    """sigma^- on qubit ``k`` (0-based)."""
    if not 0 <= k < config.n_qubits:
        raise ValidationError(f"qubit index {k} out of range for {config.n_qubits} qubits")
    return _finish(_embed(config, qubit_ops={k: _SIGMA_MINUS}), sparse)


def qubit_z(config: HilbertConfig, k: int, sparse=False):
    """sigma^z on qubit ``k``: +1 excited, -1 ground."""
    if not 0 <= k < config.n_qubits:
        raise ValidationError(f"qubit index {k} out of range for {config.n_qubits} qubits")
    z = sp.diags([-1.0, 1.0], 0, format="csr")
    return _finish(_embed(config, qubit_ops={k: z}), sparse)


def excitation_number(config: HilbertConfig, sparse=False):
    """a^dag a + sum_k sigma_k^+ sigma_k^-, conserved by the undriven Hamiltonian."""
    diag = np.zeros(config.dim)
    idx = np.arange(config.dim)
    diag += idx % config.n_fock
    qubit_bits = idx // config.n_fock
    for k in range(config.n_qubits):
        diag += (qubit_bits >> (config.n_qubits - 1 - k)) & 1
    op = sp.diags(diag, 0, format="csr")
    return _finish(op, sparse)


def is_hermitian(op, rtol=HERMITIAN_RTOL) -> bool:
    dense = op.toarray() if sp.issparse(op) else np.asarray(op)
    scale = np.abs(dense).max()
    if scale == 0:
        return True
    return np.abs(dense - dense.conj().T).max() <= rtol * scale


def tc_hamiltonian(ensemble: EnsembleSpec, cavity: CavityParams, config: HilbertConfig,
                   frame: float = 0.0, sparse=False):
    """Undriven Tavis-Cummings Hamiltonian in the frame rotating at ``frame`` (MHz).

    ``ensemble=None`` gives the empty cavity.

    H = 2pi [(w_c - f) a^dag a + sum_k (w_k - f)/2 sz_k + sum_k g_k (s_k^- a^dag + s_k^+ a)],
    returned in rad/ns.
    """
    qubits = () if ensemble is None else ensemble.qubits
    if len(qubits) != config.n_qubits:
        raise ValidationError(
            f"ensemble has {len(qubits)} qubits but config expects {config.n_qubits}")
    a = annihilation(config, sparse=True)
    ad = a.T.tocsr()
    h = (cavity.omega_c - frame) * (ad @ a)
    for k, q in enumerate(qubits):
        sm = qubit_lowering(config, k, sparse=True)
        h = h + 0.5 * (q.omega - frame) * qubit_z(config, k, sparse=True)
        h = h + q.g * (sm @ ad + sm.T @ a)
    return _finish(RAD_PER_NS * h, sparse)


def drive_operator(config: HilbertConfig, sparse=False):
    """(a^dag, a).

    In the frame rotating at the carrier the drive is
    ``H_drive(t) = i 2pi eta(t) (a^dag - a)`` for real eta (MHz); see
    :func:`drive_hamiltonian`.
    """
    a = annihilation(config, sparse=True)
    return _finish(a.T, sparse), _finish(a, sparse)


def drive_hamiltonian(config: HilbertConfig, eta: float, sparse=False):
    """i 2pi eta (a^dag - a) in rad/ns for a real amplitude ``eta`` in MHz."""
    ad, a = drive_operator(config, sparse=True)
    return _finish(1j * RAD_PER_NS * eta * (ad - a), sparse)


def single_excitation_hamiltonian(ensemble: EnsembleSpec, cavity: CavityParams) -> np.ndarray:
    """(N+1)x(N+1) matrix in MHz on {|1, g..g>, |0, e_k>}."""
    n = len(ensemble)
    h = np.zeros((n + 1, n + 1))
    h[0, 0] = cavity.omega_c
    h[np.arange(1, n + 1), np.arange(1, n + 1)] = ensemble.omegas
    h[0, 1:] = ensemble.couplings
    h[1:, 0] = ensemble.couplings
    return h


def dressed_states(ensemble: EnsembleSpec, cavity: CavityParams):
    """Dressed-state frequencies (MHz, ascending) and their cavity weights."""
    energies, vectors = np.linalg.eigh(single_excitation_hamiltonian(ensemble, cavity))
    return energies, np.abs(vectors[0]) ** 2


def bright_eigenvalues(ensemble: EnsembleSpec, cavity: CavityParams, min_weight=1e-6):
    energies, weights = dressed_states(ensemble, cavity)
    return energies[weights > min_weight]


@dataclass
class DressedSweep:
    spacings: np.ndarray        # (M,)
    eigenvalues: np.ndarray     # (M, N+1), ascending per row, MHz
    cavity_weight: np.ndarray   # (M, N+1)
    dark_threshold: float = 1e-9

    @property
    def dark(self) -> np.ndarray:
        return self.cavity_weight < self.dark_threshold


def dressed_sweep(template: EnsembleSpec, cavity: CavityParams, spacings) -> DressedSweep:
    """Dressed-state frequencies for each comb spacing, keeping the template's couplings."""
    spacings = np.asarray(spacings, dtype=float)
    if spacings.ndim != 1 or spacings.size == 0:
        raise ValidationError("spacing grid must be a non-empty 1-D sequence")
    steps = np.diff(spacings)
    if spacings.size > 1 and not (np.all(steps > 0) or np.all(steps < 0)):
        raise ValidationError("spacing grid must be strictly monotone")
    rows, weights = [], []
    for s in spacings:
        e, w = dressed_states(template.with_spacing(s), cavity)
        rows.append(e)
        weights.append(w)
    return DressedSweep(spacings, np.array(rows), np.array(weights))
