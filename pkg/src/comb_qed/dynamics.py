"""Driven Lindblad evolution of the cavity + emitter density matrix.

Cavity decay enters with collapse rate 2 * 2pi * kappa_load and emitter
decay with 2 * 2pi * gamma_k (rad/ns, see ``collapse_operators``).  With
that choice the weak-drive response is exactly the closed-form transmission
``eta / (kappa_load + i(w_c - w) + sum_k g_k^2 / (gamma_k + i(w_k - w)))``
and a drive of ``m * kappa_load`` fills the empty cavity with m^2 photons.

Density matrices are stored row-major, so ``vec(A rho B) = kron(A, B.T) vec(rho)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.integrate import DOP853
from scipy.optimize import brentq
from scipy.stats import poisson

from .errors import (ConvergenceError, IntegrationError, StateInvariantError,
                     ValidationError)
from .hilbert import (HilbertConfig, annihilation, drive_operator, qubit_lowering,
                      tc_hamiltonian)
from .model import RAD_PER_NS, CavityParams, EnsembleSpec, PulseSpec, SimGrid
from .pulses import pulse_envelope

log = logging.getLogger(__name__)

TRACE_TOL = 1e-8
HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-8

#: largest allowed Poisson weight above the Fock cutoff
TRUNCATION_TAIL = 1e-6

#: propagate_oracle refuses Liouvillians larger than this (dim^2)
ORACLE_MAX_DIM2 = 4096

__all__ = [
    "QuantumState", "TimeTrace", "SteadyState", "lindblad_rhs", "collapse_operators",
    "LindbladGenerator", "propagate", "propagate_oracle", "steady_state_response",
    "compression_point", "pulse_envelope", "liouvillian",
]


def _dense(op):
    return op.toarray() if sp.issparse(op) else np.asarray(op)


@dataclass
class QuantumState:
    rho: np.ndarray
    config: HilbertConfig
    time: float = 0.0

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.shape != (self.config.dim, self.config.dim):
            raise ValidationError(
                f"rho has shape {self.rho.shape}, config needs {(self.config.dim,) * 2}")

    @classmethod
    def ground(cls, config: HilbertConfig, time=0.0):
        rho = np.zeros((config.dim, config.dim), dtype=complex)
        rho[0, 0] = 1.0
        return cls(rho, config, time)

    @classmethod
    def pure(cls, psi, config: HilbertConfig, time=0.0):
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), config, time)

    def expect(self, op) -> complex:
        return complex(np.sum(_dense(op).T * self.rho)) if not sp.issparse(op) else complex(
            (op.multiply(self.rho.T)).sum())

    def diagnostics(self) -> dict:
        return state_diagnostics(self.rho)

    def validate(self):
        d = self.diagnostics()
        if not invariants_hold(d):
            raise StateInvariantError(f"state at t = {self.time} ns violates invariants: {d}",
                                      self.time, d)
        return self


def state_diagnostics(rho, full_spectrum=True) -> dict:
    """Trace error, Hermiticity error and (a lower bound on) the minimum eigenvalue."""
    trace_err = abs(np.trace(rho) - 1.0)
    herm_err = float(np.abs(rho - rho.conj().T).max())
    h = 0.5 * (rho + rho.conj().T)
    if full_spectrum:
        min_eig = float(la.eigvalsh(h, subset_by_index=[0, 0])[0])
    else:
        # cheap certificate: Cholesky of h + tol*I exists iff min eig > -tol
        try:
            la.cholesky(h + POSITIVITY_TOL * np.eye(h.shape[0]), lower=True, check_finite=False)
            min_eig = -0.0
        except la.LinAlgError:
            min_eig = float(la.eigvalsh(h, subset_by_index=[0, 0])[0])
    return {"trace_error": float(trace_err), "hermitian_error": herm_err, "min_eigenvalue": min_eig}


def invariants_hold(d) -> bool:
    return (d["trace_error"] <= TRACE_TOL and d["hermitian_error"] <= HERMITIAN_TOL
            and d["min_eigenvalue"] >= -POSITIVITY_TOL)


@dataclass
class TimeTrace:
    times: np.ndarray
    a_expect: np.ndarray
    photon_number: np.ndarray
    observables: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    final_state: QuantumState | None = None

    @property
    def abs_sq(self) -> np.ndarray:
        return self.a_expect.real ** 2 + self.a_expect.imag ** 2


def lindblad_rhs(rho, H, collapse):
    """-i[H, rho] + sum_j r_j (L_j rho L_j^dag - {L_j^dag L_j, rho} / 2).

    ``rho`` is a QuantumState or a square array, ``H`` in rad/ns and
    ``collapse`` a list of ``(rate, L)`` pairs with rates in 1/ns.
    """
    r = rho.rho if isinstance(rho, QuantumState) else np.asarray(rho, dtype=complex)
    H = _dense(H)
    n = r.shape[0]
    if r.shape != (n, n) or H.shape != (n, n):
        raise ValidationError(f"dimension mismatch: rho {r.shape}, H {H.shape}")
    out = -1j * (H @ r - r @ H)
    for rate, L in collapse:
        if rate < 0:
            raise ValidationError("collapse rates must be >= 0")
        L = _dense(L)
        if L.shape != (n, n):
            raise ValidationError(f"dimension mismatch: collapse operator {L.shape}")
        LdL = L.conj().T @ L
        out = out + rate * (L @ r @ L.conj().T - 0.5 * (LdL @ r + r @ LdL))
    return out


def collapse_operators(ensemble: EnsembleSpec | None, cavity: CavityParams, config: HilbertConfig,
                       sparse=True):
    """Cavity and emitter decay channels with their rates in 1/ns."""
    ops = [(2 * RAD_PER_NS * cavity.kappa_load, annihilation(config, sparse=sparse))]
    if ensemble is not None:
        for k, q in enumerate(ensemble.qubits):
            ops.append((2 * RAD_PER_NS * q.gamma, qubit_lowering(config, k, sparse=sparse)))
    return [(r, L) for r, L in ops if r > 0]


def liouvillian(H, collapse) -> np.ndarray:
    """Dense superoperator acting on row-major vec(rho)."""
    H = _dense(H)
    n = H.shape[0]
    eye = np.eye(n)
    sup = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for rate, L in collapse:
        L = _dense(L)
        LdL = L.conj().T @ L
        sup += rate * (np.kron(L, L.conj()) - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T))
    return sup


class LindbladGenerator:
    """Fast right-hand side for a Hamiltonian H0 + eta(t) * drive.

    ``drive`` is the Hermitian operator multiplying the real envelope (rad/ns
    per MHz of eta).  The anti-Hermitian decay part is folded into an
    effective Hamiltonian and the jump terms into one sparse superoperator.
    """

    def __init__(self, H0, collapse, drive=None):
        H0 = sp.csr_matrix(H0)
        self.dim = H0.shape[0]
        decay = sp.csr_matrix((self.dim, self.dim), dtype=complex)
        jumps = sp.csr_matrix((self.dim ** 2, self.dim ** 2), dtype=complex)
        for rate, L in collapse:
            L = sp.csr_matrix(L)
            decay = decay + rate * (L.conj().T @ L)
            jumps = jumps + rate * sp.kron(L, L.conj(), format="csr")
        self.heff = (H0 - 0.5j * decay).tocsr()
        self.jumps = jumps.tocsr()
        # stored as -i * drive so the commutator term needs no extra factor
        self.drive = None if drive is None else sp.csr_matrix(-1j * drive)
        self.n_evals = 0

    def __call__(self, rho, eta=0.0):
        self.n_evals += 1
        x = -1j * (self.heff @ rho)
        if eta and self.drive is not None:
            x += eta * (self.drive @ rho)
        out = x + x.conj().T
        out += (self.jumps @ rho.ravel()).reshape(self.dim, self.dim)
        return out


def system_operators(ensemble, cavity, config, frame):
    """(H0, drive, collapse) for the driven system in the frame at ``frame`` MHz.

    ``drive`` is the Hermitian operator such that H(t) = H0 + eta(t) * drive
    with eta in MHz.
    """
    H0 = tc_hamiltonian(ensemble, cavity, config, frame=frame, sparse=True)
    ad, a = drive_operator(config, sparse=True)
    drive = (1j * RAD_PER_NS * (ad - a)).tocsr()
    return H0, drive, collapse_operators(ensemble, cavity, config)


def pulse_area(pulse, kappa_load, n=2001):
    """Integral of |eta(t)| dt in MHz ns."""
    if pulse is None or pulse.eta_peak == 0:
        return 0.0
    t = np.linspace(pulse.start, pulse.end, n)
    return float(np.trapezoid(np.abs(pulse_envelope(pulse, t)), t)) * kappa_load


def check_truncation(config: HilbertConfig, alpha_bound: float):
    """Reject runs whose coherent-amplitude bound puts weight above the Fock cutoff."""
    tail = float(poisson.sf(config.fock_max, alpha_bound ** 2))
    if tail > TRUNCATION_TAIL:
        raise ValidationError(
            f"cavity amplitude can reach {alpha_bound:.3g}: Poisson weight {tail:.2e} above "
            f"fock_max = {config.fock_max}; raise fock_max")
    return tail


def propagate(initial: QuantumState | None, ensemble: EnsembleSpec | None, cavity: CavityParams,
              pulse: PulseSpec | None, grid: SimGrid, frame=None, observables=None,
              check_invariants=True) -> TimeTrace:
    """Integrate the master equation over ``grid`` and sample <a> on its output times.

    The frame rotates at the pulse carrier (or ``frame``; the cavity frequency
    when there is no pulse).  ``initial=None`` starts from the global ground
    state.  ``observables`` maps names to operators whose expectation values
    are recorded alongside <a>.
    """
    n_qubits = 0 if ensemble is None else len(ensemble)
    config = HilbertConfig(n_qubits, grid.fock_max)
    if initial is None:
        initial = QuantumState.ground(config, grid.t_start)
    if initial.config != config:
        raise ValidationError(f"initial state config {initial.config} does not match {config}")
    initial.validate()
    if frame is None:
        frame = pulse.carrier if pulse is not None else cavity.omega_c

    a = annihilation(config, sparse=True)
    n_op = (a.T @ a).tocsr()
    # weight already sitting on the top Fock level
    top = np.arange(config.dim) % config.n_fock == config.fock_max
    edge = float(np.real(np.diag(initial.rho))[top].sum())
    if edge > TRUNCATION_TAIL:
        raise ValidationError(f"initial state has weight {edge:.2e} on the top Fock level "
                              f"{config.fock_max}; raise fock_max")
    tail = edge
    area = pulse_area(pulse, cavity.kappa_load)
    if area > 0:
        # |<a>| grows by at most 2pi * integral |eta| dt
        n0 = initial.expect(n_op).real
        tail = max(tail, check_truncation(config, math.sqrt(max(n0, 0.0)) + RAD_PER_NS * area))

    H0, drive, collapse = system_operators(ensemble, cavity, config, frame)
    gen = LindbladGenerator(H0, collapse, drive)
    dim = config.dim
    obs = {k: sp.csr_matrix(v) for k, v in (observables or {}).items()}

    def eta(t):
        return cavity.kappa_load * pulse_envelope(pulse, t) if pulse is not None else 0.0

    def rhs(t, y):
        return gen(y.reshape(dim, dim), eta(t)).ravel()

    times = grid.times
    a_vals = np.empty(times.size, dtype=complex)
    n_vals = np.empty(times.size)
    o_vals = {k: np.empty(times.size, dtype=complex) for k in obs}
    worst = {"trace_error": 0.0, "hermitian_error": 0.0, "min_eigenvalue": np.inf}

    def record(i, t, y):
        rho = y.reshape(dim, dim)
        a_vals[i] = (a.multiply(rho.T)).sum()
        n_vals[i] = (n_op.multiply(rho.T)).sum().real
        for k, op in obs.items():
            o_vals[k][i] = (op.multiply(rho.T)).sum()
        if check_invariants:
            d = state_diagnostics(rho, full_spectrum=False)
            worst["trace_error"] = max(worst["trace_error"], d["trace_error"])
            worst["hermitian_error"] = max(worst["hermitian_error"], d["hermitian_error"])
            worst["min_eigenvalue"] = min(worst["min_eigenvalue"], d["min_eigenvalue"])
            if not invariants_hold(d):
                raise StateInvariantError(f"invariants violated at t = {t} ns: {d}", t, d)

    # restart the integrator where the envelope switches on and off
    breaks = [grid.t_start, grid.t_end]
    if pulse is not None:
        breaks += [b for b in (pulse.start, pulse.end) if grid.t_start < b < grid.t_end]
    breaks = sorted(set(breaks))

    # entrywise errors of size atol add up to ~dim * atol in the spectrum, so
    # tighten atol far enough that the positivity check stays meaningful
    atol = min(grid.atol, POSITIVITY_TOL / (1000 * dim))
    y = initial.rho.ravel().copy()
    i_next = 0
    n_steps = 0
    for seg_start, seg_end in zip(breaks[:-1], breaks[1:]):
        while i_next < times.size and times[i_next] <= seg_start + 1e-12:
            if abs(times[i_next] - seg_start) <= 1e-12:
                record(i_next, times[i_next], y)
            i_next += 1
        solver = DOP853(rhs, seg_start, y, seg_end, rtol=grid.rtol, atol=atol)
        while solver.status == "running":
            solver.step()
            n_steps += 1
            if solver.status == "failed":
                raise IntegrationError(f"integrator failed after t = {solver.t_old} ns",
                                       solver.t_old if solver.t_old is not None else seg_start)
            if i_next < times.size and times[i_next] <= solver.t:
                dense = solver.dense_output()
                while i_next < times.size and times[i_next] <= solver.t:
                    record(i_next, times[i_next], dense(times[i_next]))
                    i_next += 1
        y = solver.y
    final = QuantumState(y.reshape(dim, dim).copy(), config, grid.t_end)

    meta = {"n_steps": n_steps, "n_evals": gen.n_evals, "frame": frame, "dim": dim, "atol": atol,
            "truncation_tail": tail, "invariants": worst if check_invariants else None}
    log.debug("propagate: %d steps, %d evaluations", n_steps, gen.n_evals)
    return TimeTrace(times, a_vals, n_vals, o_vals, meta, final)


def propagate_oracle(initial: QuantumState, H_constant, collapse, t) -> QuantumState:
    """Exact evolution by the matrix exponential of the dense Liouvillian."""
    dim = initial.config.dim
    if dim * dim > ORACLE_MAX_DIM2:
        raise ValidationError(f"oracle limited to dim^2 <= {ORACLE_MAX_DIM2}, got {dim * dim}")
    sup = liouvillian(H_constant, collapse)
    vec = la.expm(sup * (t - initial.time)) @ initial.rho.ravel()
    return QuantumState(vec.reshape(dim, dim), initial.config, t)


@dataclass
class SteadyState:
    a: complex
    photon_number: float
    residual: float
    iterations: int
    method: str
    state: QuantumState | None = None


def _steady_jump_map(H, collapse, config, tol, max_iter):
    """Fixed point of rho = -L_H^-1(J rho), L_H the no-jump part of the generator.

    L_H(X) = -i (Heff X - X Heff^dag) is inverted in the eigenbasis of Heff;
    each pass feeds the jumps of the previous iterate back in as the source.
    """
    dim = config.dim
    gen = LindbladGenerator(H, collapse)
    heff = gen.heff.toarray()
    lam, V = la.eig(heff)
    Vi = la.inv(V)
    den = -1j * (lam[:, None] - lam.conj()[None, :])
    if np.abs(den).min() < 1e-14:
        raise ConvergenceError("no-jump generator is singular (an undamped mode); "
                               "use method='propagate'")
    source = np.zeros((dim, dim), dtype=complex)
    source[0, 0] = 1.0
    residual = np.inf
    rho = source
    for it in range(max_iter + 1):
        rho = -(V @ ((Vi @ source @ Vi.conj().T) / den) @ V.conj().T)
        rho = 0.5 * (rho + rho.conj().T)
        rho /= np.trace(rho).real
        residual = float(np.abs(gen(rho)).max())
        if residual < tol:
            return rho, residual, it
        source = (gen.jumps @ rho.ravel()).reshape(dim, dim)
    raise ConvergenceError(f"jump-map iteration stalled at residual {residual:.3e}", residual)


def _steady_propagate(gen, config, grid, tol):
    """Integrate under constant drive until rho changes by < tol over one output period."""
    dim = config.dim

    def rhs(t, y):
        return gen(y.reshape(dim, dim)).ravel()

    solver = DOP853(rhs, grid.t_start, QuantumState.ground(config).rho.ravel(), grid.t_end,
                    rtol=grid.rtol, atol=grid.atol)
    last_t, last_y = grid.t_start, solver.y.copy()
    change = np.inf
    while solver.status == "running":
        solver.step()
        if solver.status == "failed":
            raise IntegrationError("integrator failed while relaxing", solver.t_old)
        if solver.t - last_t >= grid.dt_out:
            change = float(np.abs(solver.y - last_y).max())
            if change < tol:
                return solver.y.reshape(dim, dim), change, solver.t
            last_t, last_y = solver.t, solver.y.copy()
    raise ConvergenceError(f"not stationary by t = {grid.t_end} ns; last change {change:.3e}",
                           change)


def steady_state_response(ensemble: EnsembleSpec | None, cavity: CavityParams, eta_cw: float,
                          omega_d: float, grid: SimGrid | None = None, method="jump_map",
                          tol=1e-12, max_iter=500) -> SteadyState:
    """Stationary <a> under a continuous drive of ``eta_cw * kappa_load`` at ``omega_d`` MHz.

    ``method='jump_map'`` solves for the fixed point directly; ``'propagate'``
    integrates over ``grid`` until rho stops changing by more than
    ``grid.atol`` per output period.  Only ``grid.fock_max`` is used by the
    direct method.
    """
    grid = grid or SimGrid(0.0, 1e5, 10.0)
    n_qubits = 0 if ensemble is None else len(ensemble)
    config = HilbertConfig(n_qubits, grid.fock_max)
    eta = eta_cw * cavity.kappa_load
    # the empty-cavity amplitude eta / kappa = eta_cw sets the scale
    check_truncation(config, abs(eta_cw))
    H0, drive, collapse = system_operators(ensemble, cavity, config, omega_d)
    H = (H0 + eta * drive).tocsr()
    a = annihilation(config, sparse=True)

    if eta == 0:
        rho = QuantumState.ground(config).rho
        residual = float(np.abs(LindbladGenerator(H, collapse)(rho)).max())
        iterations, used = 0, "trivial"
    elif method == "jump_map":
        rho, residual, iterations = _steady_jump_map(H, collapse, config, tol, max_iter)
        used = method
    elif method == "propagate":
        gen = LindbladGenerator(H, collapse)
        rho, residual, t_end = _steady_propagate(gen, config, grid, grid.atol)
        iterations, used = int(gen.n_evals), method
    else:
        raise ValidationError(f"unknown steady-state method {method!r}")
    a_ss = complex((a.multiply(rho.T)).sum())
    n_ss = float(((a.T @ a).multiply(rho.T)).sum().real)
    return SteadyState(a_ss, n_ss, residual, iterations, used, QuantumState(rho, config))


def compression_point(ensemble, cavity, omega_d, fock_max=10, level_db=3.0,
                      bracket=(0.01, 10.0), eta_linear=1e-3) -> float:
    """Drive multiplier at which |<a>/eta|^2 has dropped ``level_db`` below linear response."""
    grid = SimGrid(0.0, 1.0, 1.0, fock_max=fock_max)

    def gain(m):
        return abs(steady_state_response(ensemble, cavity, m, omega_d, grid).a / m) ** 2

    reference = gain(eta_linear)
    target = 10 ** (-level_db / 10)

    def f(log_m):
        return gain(math.exp(log_m)) / reference - target

    lo, hi = map(math.log, bracket)
    if f(lo) < 0 or f(hi) > 0:
        raise ConvergenceError(f"{level_db} dB compression not bracketed by {bracket}")
    return math.exp(brentq(f, lo, hi, xtol=1e-4))
