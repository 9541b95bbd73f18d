"""Flux tuning: bias currents to qubit frequencies and back, and crosstalk fitting.

Each line current I_j shifts every qubit's normalised flux by I_j * m[j, k];
contributions add linearly and the qubit sits at
``omega_max_k * sqrt(|cos(pi * phi_k - pi * phi_off_k)|)``.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis.lm import fit_least_squares
from .errors import (FitError, InfeasibleTargetError, NumericalError, RankDeficientError,
                     ValidationError)

log = logging.getLogger(__name__)

#: currents_for_comb verifies its own solution to this accuracy (MHz)
ROUND_TRIP_TOL = 1e-6
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class CrosstalkModel:
    """``m[j, k]``: inverse flux quanta (1/A) from line j to qubit k."""

    m: np.ndarray
    phi_off: np.ndarray
    omega_max: np.ndarray
    local_lines: dict = field(default_factory=dict)   # line -> qubit it is wired to

    def __post_init__(self):
        m = np.array(self.m, dtype=float)
        phi = np.array(self.phi_off, dtype=float).ravel()
        wmax = np.array(self.omega_max, dtype=float).ravel()
        if m.ndim != 2:
            raise ValidationError("crosstalk matrix must be 2-D")
        if phi.size != m.shape[1] or wmax.size != m.shape[1]:
            raise ValidationError("phi_off and omega_max need one entry per qubit (matrix column)")
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(phi)) and np.all(np.isfinite(wmax))):
            raise ValidationError("crosstalk model entries must be finite")
        if np.any(wmax <= 0):
            raise ValidationError("omega_max must be > 0 for every qubit")
        for arr in (m, phi, wmax):
            arr.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "phi_off", phi)
        object.__setattr__(self, "omega_max", wmax)
        object.__setattr__(self, "local_lines", {int(j): int(k) for j, k in dict(self.local_lines).items()})
        bad = self.dominance_violations()
        if bad:
            warnings.warn(f"local lines do not dominate the crosstalk for qubits {bad}",
                          RuntimeWarning, stacklevel=3)

    @property
    def n_lines(self):
        return self.m.shape[0]

    @property
    def n_qubits(self):
        return self.m.shape[1]

    def dominance_violations(self):
        """Qubits whose local line does not outweigh all other local lines combined."""
        bad = []
        lines = list(self.local_lines)
        for j, k in self.local_lines.items():
            others = sum(abs(self.m[i, k]) for i in lines if i != j)
            if not abs(self.m[j, k]) > others:
                bad.append(k)
        return bad

    def flux(self, currents) -> np.ndarray:
        currents = np.asarray(currents, dtype=float)
        if currents.shape != (self.n_lines,):
            raise ValidationError(f"need {self.n_lines} line currents, got shape {currents.shape}")
        return currents @ self.m

    def to_dict(self):
        return {"matrix": self.m.tolist(), "phi_off": self.phi_off.tolist(),
                "omega_max": self.omega_max.tolist(),
                "local_lines": {str(j): k for j, k in self.local_lines.items()}}


def model_from_dict(doc) -> CrosstalkModel:
    """Build a model from ``{"matrix", "phi_off", "omega_max"[, "local_lines"]}``."""
    try:
        return CrosstalkModel(np.asarray(doc["matrix"], dtype=float), np.asarray(doc["phi_off"], dtype=float),
                              np.asarray(doc["omega_max"], dtype=float),
                              {int(j): int(k) for j, k in doc.get("local_lines", {}).items()})
    except KeyError as exc:
        raise ValidationError(f"crosstalk document lacks field {exc}") from None


def load_crosstalk(path) -> CrosstalkModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def device_model(omega_max=None) -> CrosstalkModel:
    """Crosstalk matrix and offsets measured on the seven-qubit chip."""
    from . import device

    wmax = device.SYNTHETIC_OMEGA_MAX if omega_max is None else omega_max
    return CrosstalkModel(device.CROSSTALK_MATRIX, device.FLUX_OFFSETS, wmax, device.LOCAL_LINES)


def _frequency(phi, phi_off, omega_max):
    return omega_max * np.sqrt(np.abs(np.cos(np.pi * (phi - phi_off))))


def flux_to_frequency(currents, model: CrosstalkModel, k=None):
    """Qubit frequency (MHz) for the given line currents (A); all qubits when ``k`` is None."""
    phi = model.flux(currents)
    freqs = _frequency(phi, model.phi_off, model.omega_max)
    return freqs if k is None else float(freqs[k])


def _target_flux(k, omega, model, branch, phi_ref):
    wmax = model.omega_max[k]
    if omega > wmax:
        raise InfeasibleTargetError(
            f"qubit {k}: target {omega} MHz exceeds omega_max {wmax} MHz", qubit=k)
    if omega < 0:
        raise InfeasibleTargetError(f"qubit {k}: negative target frequency", qubit=k)
    u = math.acos(min(1.0, (omega / wmax) ** 2)) / math.pi     # in [0, 1/2]
    if phi_ref is None:
        return model.phi_off[k] + branch * u
    # among all solutions off + s*u + n pick the one nearest the operating point
    base = phi_ref - model.phi_off[k]
    cands = [s * u + round(base - s * u) for s in (1.0, -1.0)]
    return model.phi_off[k] + min(cands, key=lambda c: abs(c - base))


def currents_for_comb(targets, model: CrosstalkModel, fixed=(), branch=1, reference=None):
    """Line currents (A) that place each target qubit at its target frequency.

    ``targets`` is a list of ``(qubit, omega_MHz)``, ``fixed`` a list of
    ``(line, current)`` held constant.  Without ``reference`` the principal
    branch ``phi - phi_off = branch * arccos((w / w_max)^2) / pi`` is used;
    with a reference current vector each qubit keeps the flux solution closest
    to where it already is, and the free lines move by the smallest correction.
    """
    targets = [(int(k), float(w)) for k, w in targets]
    if not targets:
        raise ValidationError("no target frequencies given")
    if branch not in (1, -1):
        raise ValidationError("branch must be +1 or -1")
    qubits = [k for k, _ in targets]
    if len(set(qubits)) != len(qubits):
        raise ValidationError("each qubit may be targeted once")
    fixed = {int(j): float(i) for j, i in fixed}
    free = [j for j in range(model.n_lines) if j not in fixed]
    if len(free) < len(targets):
        raise ValidationError(f"{len(targets)} targets need at least as many free lines, have {len(free)}")

    start = np.zeros(model.n_lines) if reference is None else np.array(reference, dtype=float)
    for j, i in fixed.items():
        start[j] = i
    phi_now = model.flux(start)
    phi_goal = np.array([
        _target_flux(k, w, model, branch, None if reference is None else phi_now[k])
        for k, w in targets])

    A = model.m[np.ix_(free, qubits)].T           # targets x free lines
    sv = np.linalg.svd(A, compute_uv=False)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
    if sv[-1] <= RANK_RTOL * sv[0]:
        raise RankDeficientError(
            f"free-line crosstalk submatrix is rank deficient (condition number {cond:.3g})", cond)
    delta, *_ = np.linalg.lstsq(A, phi_goal - phi_now[qubits], rcond=None)
    currents = start.copy()
    currents[free] += delta

    got = flux_to_frequency(currents, model)[qubits]
    err = np.abs(got - np.array([w for _, w in targets]))
    if err.max() > ROUND_TRIP_TOL:
        raise NumericalError(f"current solution misses targets by up to {err.max():.3g} MHz "
                             f"(condition number {cond:.3g})")
    log.debug("currents_for_comb: condition number %.3g, max error %.2e MHz", cond, err.max())
    return currents


# ---------------------------------------------------------------- fitting


@dataclass
class CrosstalkEntry:
    line: int
    qubit: int
    m: float
    phi_off: float
    m_stderr: float
    uncertain: bool
    message: str = ""


def _fit_line(currents, freqs, omega_max, flat_tol):
    """(m >= 0, phi_off mod 1, stderr, flat) for one swept line seen by one qubit."""
    span = currents.max() - currents.min()
    if np.ptp(freqs) <= flat_tol:
        return 0.0, np.nan, np.inf, True
    if span <= 0:
        raise FitError("current sweep has zero span")
    # count turning points to bound how many flux periods the sweep crosses
    d = np.sign(np.diff(freqs))
    turns = int(np.count_nonzero(d[1:] * d[:-1] < 0))
    m_hi = (turns / 2 + 3) / span
    # (w / w_max)^4 = cos^2(pi (m I - phi)), so z below is a pure sinusoid in I;
    # fitting it avoids the square-root cusps at the cosine zeros
    z = 2.0 * (freqs / omega_max) ** 4 - 1.0
    m_grid = np.linspace(0, m_hi, max(200, 40 * (turns + 3)))[1:]
    phi_grid = np.linspace(0, 1, 64, endpoint=False)
    best = (np.inf, None)
    for m in m_grid:
        pred = np.cos(2 * np.pi * (m * currents[None, :] - phi_grid[:, None]))
        sse = ((pred - z[None, :]) ** 2).sum(axis=1)
        i = int(np.argmin(sse))
        if sse[i] < best[0]:
            best = (sse[i], (m, phi_grid[i]))
    m0, p0 = best[1]

    res = fit_least_squares(lambda x, m, p: np.cos(2 * np.pi * (m * x - p)), currents, z,
                            {"m": m0, "phi_off": p0})
    m, phi = res.params["m"], res.params["phi_off"]
    if m < 0:
        m, phi = -m, -phi
    if m * span < 0.5:
        raise FitError(f"sweep covers {m * span:.2f} flux periods; need at least half a period")
    return m, phi % 1.0, res.stderr["m"], False


def _wrap(phi):
    """Map to (-1/2, 1/2]."""
    return -((-phi + 0.5) % 1.0 - 0.5)


def fit_crosstalk(spectroscopy, omega_max, n_lines=7, phi_off_prior=None, local_lines=None,
                  reference_lines=None, base: CrosstalkModel | None = None, flat_tol=None,
                  return_entries=False):
    """Assemble a crosstalk model from single-line spectroscopy sweeps.

    ``spectroscopy`` is a list of ``(line, qubit, currents, frequencies)``
    with the other lines at zero current.  Each sweep is fitted with the
    single-line frequency model; only ``|m|`` and ``phi_off mod 1`` follow
    from one sweep, so signs are fixed per qubit by a convention: the
    reference line (``reference_lines[qubit]``, else the qubit's local line,
    else the last line) couples with positive sign, and every other line
    takes the sign that makes its offset agree with the reference.  With
    ``phi_off_prior`` the prior offsets pick the signs instead.  Entries not
    covered by a sweep are taken from ``base`` (zero otherwise).
    """
    omega_max = np.asarray(omega_max, dtype=float).ravel()
    n_qubits = omega_max.size
    local_lines = dict(local_lines or {})
    local_of = {k: j for j, k in local_lines.items()}
    reference_lines = dict(reference_lines or {})
    m = np.zeros((n_lines, n_qubits)) if base is None else np.array(base.m, dtype=float)
    phi_off = np.zeros(n_qubits) if base is None else np.array(base.phi_off, dtype=float)

    raw = {}
    for line, qubit, currents, freqs in spectroscopy:
        line, qubit = int(line), int(qubit)
        currents = np.asarray(currents, dtype=float)
        freqs = np.asarray(freqs, dtype=float)
        tol = 1e-9 * omega_max[qubit] if flat_tol is None else flat_tol
        raw[line, qubit] = _fit_line(currents, freqs, omega_max[qubit], tol)

    entries = []
    for k in range(n_qubits):
        fitted = {j: v for (j, q), v in raw.items() if q == k}
        if not fitted:
            continue
        informative = [j for j, v in fitted.items() if not v[3]]
        if phi_off_prior is not None:
            ref_phi = float(phi_off_prior[k])
        elif informative:
            ref = reference_lines.get(k, local_of.get(k, n_lines - 1))
            if ref not in informative:
                ref = informative[0]
                log.warning("qubit %d: reference line not swept, using line %d for the sign", k, ref)
            ref_phi = fitted[ref][1]
        else:
            ref_phi = phi_off[k]
        ambiguous = abs(_wrap(2 * ref_phi)) < 1e-3     # phi_off near 0 or 1/2: sign undecidable
        phis = []
        for j, (mj, pj, err, flat) in fitted.items():
            if flat:
                m[j, k] = 0.0
                entries.append(CrosstalkEntry(j, k, 0.0, np.nan, np.inf, True, "flat response"))
                continue
            # +m pairs with +p, -m with -p; keep whichever matches the reference offset
            plus = abs(_wrap(pj - ref_phi))
            minus = abs(_wrap(-pj - ref_phi))
            sign = 1.0 if plus <= minus else -1.0
            m[j, k] = sign * mj
            phis.append(_wrap(sign * pj))
            entries.append(CrosstalkEntry(j, k, sign * mj, _wrap(sign * pj), err, ambiguous,
                                          "sign ambiguous" if ambiguous else ""))
        if phis:
            phi_off[k] = phis[0] if phi_off_prior is None and len(phis) == 1 else _circular_mean(phis)

    model = CrosstalkModel(m, phi_off, omega_max, local_lines)
    return (model, entries) if return_entries else model


def _circular_mean(phis):
    z = np.exp(2j * np.pi * np.asarray(phis)).mean()
    return _wrap(np.angle(z) / (2 * np.pi))
