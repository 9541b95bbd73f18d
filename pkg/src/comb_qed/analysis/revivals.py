"""Revival-time extraction from |<a>|^2 traces and its eigenvalue-gap prediction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from ..errors import FitError, ValidationError

#: revivals must stand out by this fraction of the tallest post-pulse peak
PROMINENCE_FRACTION = 0.4
N_REVIVALS = 6


@dataclass
class RevivalReport:
    tau_first: float            # pulse peak to first revival (ns)
    tau_mean: float             # mean gap after dropping the worst outlier (ns)
    peak_times: np.ndarray      # pulse peak first, then revivals
    peak_heights: np.ndarray
    excluded_gaps: list = field(default_factory=list)   # indices into diff(peak_times)
    pulse_to_first: float = np.nan                      # pulse end to first revival (ns)
    envelope_gamma: float = np.nan                      # MHz, from the revival heights

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.peak_times)

    def to_dict(self):
        return {
            "tau_first": float(self.tau_first),
            "tau_mean": float(self.tau_mean),
            "peak_times": [float(v) for v in self.peak_times],
            "peak_heights": [float(v) for v in self.peak_heights],
            "excluded_gaps": list(map(int, self.excluded_gaps)),
            "pulse_to_first": float(self.pulse_to_first),
            "envelope_gamma": float(self.envelope_gamma),
        }


def predict_revival_time(eigenvalues):
    """(tau, spread) in ns from sorted bright dressed-state frequencies in MHz.

    tau = 1 / mean(neighbour gap); spread propagates the gap standard
    deviation to first order, std(gap) / mean(gap)^2.
    """
    e = np.asarray(eigenvalues, dtype=float)
    if e.size < 2:
        raise ValidationError("need at least two eigenvalues")
    gaps = np.diff(np.sort(e))
    mean = gaps.mean()
    if not mean > 0:
        raise ValidationError("eigenvalues must not all coincide")
    return 1e3 / mean, 1e3 * gaps.std() / mean ** 2


def _trace_arrays(trace):
    if hasattr(trace, "abs_sq"):
        return np.asarray(trace.times, float), np.asarray(trace.abs_sq, float)
    t, y = trace
    return np.asarray(t, float), np.asarray(y, float)


def extract_revivals(trace, pulse_end, tau_hint=None, prominence=PROMINENCE_FRACTION,
                     n_revivals=N_REVIVALS) -> RevivalReport:
    """Locate the pulse peak and the following revivals and estimate their period.

    The pulse peak is the maximum at or before ``pulse_end``.  Revivals are
    local maxima after ``pulse_end`` whose prominence exceeds ``prominence``
    times the tallest of them, at least ``tau_hint / 4`` apart.  Without a hint
    the separation is taken from a first unconstrained pass.  Of the gaps
    between the pulse peak and the first ``n_revivals`` revivals, the one
    furthest from the median is dropped (the beat-shifted revival) and the
    rest averaged.
    """
    t, y = _trace_arrays(trace)
    if t.size < 3:
        raise FitError("trace too short")
    dt = t[1] - t[0]
    pre = t <= pulse_end
    post = ~pre
    if not pre.any() or post.sum() < 3:
        raise FitError("trace must cover both the pulse and the time after it")
    i0 = int(np.argmax(np.where(pre, y, -np.inf)))
    tail = np.where(post, y, 0.0)
    top = tail[post].max()
    if not top > 0:
        raise FitError("no signal after the pulse")

    def detect(distance):
        kw = {"prominence": prominence * top}
        if distance:
            kw["distance"] = max(1, int(distance / dt))
        idx, _ = find_peaks(tail, **kw)
        return idx[t[idx] > pulse_end]

    idx = detect(tau_hint / 4 if tau_hint else None)
    if tau_hint is None and idx.size >= 2:
        idx = detect(np.median(np.diff(t[np.r_[i0, idx]])) / 4)
    idx = idx[:n_revivals]
    if idx.size + 1 < 3:
        raise FitError(f"found {idx.size} revival peaks, need at least 2")

    times = t[np.r_[i0, idx]]
    heights = y[np.r_[i0, idx]]
    gaps = np.diff(times)
    excluded = []
    keep = np.ones(gaps.size, bool)
    if gaps.size >= 3:
        worst = int(np.argmax(np.abs(gaps - np.median(gaps))))
        keep[worst] = False
        excluded.append(worst)

    rev_t, rev_h = times[1:], heights[1:]
    if rev_t.size >= 2 and np.all(rev_h > 0):
        slope = np.polyfit(rev_t, np.log(rev_h), 1)[0]
        env_gamma = -slope / (2e-3 * np.pi)
    else:
        env_gamma = np.nan

    return RevivalReport(tau_first=float(gaps[0]), tau_mean=float(gaps[keep].mean()),
                         peak_times=times, peak_heights=heights, excluded_gaps=excluded,
                         pulse_to_first=float(times[1] - pulse_end), envelope_gamma=float(env_gamma))
