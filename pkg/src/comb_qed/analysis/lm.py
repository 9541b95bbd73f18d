"""Levenberg-Marquardt least squares with box bounds.

The engine behind every fit in the package.  ``model(x, *params)`` follows
the ``curve_fit`` calling convention.  Bounds are enforced by projecting
each trial step onto the box; components pinned at an active bound are
excluded from the gradient test.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..errors import FitError

_EPS = np.finfo(float).eps


@dataclass
class FitResult:
    params: dict
    residual_norm: float            # sum of squared residuals
    covariance: np.ndarray | None
    converged: bool
    iterations: int
    gradient_norm: float = np.nan   # scaled, see fit_least_squares
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def names(self):
        return tuple(self.params)

    @property
    def values(self) -> np.ndarray:
        return np.array(list(self.params.values()), dtype=float)

    @property
    def stderr(self) -> dict:
        if self.covariance is None:
            return {k: np.nan for k in self.params}
        d = np.sqrt(np.clip(np.diag(self.covariance), 0, None))
        return dict(zip(self.params, d))

    def __getitem__(self, name):
        if name in self.params:
            return self.params[name]
        return self.extra[name]

    def to_dict(self):
        return {
            "params": {k: float(v) for k, v in self.params.items()},
            "stderr": {k: float(v) for k, v in self.stderr.items()},
            "residual_norm": float(self.residual_norm),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "gradient_norm": float(self.gradient_norm),
            "message": self.message,
            **{k: (float(v) if np.isscalar(v) else v) for k, v in self.extra.items()},
        }


def _jacobian(fun, p, f0, lo, hi, central):
    m, n = f0.size, p.size
    jac = np.empty((m, n))
    for j in range(n):
        h = np.sqrt(_EPS) * max(abs(p[j]), 1.0) if not central else _EPS ** (1 / 3) * max(abs(p[j]), 1.0)
        up, dn = p.copy(), p.copy()
        if central and p[j] + h <= hi[j] and p[j] - h >= lo[j]:
            up[j] += h
            dn[j] -= h
            jac[:, j] = (fun(up) - fun(dn)) / (2 * h)
            continue
        # one-sided step pointing into the box
        if p[j] + h > hi[j]:
            h = -h
        up[j] += h
        jac[:, j] = (fun(up) - f0) / h
    return jac


def _scaled_gradient(jac, res, p, lo, hi, floor=0.0):
    g = jac.T @ res
    # components held at a bound with the descent direction pointing outward do not count
    at_lo = (p <= lo) & (g < 0)
    at_hi = (p >= hi) & (g > 0)
    g = np.where(at_lo | at_hi, 0.0, g)
    # a residual already at the data's rounding level counts as zero
    rnorm = max(np.linalg.norm(res), floor)
    if rnorm == 0:
        return 0.0
    cnorm = np.linalg.norm(jac, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(cnorm > 0, np.abs(g) / (cnorm * rnorm), 0.0)
    return float(s.max()) if s.size else 0.0


def fit_least_squares(model: Callable, x, y, init, bounds=None, names: Sequence[str] | None = None,
                      weights=None, jac: Callable | None = None, max_iter=500,
                      xtol=1e-12, ftol=1e-15, gtol=1e-10, central=True) -> FitResult:
    """Minimise sum (w * (y - model(x, *p)))^2 by damped Gauss-Newton.

    ``init`` may be a mapping (its keys become parameter names) or a sequence.
    ``bounds`` is ``(lower, upper)``; either side may be scalar or None.
    ``jac(x, *p)`` optionally returns the (m, n) model Jacobian.

    ``converged`` is set when the scaled gradient max_j |J_j . r| / (|J_j| |r|)
    is below ``sqrt(gtol)`` at the returned point; |r| is floored at
    sqrt(eps) (|y| + |model(init)|) so that an exact fit counts as converged. ``iterations``
    counts accepted steps.
    """
    if isinstance(init, Mapping):
        names = tuple(init)
        p = np.array([float(init[k]) for k in names])
    else:
        p = np.array(init, dtype=float).ravel()
        names = tuple(names) if names is not None else tuple(f"p{i}" for i in range(p.size))
    if len(names) != p.size:
        raise FitError("parameter names and initial values differ in length")
    if not np.all(np.isfinite(p)):
        raise FitError("initial parameters must be finite")
    x = np.asarray(x)
    y = np.asarray(y, dtype=float).ravel()
    if y.size < p.size:
        raise FitError(f"{y.size} samples cannot determine {p.size} parameters")
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float).ravel()

    lo, hi = np.full(p.size, -np.inf), np.full(p.size, np.inf)
    if bounds is not None:
        blo, bhi = bounds
        if blo is not None:
            lo = np.broadcast_to(np.asarray(blo, dtype=float), p.shape).copy()
        if bhi is not None:
            hi = np.broadcast_to(np.asarray(bhi, dtype=float), p.shape).copy()
    if np.any(lo > hi):
        raise FitError("lower bound above upper bound")
    p = np.clip(p, lo, hi)

    def residual(q):
        return w * (y - np.asarray(model(x, *q), dtype=float).ravel())

    def jacobian(q, r):
        if jac is not None:
            return -w[:, None] * np.asarray(jac(x, *q), dtype=float).reshape(y.size, q.size)
        return _jacobian(residual, q, r, lo, hi, central)

    r = residual(p)
    if not np.all(np.isfinite(r)):
        raise FitError("model is not finite at the initial parameters")
    cost = float(r @ r)
    J = jacobian(p, r)
    # rounding level of the residual, from the data and the model at the start
    scale = np.linalg.norm(w * y) + np.linalg.norm(w * y - r)
    floor = np.sqrt(_EPS) * scale
    lam = None
    n_accepted = 0
    message = "maximum iterations reached"
    it = 0
    for it in range(1, max_iter + 1):
        gnorm = _scaled_gradient(J, r, p, lo, hi, floor)
        if gnorm <= gtol:
            message = "gradient tolerance reached"
            break
        if np.sqrt(cost) <= 100 * _EPS * scale:
            message = "residual at rounding level"
            break
        JTJ = J.T @ J
        d = np.diag(JTJ).copy()
        d[d <= 0] = max(d.max(initial=0.0), 1.0) * 1e-12
        improved = False
        # the first trial is an undamped Gauss-Newton step
        if lam is None:
            lam = 0.0
        while lam < 1e30:
            A = np.vstack([J, np.diag(np.sqrt(lam * d))])
            b = np.concatenate([-r, np.zeros(p.size)])
            step, *_ = np.linalg.lstsq(A, b, rcond=None)
            trial = np.clip(p + step, lo, hi)
            actual = trial - p
            if np.any(actual):
                r_new = residual(trial)
                cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
                if cost_new < cost:
                    improved = True
                    break
            lam = 1e-3 * d.max() if lam == 0 else lam * 10.0
        if not improved:
            message = "no further decrease possible"
            break
        small_step = np.linalg.norm(actual) <= xtol * (np.linalg.norm(p) + xtol)
        small_drop = (cost - cost_new) <= ftol * cost
        p, r, cost = trial, r_new, cost_new
        n_accepted += 1
        lam = lam / 10.0
        J = jacobian(p, r)
        if small_step:
            message = "parameter step below tolerance"
            break
        if small_drop:
            message = "cost reduction below tolerance"
            break

    gnorm = _scaled_gradient(J, r, p, lo, hi, floor)
    converged = bool(cost == 0.0 or gnorm <= max(np.sqrt(gtol), gtol))

    covariance = None
    m, n = y.size, p.size
    JTJ = J.T @ J
    try:
        if np.linalg.cond(JTJ) < 1e14:
            s2 = cost / (m - n) if m > n else np.nan
            covariance = np.linalg.inv(JTJ) * s2
        else:
            message += "; singular Jacobian, covariance unavailable"
    except np.linalg.LinAlgError:
        message += "; singular Jacobian, covariance unavailable"

    return FitResult(params=dict(zip(names, map(float, p))), residual_norm=cost,
                     covariance=covariance, converged=converged, iterations=n_accepted,
                     gradient_norm=gnorm, message=message)
