"""Experiment configuration documents (JSON) and their validation.

Everything a run needs is checked here, before any computation starts.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import device
from .errors import ValidationError
from .model import CavityParams, EnsembleSpec, PulseSpec, QubitSpec, SimGrid, build_comb
from .pulses import DEFAULT_N_SIGMA, PULSE_TWO_SIGMA_F, gaussian_with_bandwidth

KINDS = ("spectrum_map", "time_map", "revival_run", "power_sweep", "calibration_plan",
         "pulse_overlap")


@dataclass
class ExperimentConfig:
    kind: str
    cavity: CavityParams
    ensemble: EnsembleSpec | None = None
    pulse: PulseSpec | None = None
    grid: SimGrid | None = None
    sweep: dict = field(default_factory=dict)
    output_prefix: str = "run"
    options: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _require(doc, key, where):
    if key not in doc:
        raise ValidationError(f"{where}: missing field {key!r}")
    return doc[key]


def _number(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{name} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite")
    return float(value)


def parse_grid_spec(spec, name) -> np.ndarray:
    """A list of numbers or ``{"start", "stop", "num"}``."""
    if isinstance(spec, dict):
        start = _number(_require(spec, "start", name), f"{name}.start")
        stop = _number(_require(spec, "stop", name), f"{name}.stop")
        num = _require(spec, "num", name)
        if not isinstance(num, int) or num < 1:
            raise ValidationError(f"{name}.num must be a positive integer")
        values = np.linspace(start, stop, num)
    elif isinstance(spec, (list, tuple)):
        values = np.array([_number(v, name) for v in spec], dtype=float)
    else:
        raise ValidationError(f"{name} must be a list or a start/stop/num object")
    if values.size == 0:
        raise ValidationError(f"{name} is empty")
    d = np.diff(values)
    if values.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
        raise ValidationError(f"{name} must be strictly monotone")
    return values


def parse_cavity(doc) -> CavityParams:
    if doc is None:
        return device.CAVITY
    keys = ("omega_c", "kappa_e1", "kappa_e2", "kappa_i", "kappa_load")
    return CavityParams(**{k: _number(_require(doc, k, "cavity"), f"cavity.{k}") for k in keys})


def parse_ensemble(doc, comb_doc, cavity) -> EnsembleSpec | None:
    if doc is not None and comb_doc is not None:
        raise ValidationError("give either 'ensemble' or 'comb', not both")
    if doc is not None:
        qubits = []
        for i, q in enumerate(_require(doc, "qubits", "ensemble")):
            qubits.append(QubitSpec(omega=_number(_require(q, "omega", f"qubit {i}"), "omega"),
                                    g=_number(_require(q, "g", f"qubit {i}"), "g"),
                                    gamma=_number(q.get("gamma", 0.0), "gamma"),
                                    label=q.get("label", i)))
        return EnsembleSpec(tuple(qubits), _number(doc.get("comb_spacing", 0.0), "comb_spacing"))
    if comb_doc is not None:
        spacing = _number(_require(comb_doc, "spacing", "comb"), "comb.spacing")
        if comb_doc.get("prepared", False):
            key = int(round(spacing))
            if key not in device.COMB_FREQUENCIES or key != spacing:
                raise ValidationError(
                    f"no prepared comb at {spacing} MHz; have {sorted(device.COMB_FREQUENCIES)}")
            return device.prepared_comb(key)
        couplings = comb_doc.get("couplings", device.comb_couplings())
        gammas = comb_doc.get("gammas", device.comb_decays())
        center = _number(comb_doc.get("center", cavity.omega_c), "comb.center")
        return build_comb(center, spacing, [_number(g, "coupling") for g in couplings],
                          [_number(g, "gamma") for g in gammas], comb_doc.get("labels"))
    return None


def parse_pulse(doc, cavity) -> PulseSpec | None:
    if doc is None:
        return None
    eta = _number(_require(doc, "eta_peak", "pulse"), "pulse.eta_peak")
    carrier = _number(doc.get("carrier", cavity.omega_c), "pulse.carrier")
    start = _number(doc.get("start", 0.0), "pulse.start")
    shape = doc.get("shape", "gaussian")
    if shape == "gaussian" and "sigma" not in doc:
        two_sigma = _number(doc.get("two_sigma_f", PULSE_TWO_SIGMA_F), "pulse.two_sigma_f")
        if two_sigma <= 0:
            raise ValidationError("pulse.two_sigma_f must be > 0")
        n_sigma = _number(doc.get("n_sigma", DEFAULT_N_SIGMA), "pulse.n_sigma")
        return gaussian_with_bandwidth(two_sigma, eta, carrier, start=start, n_sigma=n_sigma)
    sigma = doc.get("sigma")
    return PulseSpec(eta_peak=eta, duration=_number(_require(doc, "duration", "pulse"), "pulse.duration"),
                     carrier=carrier, shape=shape,
                     sigma=None if sigma is None else _number(sigma, "pulse.sigma"), start=start)


def parse_sim_grid(doc) -> SimGrid | None:
    if doc is None:
        return None
    kw = {k: _number(_require(doc, k, "grid"), f"grid.{k}") for k in ("t_start", "t_end", "dt_out")}
    if "fock_max" in doc:
        if not isinstance(doc["fock_max"], int):
            raise ValidationError("grid.fock_max must be an integer")
        kw["fock_max"] = doc["fock_max"]
    for k in ("rtol", "atol"):
        if k in doc:
            kw[k] = _number(doc[k], f"grid.{k}")
    return SimGrid(**kw)


_NEEDS = {
    "spectrum_map": ("ensemble",),
    "time_map": ("ensemble", "pulse", "grid"),
    "revival_run": ("ensemble", "pulse", "grid"),
    "power_sweep": ("ensemble",),
    "calibration_plan": (),
    "pulse_overlap": ("ensemble", "pulse"),
}


def parse_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object")
    kind = _require(doc, "kind", "config")
    if kind not in KINDS:
        raise ValidationError(f"unknown kind {kind!r}; expected one of {KINDS}")
    cavity = parse_cavity(doc.get("cavity"))
    cfg = ExperimentConfig(
        kind=kind, cavity=cavity,
        ensemble=parse_ensemble(doc.get("ensemble"), doc.get("comb"), cavity),
        pulse=parse_pulse(doc.get("pulse"), cavity),
        grid=parse_sim_grid(doc.get("grid")),
        sweep=dict(doc.get("sweep", {})),
        output_prefix=str(doc.get("output_prefix", kind)),
        options=dict(doc.get("options", {})),
        raw=doc)
    for need in _NEEDS[kind]:
        if getattr(cfg, need) is None:
            raise ValidationError(f"{kind} config needs '{need if need != 'ensemble' else 'ensemble or comb'}'")
    if "/" in cfg.output_prefix or "\\" in cfg.output_prefix or cfg.output_prefix in ("", ".", ".."):
        raise ValidationError("output_prefix must be a plain file stem")
    _validate_sweep(cfg)
    _check_truncation(cfg)
    return cfg


def _check_truncation(cfg):
    """Apply the Fock-cutoff guard up front so nothing runs on a doomed config."""
    from .dynamics import check_truncation, pulse_area
    from .hilbert import HilbertConfig

    n = 0 if cfg.ensemble is None else len(cfg.ensemble)
    if cfg.kind == "power_sweep":
        check_truncation(HilbertConfig(n, cfg.sweep["fock_max"]), float(np.max(cfg.sweep["etas"])))
    elif cfg.kind in ("time_map", "revival_run"):
        from .model import RAD_PER_NS
        check_truncation(HilbertConfig(n, cfg.grid.fock_max),
                         RAD_PER_NS * pulse_area(cfg.pulse, cfg.cavity.kappa_load))


def _validate_sweep(cfg):
    s = cfg.sweep
    if cfg.kind == "spectrum_map":
        cfg.sweep["freqs"] = parse_grid_spec(_require(s, "freqs", "sweep"), "sweep.freqs")
        cfg.sweep["spacings"] = parse_grid_spec(_require(s, "spacings", "sweep"), "sweep.spacings")
    elif cfg.kind == "time_map":
        cfg.sweep["spacings"] = parse_grid_spec(_require(s, "spacings", "sweep"), "sweep.spacings")
    elif cfg.kind == "power_sweep":
        cfg.sweep["etas"] = parse_grid_spec(_require(s, "etas", "sweep"), "sweep.etas")
        cfg.sweep["freqs"] = parse_grid_spec(_require(s, "freqs", "sweep"), "sweep.freqs")
        if np.any(cfg.sweep["etas"] < 0):
            raise ValidationError("sweep.etas must be >= 0")
        fock = s.get("fock_max", cfg.grid.fock_max if cfg.grid else 10)
        if not isinstance(fock, int) or fock < 1:
            raise ValidationError("sweep.fock_max must be a positive integer")
        cfg.sweep["fock_max"] = fock
    elif cfg.kind == "pulse_overlap":
        cfg.sweep["freqs"] = parse_grid_spec(
            s.get("freqs", {"start": cfg.cavity.omega_c - 600, "stop": cfg.cavity.omega_c + 600,
                            "num": 24001}), "sweep.freqs")
    elif cfg.kind == "calibration_plan":
        doc = cfg.raw
        if "targets" not in doc and "comb_spacing" not in doc:
            raise ValidationError("calibration_plan needs 'targets' or 'comb_spacing'")
        if "comb_spacing" in doc and int(doc["comb_spacing"]) not in device.COMB_FREQUENCIES:
            raise ValidationError(f"no prepared comb at {doc['comb_spacing']} MHz")
        if doc.get("branch", 1) not in (1, -1):
            raise ValidationError("branch must be +1 or -1")


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None
    return parse_config(doc)
