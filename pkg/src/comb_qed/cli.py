"""Command-line batch runner: ``comb-qed run|validate <config.json>``.

Exit codes: 0 success, 1 invalid config or request, 2 numerical failure,
3 file-system failure.  Data files carry no wall-clock content, so an
identical config reproduces them byte for byte; timestamps live only in
the summary JSON.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy
from scipy.signal import find_peaks

from . import __version__, device
from .analysis import extract_revivals, overlap_sensitivity, predict_revival_time, spectral_overlap
from .calibration import (currents_for_comb, device_model, flux_to_frequency, load_crosstalk,
                          model_from_dict)
from .config import ExperimentConfig, load_config
from .dynamics import propagate, steady_state_response
from .errors import NumericalError, ValidationError
from .hilbert import bright_eigenvalues
from .model import SimGrid, collective_coupling
from .pulses import fit_pulse_bandwidth, pulse_power_spectrum
from .spectra import map_ridges, spectrum_map, transmission_trace

log = logging.getLogger("comb_qed")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def json_text(doc) -> str:
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- sweep workers
# module-level so they can be shipped to worker processes


def _time_point(args):
    ensemble, cavity, pulse, grid = args
    try:
        tr = propagate(None, ensemble, cavity, pulse, grid)
        return {"times": tr.times, "abs_sq": tr.abs_sq}
    except NumericalError as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}


def _power_point(args):
    ensemble, cavity, eta, freqs, fock_max = args
    grid = SimGrid(0.0, 1.0, 1.0, fock_max=fock_max)
    out = []
    for f in freqs:
        try:
            out.append(steady_state_response(ensemble, cavity, eta, f, grid).a)
        except NumericalError as exc:
            return {"error": f"{type(exc).__name__}: {exc}"}
    return {"a": np.array(out)}


def _map(fn, tasks, jobs):
    """Results in task order regardless of completion order."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------- runners


def _ensemble_doc(ens):
    return None if ens is None else [
        {"label": q.label, "omega": q.omega, "g": q.g, "gamma": q.gamma} for q in ens.qubits]


def run_spectrum_map(cfg: ExperimentConfig, jobs):
    freqs, spacings = cfg.sweep["freqs"], cfg.sweep["spacings"]
    power = spectrum_map(cfg.ensemble, cfg.cavity, freqs, spacings)
    ridges = map_ridges(cfg.ensemble, cfg.cavity, spacings)
    rows = ((dw, f, p) for dw, row in zip(spacings, power) for f, p in zip(freqs, row))
    ridge_rows = ((dw, i, e, w) for dw, es, ws in zip(spacings, ridges.eigenvalues, ridges.cavity_weight)
                  for i, (e, w) in enumerate(zip(es, ws)))
    derived = {"collective_coupling_mhz": collective_coupling(cfg.ensemble)}
    zero = np.flatnonzero(spacings == 0)
    if zero.size:
        row = power[zero[0]]
        idx, _ = find_peaks(row, prominence=0.1 * row.max())
        derived["zero_spacing_peaks_mhz"] = (freqs[idx] - cfg.cavity.omega_c).tolist()
    files = {
        f"{cfg.output_prefix}_map.csv": csv_text(["spacing_mhz", "freq_mhz", "abs_s_sq"], rows),
        f"{cfg.output_prefix}_ridges.csv": csv_text(
            ["spacing_mhz", "state_index", "energy_mhz", "cavity_weight"], ridge_rows),
    }
    return files, derived, []


def run_time_map(cfg: ExperimentConfig, jobs):
    spacings = cfg.sweep["spacings"]
    ensembles = [cfg.ensemble.with_spacing(dw) for dw in spacings]
    results = _map(_time_point, [(e, cfg.cavity, cfg.pulse, cfg.grid) for e in ensembles], jobs)
    rows, failures, predictions = [], [], []
    for i, (dw, e, r) in enumerate(zip(spacings, ensembles, results)):
        tau, spread = predict_revival_time(bright_eigenvalues(e, cfg.cavity))
        predictions.append({"spacing_mhz": dw, "tau_ns": tau, "spread_ns": spread})
        if "error" in r:
            failures.append({"index": i, "spacing_mhz": dw, "error": r["error"]})
            continue
        rows.extend((dw, t, v) for t, v in zip(r["times"], r["abs_sq"]))
    files = {f"{cfg.output_prefix}_map.csv": csv_text(["spacing_mhz", "t_ns", "abs_a_sq"], rows)}
    return files, {"revival_predictions": predictions}, failures


def run_revival(cfg: ExperimentConfig, jobs):
    tr = propagate(None, cfg.ensemble, cfg.cavity, cfg.pulse, cfg.grid)
    tau, spread = predict_revival_time(bright_eigenvalues(cfg.ensemble, cfg.cavity))
    report = extract_revivals(tr, cfg.pulse.end, tau_hint=tau)
    rows = zip(tr.times, tr.a_expect.real, tr.a_expect.imag, tr.abs_sq, tr.photon_number)
    doc = {**report.to_dict(), "tau_predicted": tau, "tau_spread": spread,
           "tau_error": report.tau_mean - tau}
    files = {
        f"{cfg.output_prefix}_trace.csv": csv_text(["t_ns", "re_a", "im_a", "abs_a_sq", "n_photon"], rows),
        f"{cfg.output_prefix}_revivals.json": json_text(doc),
    }
    derived = {"collective_coupling_mhz": collective_coupling(cfg.ensemble), "revivals": doc,
               "integrator": {k: tr.metadata[k] for k in ("n_steps", "n_evals", "atol")},
               "invariants": tr.metadata["invariants"]}
    return files, derived, []


def run_power_sweep(cfg: ExperimentConfig, jobs):
    etas, freqs = cfg.sweep["etas"], cfg.sweep["freqs"]
    results = _map(_power_point, [(cfg.ensemble, cfg.cavity, e, freqs, cfg.sweep["fock_max"])
                                  for e in etas], jobs)
    rows, failures = [], []
    for i, (eta, r) in enumerate(zip(etas, results)):
        if "error" in r:
            failures.append({"index": i, "eta_multiplier": eta, "error": r["error"]})
            continue
        # transmission normalised by the drive, so linear response is eta independent
        gain = np.abs(r["a"] / (eta * cfg.cavity.kappa_load)) ** 2 if eta > 0 else np.full(freqs.size, np.nan)
        rows.extend((eta, f, a.real, a.imag, g) for f, a, g in zip(freqs, r["a"], gain))
    files = {f"{cfg.output_prefix}_map.csv": csv_text(
        ["eta_multiplier", "freq_mhz", "re_a", "im_a", "abs_a_sq_per_eta_sq"], rows)}
    return files, {"fock_max": cfg.sweep["fock_max"]}, failures


def run_calibration(cfg: ExperimentConfig, jobs):
    doc = cfg.raw
    source = doc.get("crosstalk", "device")
    if source == "device":
        model = device_model(doc.get("omega_max"))
    elif isinstance(source, dict):
        model = model_from_dict(source)
    else:
        model = load_crosstalk(source)
    if "targets" in doc:
        targets = [(int(k), float(w)) for k, w in doc["targets"]]
    else:
        freqs = device.COMB_FREQUENCIES[int(doc["comb_spacing"])]
        targets = [(q - 1, w) for q, w in zip(device.COMB_QUBITS, freqs)]
    currents = currents_for_comb(targets, model, fixed=doc.get("fixed", ()),
                                 branch=doc.get("branch", 1), reference=doc.get("reference"))
    achieved = flux_to_frequency(currents, model)
    files = {
        f"{cfg.output_prefix}_currents.csv": csv_text(["line", "current_a"], enumerate(currents)),
        f"{cfg.output_prefix}_frequencies.csv": csv_text(
            ["qubit", "target_mhz", "achieved_mhz"],
            ((k, w, achieved[k]) for k, w in targets)),
    }
    derived = {"max_error_mhz": max(abs(achieved[k] - w) for k, w in targets),
               "dominance_violations": model.dominance_violations()}
    return files, derived, []


def run_pulse_overlap(cfg: ExperimentConfig, jobs):
    freqs = cfg.sweep["freqs"]
    spec = transmission_trace(freqs, cfg.ensemble, cfg.cavity)
    overlap = spectral_overlap(cfg.pulse, spec)
    fit = fit_pulse_bandwidth(cfg.pulse)
    p = pulse_power_spectrum(cfg.pulse, freqs - cfg.pulse.carrier)
    rows = zip(freqs, spec.s_complex.real, spec.s_complex.imag, spec.power, p / p.max())
    files = {f"{cfg.output_prefix}_spectra.csv": csv_text(
        ["freq_mhz", "re_s", "im_s", "abs_s_sq", "pulse_power_norm"], rows)}
    derived = {"overlap": overlap, "overlap_sensitivity": overlap_sensitivity(cfg.pulse, spec),
               "pulse_two_sigma_mhz": fit["two_sigma"], "pulse_sigma_ns": cfg.pulse.sigma,
               "pulse_duration_ns": cfg.pulse.duration}
    return files, derived, []


RUNNERS = {
    "spectrum_map": run_spectrum_map,
    "time_map": run_time_map,
    "revival_run": run_revival,
    "power_sweep": run_power_sweep,
    "calibration_plan": run_calibration,
    "pulse_overlap": run_pulse_overlap,
}


def execute(cfg: ExperimentConfig, out_dir: Path, jobs=1, seed=None):
    """Run ``cfg`` and write its files; returns (exit code, summary dict)."""
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    if seed is not None:
        np.random.seed(seed)
    files, derived, failures = RUNNERS[cfg.kind](cfg, jobs)
    wall = time.perf_counter() - t0
    summary = {
        "kind": cfg.kind,
        "versions": {"comb_qed": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": sys.version.split()[0]},
        "tolerances": None if cfg.grid is None else {
            "rtol": cfg.grid.rtol, "atol": cfg.grid.atol, "fock_max": cfg.grid.fock_max},
        "cavity": vars(cfg.cavity),
        "ensemble": _ensemble_doc(cfg.ensemble),
        "pulse": None if cfg.pulse is None else vars(cfg.pulse),
        "derived": derived,
        "failures": failures,
        "outputs": sorted(files),
        "seed": seed,
        "jobs": jobs,
        "started_at": started,
        "wall_time_s": wall,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(files.items()):
        with open(out_dir / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    with open(out_dir / f"{cfg.output_prefix}_summary.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json_text(summary))
    return (EXIT_NUMERICAL if failures else EXIT_OK), summary


def _setup_logging():
    level = os.environ.get("COMB_QED_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def build_parser():
    p = argparse.ArgumentParser(prog="comb-qed", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out", default=".", help="output directory (default: current)")
    r.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="worker processes for sweeps (default: available cores)")
    r.add_argument("--seed", type=int, default=None)
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"{args.config}: valid {cfg.kind} config")
            return EXIT_OK
        if args.jobs < 1:
            raise ValidationError("--jobs must be >= 1")
        code, summary = execute(cfg, Path(args.out), jobs=args.jobs, seed=args.seed)
        for f in summary["failures"]:
            print(f"point {f['index']} failed: {f['error']}", file=sys.stderr)
        print(f"wrote {len(summary['outputs']) + 1} files to {args.out}")
        return code
    except ValidationError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
