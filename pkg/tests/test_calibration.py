import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from comb_qed import device
from comb_qed.calibration import (CrosstalkModel, currents_for_comb, device_model, fit_crosstalk,
                                  flux_to_frequency, load_crosstalk, model_from_dict)
from comb_qed.errors import FitError, InfeasibleTargetError, RankDeficientError, ValidationError

COMB_COLUMNS = [k - 1 for k in device.COMB_QUBITS]


def diagonal_model(n=3, m=400.0, phi_off=0.0, wmax=6400.0):
    return CrosstalkModel(np.eye(n) * m, np.full(n, phi_off), np.full(n, wmax))


def test_sweet_spot():
    assert flux_to_frequency(np.zeros(3), diagonal_model(), 1) == 6400.0


def test_cosine_zero():
    model = diagonal_model(m=1.0, phi_off=0.1)
    # cos(pi/2) is ~1e-16 in floating point and the square root lifts it to ~1e-8 of omega_max
    assert flux_to_frequency([0.0, 0.6, 0.0], model, 1) == pytest.approx(0.0, abs=1e-3)


def test_periodic_in_one_flux_quantum():
    model = diagonal_model(m=437.0, phi_off=-0.26)
    i = np.array([0.0, 3.1e-4, 0.0])
    shifted = i + np.array([0.0, 1 / 437.0, 0.0])
    assert flux_to_frequency(shifted, model, 1) == pytest.approx(flux_to_frequency(i, model, 1), abs=1e-9)


@given(st.floats(-2, 2), st.integers(0, 6))
def test_symmetric_about_offset(phi, k):
    model = device_model()
    off = model.phi_off[k]
    w = model.omega_max[k] * math.sqrt(abs(math.cos(math.pi * (phi - off))))
    w_mirror = model.omega_max[k] * math.sqrt(abs(math.cos(math.pi * (-phi + 2 * off - off))))
    assert w == pytest.approx(w_mirror, abs=1e-9)
    # the same through the full model: currents that produce phi and its mirror on qubit k
    e = np.zeros(7)
    e[k] = 1.0
    solve = np.linalg.solve(model.m.T, e)
    assert flux_to_frequency(phi * solve, model, k) == pytest.approx(
        flux_to_frequency((2 * off - phi) * solve, model, k), abs=1e-6)


@pytest.mark.parametrize("spacing", sorted(device.COMB_FREQUENCIES))
def test_round_trip_for_prepared_combs(spacing):
    model = device_model()
    targets = list(zip(COMB_COLUMNS, device.COMB_FREQUENCIES[spacing]))
    currents = currents_for_comb(targets, model)
    got = flux_to_frequency(currents, model)[COMB_COLUMNS]
    assert np.abs(got - device.COMB_FREQUENCIES[spacing]).max() < 0.1


def test_single_target_closed_form():
    model = CrosstalkModel(np.array([[400.0]]), [0.0], [6400.0])
    omega = 5878.0
    i = currents_for_comb([(0, omega)], model)
    assert i[0] == pytest.approx(math.acos((omega / 6400.0) ** 2) / (math.pi * 400.0), rel=1e-12)
    i_neg = currents_for_comb([(0, omega)], model, branch=-1)
    assert i_neg[0] == pytest.approx(-i[0], rel=1e-12)


def test_fixed_point():
    model = device_model()
    start = np.array([1e-4, -2e-4, 3e-4, 0.5e-4, -1e-4, 2e-4, 1e-6])
    now = flux_to_frequency(start, model)
    targets = [(k, now[k]) for k in COMB_COLUMNS]
    out = currents_for_comb(targets, model, reference=start)
    np.testing.assert_allclose(out, start, atol=1e-12)


def test_fixed_lines_held():
    model = device_model()
    targets = list(zip(COMB_COLUMNS, device.COMB_FREQUENCIES[50]))
    out = currents_for_comb(targets, model, fixed=[(6, 2e-6)])
    assert out[6] == 2e-6
    np.testing.assert_allclose(flux_to_frequency(out, model)[COMB_COLUMNS], device.COMB_FREQUENCIES[50],
                               atol=1e-6)


def test_infeasible_target_names_qubit():
    with pytest.raises(InfeasibleTargetError) as exc:
        currents_for_comb([(2, 7000.0)], device_model())
    assert exc.value.qubit == 2


def test_rank_deficient():
    m = np.array([[1.0, 2.0], [2.0, 4.0]])
    model = CrosstalkModel(m, [0.0, 0.0], [6400.0, 6400.0])
    with pytest.raises(RankDeficientError) as exc:
        currents_for_comb([(0, 6000.0), (1, 6100.0)], model)
    assert "condition number" in str(exc.value)


def test_too_many_targets_for_free_lines():
    with pytest.raises(ValidationError):
        currents_for_comb([(0, 6000.0), (1, 6000.0)], diagonal_model(n=2), fixed=[(0, 0.0)])


def test_dominance_holds_for_device_matrix():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        model = device_model()
    assert model.dominance_violations() == []
    bad = np.array(device.CROSSTALK_MATRIX)
    bad[0, 1] = 1.0
    with pytest.warns(RuntimeWarning):
        CrosstalkModel(bad, device.FLUX_OFFSETS, device.SYNTHETIC_OMEGA_MAX, device.LOCAL_LINES)


def test_model_validation():
    with pytest.raises(ValidationError):
        CrosstalkModel(np.eye(2), [0.0], [6400.0, 6400.0])
    with pytest.raises(ValidationError):
        CrosstalkModel(np.eye(2), [0.0, 0.0], [6400.0, 0.0])
    with pytest.raises(ValidationError):
        model_from_dict({"matrix": [[1.0]]})


def test_json_round_trip(tmp_path):
    model = device_model()
    path = tmp_path / "m.json"
    path.write_text(json.dumps(model.to_dict()))
    back = load_crosstalk(path)
    np.testing.assert_array_equal(back.m, model.m)
    assert back.local_lines == model.local_lines


def synthetic_sweep(model, line, qubit, periods=1.5, n=301):
    m = model.m[line, qubit]
    span = periods / abs(m)
    currents = np.linspace(-span / 2, span / 2, n)
    full = np.zeros((n, model.n_lines))
    full[:, line] = currents
    freqs = np.array([flux_to_frequency(c, model, qubit) for c in full])
    return line, qubit, currents, freqs


def test_row_five_recovery():
    model = device_model()
    sweeps = [synthetic_sweep(model, 4, k) for k in range(7)]
    fitted = fit_crosstalk(sweeps, model.omega_max, phi_off_prior=model.phi_off)
    truth = device.CROSSTALK_MATRIX[4]
    np.testing.assert_allclose(truth, [0.33, 0.05, 0.05, 1, 12, 441, -3.6])
    np.testing.assert_allclose(fitted.m[4], truth, rtol=0.01)


def test_full_matrix_recovery_with_local_sign_convention():
    model = device_model()
    sweeps = [synthetic_sweep(model, j, k) for j in range(7) for k in range(7)]
    fitted = fit_crosstalk(sweeps, model.omega_max, local_lines=device.LOCAL_LINES,
                           reference_lines={0: device.COIL_LINE})
    np.testing.assert_allclose(fitted.m, model.m, rtol=0.01)
    np.testing.assert_allclose(fitted.phi_off, model.phi_off, atol=1e-3)


def test_offset_recovery():
    model = CrosstalkModel(np.array([[437.0]]), [-0.26], [6400.0])
    fitted = fit_crosstalk([synthetic_sweep(model, 0, 0)], [6400.0], n_lines=1)
    assert fitted.phi_off[0] == pytest.approx(-0.26, abs=1e-3)
    assert fitted.m[0, 0] == pytest.approx(437.0, rel=0.01)


def test_flat_line_gives_zero_with_uncertainty():
    currents = np.linspace(-1e-3, 1e-3, 51)
    model, entries = fit_crosstalk([(1, 0, currents, np.full(51, 6123.0))], [6400.0, 6400.0],
                                   n_lines=2, return_entries=True)
    assert model.m[1, 0] == 0.0
    assert entries[0].uncertain and entries[0].m_stderr == np.inf


def test_short_sweep_is_underdetermined():
    model = CrosstalkModel(np.array([[437.0]]), [-0.26], [6400.0])
    with pytest.raises(FitError):
        fit_crosstalk([synthetic_sweep(model, 0, 0, periods=0.3)], [6400.0], n_lines=1)
