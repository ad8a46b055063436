import json

import numpy as np
import numpy.testing as npt
import pytest

from twinspec.cavity import CavityParams, CrossTrace, SpectrumTrace, simulate_traces
from twinspec.fwm import FwmParams, reference_fwm_params, synthesize_state
from twinspec.io import (
    TraceParseError,
    cavity_from_dict,
    cavity_to_dict,
    load_covariance,
    load_fwm_params,
    load_manifest,
    load_traces_csv,
    load_witness_csv,
    load_witness_records,
    read_csv_columns,
    save_covariance,
    save_fwm_params,
    save_gain_csv,
    save_manifest,
    save_traces_csv,
    save_witness_records,
    witness_records_to_csv,
)
from twinspec.witnesses import WitnessRecord, witness_records


@pytest.fixture()
def state():
    return synthesize_state(reference_fwm_params(), omega_hz=7e6, delta_hz=75e6)


@pytest.fixture()
def traces(state):
    rng = np.random.default_rng(2)
    return simulate_traces(
        state, CavityParams(), grid=np.linspace(-15, 15, 7), noise_sigma=0.1, rng=rng
    )


def test_covariance_json_round_trip(tmp_path, state):
    path = tmp_path / "cov.json"
    save_covariance(state, path)
    back = load_covariance(path)
    npt.assert_array_equal(back.matrix, state.matrix)
    assert back.basis == state.basis
    assert back.mode_order == state.mode_order
    assert back.omega_hz == state.omega_hz
    assert back.delta_hz == state.delta_hz
    assert back.meta["pair_gains"] == list(state.meta["pair_gains"])
    # a rewrite of the loaded object is byte-identical
    second = tmp_path / "cov2.json"
    save_covariance(back, second)
    assert second.read_bytes() == path.read_bytes()


def test_covariance_loader_rejects_non_square(tmp_path, state):
    path = tmp_path / "cov.json"
    save_covariance(state, path)
    payload = json.loads(path.read_text())
    payload["matrix"] = payload["matrix"][:-1]
    path.write_text(json.dumps(payload))
    with pytest.raises(TraceParseError, match="not square"):
        load_covariance(path)


def test_fwm_params_round_trip(tmp_path):
    params = FwmParams(
        delta_max_hz=95e6,
        g_max=19.0,
        width_hz=2.1e7,
        phase_slope_rad_per_hz=2e-8,
        loss_eta_medium=0.9,
    )
    path = tmp_path / "fwm.json"
    save_fwm_params(params, path)
    assert load_fwm_params(path) == params


def test_cavity_dict_round_trip():
    cavity = CavityParams(linewidth_hz=2e6, omega_hz=9e6, r0_power=0.4, eta_det=0.7)
    assert cavity_from_dict(cavity_to_dict(cavity)) == cavity


def test_traces_csv_round_trip(tmp_path, traces):
    singles = [t for t in traces if t.kind == "single"]
    crosses = [t for t in traces if t.kind == "cross"]
    spath, cpath = tmp_path / "singles.csv", tmp_path / "cross.csv"
    save_traces_csv(singles, spath)
    save_traces_csv(crosses, cpath)

    back_s = load_traces_csv(spath)
    assert [t.beam for t in back_s] == [t.beam for t in singles]
    for orig, back in zip(singles, back_s):
        npt.assert_array_equal(back.delta_norm, orig.delta_norm)
        npt.assert_array_equal(back.values, orig.values)
        assert back.demod_phase_rad == orig.demod_phase_rad

    back_c = load_traces_csv(cpath)
    assert len(back_c) == len(crosses)
    for orig, back in zip(crosses, back_c):
        npt.assert_array_equal(back.delta_pr_norm, orig.delta_pr_norm)
        npt.assert_array_equal(back.delta_cj_norm, orig.delta_cj_norm)
        npt.assert_array_equal(back.values, orig.values)

    # byte-identical rewrites
    for originals, path in ((back_s, spath), (back_c, cpath)):
        again = tmp_path / ("again_" + path.name)
        save_traces_csv(originals, again)
        assert again.read_bytes() == path.read_bytes()


def test_traces_csv_write_errors(tmp_path, traces):
    with pytest.raises(ValueError, match="no traces"):
        save_traces_csv([], tmp_path / "x.csv")
    with pytest.raises(ValueError, match="mix"):
        save_traces_csv(traces, tmp_path / "x.csv")


@pytest.mark.parametrize(
    "content,lineno,match",
    [
        ("", 1, "empty file"),
        ("delta,value\n", 1, "unrecognized header"),
        (
            "delta_norm,value,demod_phase_rad,beam\n0,1,0,probe\n0,oops,0,probe\n",
            3,
            "bad value",
        ),
        (
            "delta_norm,value,demod_phase_rad,beam\n0,1,0,pump\n",
            2,
            "unknown beam",
        ),
        (
            "delta_norm,value,demod_phase_rad,beam\n0,1,0\n",
            2,
            "expected 4 fields",
        ),
    ],
)
def test_traces_csv_parse_errors(tmp_path, content, lineno, match):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    with pytest.raises(TraceParseError, match=match) as err:
        load_traces_csv(path)
    assert err.value.line_number == lineno
    assert str(path) in str(err.value)


def test_manifest_round_trip(tmp_path, state, traces):
    singles = [t for t in traces if t.kind == "single"]
    crosses = [t for t in traces if t.kind == "cross"]
    save_traces_csv(singles, tmp_path / "singles.csv")
    save_traces_csv(crosses, tmp_path / "cross.csv")
    save_covariance(state, tmp_path / "truth.json")
    cavity = CavityParams()
    save_manifest(
        cavity,
        [{"path": "singles.csv", "kind": "single"}, {"path": "cross.csv", "kind": "cross"}],
        tmp_path / "manifest.json",
        truth="truth.json",
    )
    loaded_cavity, loaded_traces, truth_path = load_manifest(tmp_path / "manifest.json")
    assert loaded_cavity == cavity
    assert len(loaded_traces) == len(traces)
    npt.assert_array_equal(load_covariance(truth_path).matrix, state.matrix)


def test_witness_records_json_and_csv(tmp_path, state):
    records = witness_records(state, "resonator")
    records.append(
        WitnessRecord(
            delta_hz=None,
            scenario="resonator",
            bipartition="sym",
            basis="sym_asym",
            dgcz=0.5,
            ppt_nu_min=0.5,
            dE_probe=0.0,
            dE_conj=0.0,
            state_physical=True,
        )
    )
    jpath = tmp_path / "witness.json"
    save_witness_records(records, jpath)
    back = load_witness_records(jpath)
    assert back == records

    cpath = tmp_path / "witness.csv"
    witness_records_to_csv(records, cpath)
    rows = load_witness_csv(cpath)
    assert len(rows) == len(records)
    assert rows[0]["dgcz"] == records[0].dgcz
    assert rows[0]["delta_hz"] == 75e6
    assert np.isnan(rows[-1]["delta_hz"])
    with pytest.raises(TraceParseError, match="unrecognized header"):
        load_witness_csv(jpath)


def test_gain_csv_and_generic_reader(tmp_path):
    deltas = np.linspace(50e6, 75e6, 6)
    params = reference_fwm_params()
    gains = params.gain(deltas)
    path = tmp_path / "gain.csv"
    save_gain_csv(deltas, gains, gains - 1.0, path)
    cols = read_csv_columns(path)
    assert list(cols) == ["delta_hz", "gain_probe", "gain_conjugate"]
    npt.assert_array_equal(cols["delta_hz"], deltas)
    npt.assert_array_equal(cols["gain_probe"], gains)
    npt.assert_array_equal(cols["gain_conjugate"], gains - 1.0)
