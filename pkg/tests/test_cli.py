import csv
import json
import math

import numpy as np
import pytest

from helpers import BEAM_CP, BEAM_F_OC, BEAM_F_SC
from shuntlab import cli

BEAM = {"f_sc_hz": BEAM_F_SC, "f_oc_hz": BEAM_F_OC, "cp_eps": BEAM_CP}


def write_config(tmp_path, **body):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"schema_version": 1, **body}))
    return path


def run_cli(tmp_path, command, figure=None, out="out", **body):
    cfg = write_config(tmp_path, **body)
    argv = [command, "--config", str(cfg), "--out", str(tmp_path / out)]
    if figure is not None:
        argv += ["--figure", str(figure)]
    return cli.main(argv), tmp_path / out


def read_csv(path):
    lines = path.read_text().split("\n")
    meta = [ln for ln in lines if ln.startswith("#")]
    rows = list(csv.reader(ln for ln in lines if ln and not ln.startswith("#")))
    return meta, rows[0], np.array(rows[1:], dtype=float)


# -- commands -----------------------------------------------------------------------

def test_tune_beam(tmp_path):
    code, out = run_cli(tmp_path, "tune", model=BEAM)
    assert code == 0
    summary = json.loads((out / "tune.json").read_text())
    assert summary["shunt"]["inductance"] == pytest.approx(105.7, rel=5e-3)
    assert summary["shunt"]["resistance"] == pytest.approx(2961.0, rel=1e-2)
    assert summary["model"]["kc"] == pytest.approx(0.116, abs=1e-3)
    assert summary["files"] == ["tune_tuning.csv"]


def test_critical_zero_coupling_row(tmp_path):
    code, out = run_cli(tmp_path, "critical", model={"kc": 0.1}, critical={"kc": [0.0, 0.1]})
    assert code == 0
    _, header, data = read_csv(out / "critical_critical_delay.csv")
    zero = data[0]
    assert zero[header.index("Kc")] == 0.0
    for col in ("tau_c_zoh", "tau_c_pure", "tau_c_series"):
        assert zero[header.index(col)] == 0.0
    assert data[1][header.index("tau_c_zoh")] > 0


def test_critical_beam(tmp_path):
    code, out = run_cli(tmp_path, "critical", model=BEAM)
    assert code == 0
    res = json.loads((out / "critical.json").read_text())["results"][0]
    assert res["tau_c_zoh"] == pytest.approx(1.3e-3, rel=0.03)
    assert res["tau_c_series"] == pytest.approx(1.3e-3, rel=0.03)


def test_reproduce_critical_delay_curves(tmp_path):
    code, out = run_cli(tmp_path, "reproduce", figure=7)
    assert code == 0
    _, header, data = read_csv(out / "fig7_critical_delays.csv")
    assert header[:4] == ["Kc", "tau_c_zoh", "tau_c_pure", "tau_c_series"]
    kc = data[:, 0]
    assert kc[0] == pytest.approx(1e-3) and kc[-1] == pytest.approx(0.3)
    np.testing.assert_allclose(np.diff(np.log(kc)), np.log(300) / (kc.size - 1), rtol=1e-10)


@pytest.mark.parametrize("command, body", [
    ("margins", {"model": {"kc": 0.1}}),
    ("rootlocus", {"model": {"kc": 0.1}, "rootlocus": {"steps": 200, "stride": 10}}),
    ("frf", {"model": BEAM, "delay": {"tau": [0.1, 0.5], "tau_unit": "tau_c"}}),
    ("frf", {"model": {"kc": 0.1}, "delay": {"variant": "pure", "tau": 0.2, "tau_unit": "1/omega_sc"}}),
    ("stabilize", {"model": {"kc": 0.1}, "delay": {"tau": [0.1, 0.5], "tau_unit": "1/omega_sc"}}),
    ("simulate", {"model": {"kc": 0.1}, "delay": {"tau": [0.5], "tau_unit": "tau_c"},
                  "simulation": {"periods": 100, "ringdown_periods": 20, "write_time_series": True}}),
])
def test_every_command_runs(tmp_path, command, body):
    code, out = run_cli(tmp_path, command, **body)
    assert code == 0
    summary = json.loads((out / f"{command}.json").read_text())
    assert summary["command"] == command
    for name in summary["files"]:
        assert (out / name).exists()


def test_stabilize_summary(tmp_path):
    code, out = run_cli(tmp_path, "stabilize", model={"kc": 0.01},
                        delay={"tau": [0.5], "tau_unit": "1/omega_sc"})
    assert code == 0
    run = json.loads((out / "stabilize.json").read_text())["runs"][0]
    assert run["delta_b"][0] == 0.0 and run["pinned_index"] == 0
    assert run["max_real_resolved"] < 0


def test_simulate_verdicts(tmp_path):
    code, out = run_cli(tmp_path, "simulate", model={"kc": 0.1},
                        delay={"tau": [0.8, 1.2], "tau_unit": "tau_c"})
    assert code == 0
    runs = json.loads((out / "simulate.json").read_text())["runs"]
    assert [r["stable"] for r in runs] == [True, False]


@pytest.mark.parametrize("figure", cli.FIGURES)
def test_every_figure_target(tmp_path, figure):
    body = {"reproduce": {"ringdown_periods": 20}} if figure in (11, 14) else {}
    code, out = run_cli(tmp_path, "reproduce", figure=figure, **body)
    assert code == 0
    summary = json.loads((out / f"fig{figure}.json").read_text())
    assert summary["files"]
    for name in summary["files"]:
        _, header, data = read_csv(out / name)
        assert data.shape[0] > 0 and data.shape[1] == len(header)


def test_zoh_signal_average_tracks_half_sample_delay(tmp_path):
    code, out = run_cli(tmp_path, "reproduce", figure=3)
    _, header, data = read_csv(out / "fig3_zoh_signals.csv")
    avg, ref = data[:, header.index("output_average")], data[:, header.index("input_delayed_half_tau")]
    ok = np.isfinite(avg)
    tau = 2 * math.pi / 12
    # linear interpolation of a sine sampled at tau: error below tau^2 / 8
    assert np.max(np.abs(avg[ok] - ref[ok])) < tau**2 / 8
    held = data[:, header.index("output")]
    assert np.unique(held[:20]).size == 1


# -- errors ----------------------------------------------------------------------------

def test_unknown_key_is_config_error(tmp_path, capsys):
    code, _ = run_cli(tmp_path, "tune", model=BEAM, tunning="optimal")
    assert code == 2
    assert "tunning" in capsys.readouterr().err


def test_unknown_nested_key_is_config_error(tmp_path):
    code, _ = run_cli(tmp_path, "tune", model={**BEAM, "capacitance": 1.0})
    assert code == 2


def test_missing_schema_version(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"model": BEAM}))
    assert cli.main(["tune", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert cli.main(["tune", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_analysis_mismatch(tmp_path):
    code, _ = run_cli(tmp_path, "tune", analysis="critical", model=BEAM)
    assert code == 2


def test_reproduce_requires_known_figure(tmp_path):
    assert run_cli(tmp_path, "reproduce")[0] == 2
    assert run_cli(tmp_path, "reproduce", figure=12)[0] == 2


def test_domain_error_maps_to_config_exit(tmp_path):
    code, _ = run_cli(tmp_path, "tune", model={"omega_sc": 2.0, "omega_oc": 1.0, "cp_eps": 1.0})
    assert code == 2


def test_no_crossover_is_numerical_failure(tmp_path, capsys):
    code, _ = run_cli(tmp_path, "margins", model={"kc": 0.1}, margin_scan={"lo": 5.0, "hi": 10.0})
    assert code == 3
    assert "numerical failure" in capsys.readouterr().err


def test_bad_thread_variable(tmp_path, monkeypatch):
    monkeypatch.setenv("SHUNTLAB_THREADS", "many")
    assert run_cli(tmp_path, "tune", model=BEAM)[0] == 2


# -- output format ---------------------------------------------------------------------

def test_csv_layout(tmp_path):
    code, out = run_cli(tmp_path, "frf", model={"kc": 0.1}, delay={"tau": [0.1], "tau_unit": "tau_c"},
                        frf_grid={"n": 50})
    raw = (out / "frf_frf.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    meta, header, data = read_csv(out / "frf_frf.csv")
    assert meta[0] == "# table: frf"
    assert any(m.startswith("# units: ") for m in meta)
    assert header == ["omega", "omega_norm", "amp_nominal", "amp_tau0"]
    assert data.shape == (50, 4)


def test_numbers_round_trip(tmp_path):
    code, out = run_cli(tmp_path, "tune", model=BEAM)
    _, header, data = read_csv(out / "tune_tuning.csv")
    summary = json.loads((out / "tune.json").read_text())
    assert data[0, header.index("inductance")] == summary["shunt"]["inductance"]
    assert data[0, header.index("resistance")] == summary["shunt"]["resistance"]


def test_json_key_order_stable(tmp_path):
    _, out = run_cli(tmp_path, "tune", model=BEAM)
    keys = list(json.loads((out / "tune.json").read_text()))
    assert keys[:3] == ["shuntlab_version", "command", "model"]
    assert keys[-1] == "files"


def test_non_finite_values_serialized_as_strings():
    assert cli.to_jsonable([math.inf, -math.inf, math.nan, 1.5, 2 + 1j, np.float64(3.0)]) == \
        ["inf", "-inf", "nan", 1.5, {"re": 2.0, "im": 1.0}, 3.0]


def test_plot_script(tmp_path):
    code, out = run_cli(tmp_path, "tune", model=BEAM, output={"plot_script": True})
    assert code == 0
    assert (out / "tune_tuning.gp").read_text().startswith('set datafile separator ","')


@pytest.mark.parametrize("threads", ["1", "4"])
def test_byte_identical_reruns(tmp_path, monkeypatch, threads):
    monkeypatch.setenv("SHUNTLAB_THREADS", threads)
    body = {"model": {"kc": 0.1}, "critical": {"kc": [0.01, 0.05, 0.1, 0.2]}}
    outputs = []
    for name in ("a", "b"):
        code, out = run_cli(tmp_path, "critical", out=name, **body)
        assert code == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outputs[0] == outputs[1]


def test_thread_count(monkeypatch):
    monkeypatch.setenv("SHUNTLAB_THREADS", "3")
    assert cli.thread_count() == 3
    monkeypatch.setenv("SHUNTLAB_THREADS", "0")
    assert cli.thread_count() >= 1


def test_shipped_scenarios_validate():
    from pathlib import Path
    paths = sorted((Path(__file__).parents[1] / "demos" / "scenarios").glob("*.json"))
    assert paths
    for path in paths:
        cfg = cli.load_scenario(path)
        assert cfg["analysis"] in cli.COMMANDS
