import dataclasses
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdsqueeze import cli, sweep
from qdsqueeze.errors import ConfigError, InvalidParameterError, NumericalFailureError, QDSqueezeError
from qdsqueeze.observables import report
from qdsqueeze.operators import build_operators
from qdsqueeze.steady import converge_truncation
from qdsqueeze.sweep import (
    FIGURE_IDS,
    RATE_OUTPUTS,
    Axis,
    Link,
    ResultTable,
    SweepSpec,
    config_hash,
    emit,
    figure_preset,
    level_crossings,
    read_table,
    run_sweep,
    spec_from_config,
    spec_to_config,
)
from qdsqueeze.units import FIELD_TO_KEY, PhysicalParams, get_param

FIXTURES = json.loads((Path(__file__).parent / "fixtures" / "presets.json").read_text())


def small_spec(**kw):
    base = PhysicalParams(omega_R=100, g_R=60, kappa=90, delta_xl=100, phonons_enabled=False, fock_truncation=2)
    defaults = dict(
        base=base,
        axis1=Axis.linear("delta_cl", -1.5, 1.5, 5, normalized=True),
        normalization="generalized_rabi",
    )
    defaults.update(kw)
    return SweepSpec(**defaults)


@pytest.mark.parametrize("fid", FIGURE_IDS)
def test_preset_fidelity(fid):
    fx = FIXTURES[fid]
    spec = figure_preset(fid)
    assert spec.kind == fx["kind"]
    for key, value in {**FIXTURES["common"], **fx["base"]}.items():
        assert get_param(spec.base, key) == value, key
    a1 = fx["axis1"]
    assert spec.axis1.column == a1["axis"] and spec.axis1.normalized == a1["normalized"]
    np.testing.assert_allclose(spec.axis1.values, np.linspace(a1["start"], a1["stop"], a1["count"]), atol=1e-14)
    a2 = fx["axis2"]
    assert spec.axis2.column == a2["axis"]
    expected2 = a2["values"] if "values" in a2 else np.linspace(a2["start"], a2["stop"], a2["count"])
    np.testing.assert_allclose(spec.axis2.values, expected2, atol=1e-14)
    links = [(FIELD_TO_KEY[l.target], FIELD_TO_KEY.get(l.source, l.source), l.factor) for l in spec.links]
    assert links == [tuple(l) for l in fx["links"]]
    assert set(fx["outputs"]) <= set(spec.outputs)


def test_preset_examples():
    assert (figure_preset("fig2").base.gamma, figure_preset("fig2").base.gamma_prime) == (2.0, 0.5)
    p, _ = figure_preset("fig5b").points()[0]
    assert p.phonons_enabled and p.temperature == 4.0 and p.delta_xl == -p.omega_R
    assert figure_preset("fig1").outputs == RATE_OUTPUTS
    with pytest.raises(InvalidParameterError):
        figure_preset("fig6")


def test_points_apply_links_and_normalization():
    spec = figure_preset("fig3b")
    pts = spec.points()
    assert len(pts) == 3 * 241
    for p, coords in pts[::97]:
        assert p.g_R == pytest.approx(0.6 * p.omega_R) and p.kappa == pytest.approx(0.9 * p.omega_R)
        assert p.delta_xl == -p.omega_R
        assert p.delta_cl / p.generalized_rabi == pytest.approx(coords["delta_cl_norm"], abs=1e-14)
    assert [p.omega_R for p, _ in pts[:241]] == [50.0] * 241  # axis2 outermost


def test_spec_validation():
    with pytest.raises(InvalidParameterError):
        Axis("delta_cl", (0.0, 2.0, 1.0))
    with pytest.raises(InvalidParameterError):
        Axis("delta_cl", ())
    with pytest.raises(InvalidParameterError):
        Axis("colour", (1.0,))
    with pytest.raises(InvalidParameterError):
        small_spec(normalization=None)
    with pytest.raises(InvalidParameterError):
        small_spec(outputs=("variance", "bogus"))
    with pytest.raises(InvalidParameterError):
        small_spec(kind="spectrum")
    with pytest.raises(InvalidParameterError):
        small_spec(links=(Link("nope", "omega_R"),))


def test_single_point_matches_direct_report():
    p = PhysicalParams(omega_R=80, g_R=50, kappa=70, delta_xl=-80, delta_cl=-100, fock_truncation=2)
    table = run_sweep(SweepSpec(p, Axis("delta_cl", (p.delta_cl,))))
    n, sol = converge_truncation(p)
    rep = report(sol.rho, build_operators(n))
    row = dict(zip(table.columns, table.rows[0]))
    assert row["variance"] == rep.variance_min and row["population"] == rep.population
    assert row["photon_number"] == rep.photon_number and row["fock_n"] == n and row["error"] == ""


def test_threads_preserve_order():
    spec = small_spec(axis2=Axis("omega_R", (60.0, 120.0)))
    serial = run_sweep(spec)
    threaded = run_sweep(spec, threads=3)
    assert serial.rows == threaded.rows and serial.meta == threaded.meta


def test_poisoned_point_is_isolated(monkeypatch):
    spec = small_spec()
    clean = run_sweep(spec)
    original = sweep.evaluate_point

    def poisoned(p, kind="steady", method="effective"):
        if abs(p.delta_cl) < 1e-9:
            raise NumericalFailureError("forced failure")
        return original(p, kind, method)

    monkeypatch.setattr(sweep, "evaluate_point", poisoned)
    dirty = run_sweep(spec)
    assert dirty.failed_rows == 1 and dirty.meta["failed_rows"] == 1
    err = dirty.columns.index("error")
    for i, (a, b) in enumerate(zip(clean.rows, dirty.rows)):
        if i == 2:
            assert "forced failure" in b[err]
            assert math.isnan(b[dirty.columns.index("variance")])
        else:
            assert a == b


def test_all_points_failed(monkeypatch):
    def broken(*a, **k):
        raise NumericalFailureError("nope")

    monkeypatch.setattr(sweep, "evaluate_point", broken)
    with pytest.raises(NumericalFailureError):
        run_sweep(small_spec())


def test_rates_sweep_columns():
    spec = SweepSpec(PhysicalParams(), Axis.linear("delta_xl", -500, 500, 3), outputs=RATE_OUTPUTS, kind="rates")
    table = run_sweep(spec)
    assert table.columns == ["delta_xl_ueV", "delta_cx_ueV", *RATE_OUTPUTS, "error"]
    assert np.all(table.column("rate_sigma_plus_perps") > 0)


def test_emit_empty_table(tmp_path):
    table = ResultTable(["delta_cl_ueV", "variance"], [], {"tool": "qdsqueeze"})
    emit(table, "csv", tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == "# tool=qdsqueeze\ndelta_cl_ueV,variance\n"
    back = read_table(tmp_path / "e.csv")
    assert back.columns == table.columns and back.rows == []


@given(st.lists(st.tuples(st.floats(allow_nan=False, allow_infinity=False), st.floats(-1e5, 1e5)), max_size=8))
def test_csv_roundtrip_12_digits(values):
    table = ResultTable(["a", "b", "error"], [[x, y, ""] for x, y in values], {"k": 1})
    import tempfile

    with tempfile.TemporaryDirectory() as d:
        for fmt in ("csv", "json"):
            path = Path(d) / f"t.{fmt}"
            emit(table, fmt, path)
            back = read_table(path)
            for row, orig in zip(back.rows, table.rows):
                for got, want in zip(row[:2], orig[:2]):
                    assert got == float(f"{want:.12g}")
            assert back.meta == {"k": 1}


def test_deterministic_bytes(tmp_path):
    spec = small_spec()
    a = emit(run_sweep(spec), "csv")
    b = emit(run_sweep(spec), "csv")
    assert a == b
    assert a.startswith("# tool=qdsqueeze\n")
    assert "delta_cl_norm" in a.splitlines()[9]


def test_unwritable_path():
    with pytest.raises(QDSqueezeError):
        emit(ResultTable(["a"]), "csv", "/nonexistent/dir/out.csv")
    with pytest.raises(InvalidParameterError):
        emit(ResultTable(["a"]), "xml")


def test_config_roundtrip():
    for fid in FIGURE_IDS:
        spec = figure_preset(fid)
        again = spec_from_config(json.loads(json.dumps(spec_to_config(spec))))
        assert again == spec
        assert config_hash(again) == config_hash(spec)
    assert config_hash(figure_preset("fig3a")) != config_hash(figure_preset("fig3b"))


def test_config_start_stop_count():
    cfg = {
        "omega_R_ueV": 100,
        "sweep": {"axis": "delta_cl_ueV", "start": -2, "stop": 2, "count": 5, "normalize": "generalized_rabi"},
    }
    spec = spec_from_config(cfg)
    assert spec.axis1.normalized and spec.axis1.values == (-2.0, -1.0, 0.0, 1.0, 2.0)
    for bad in (
        {"sweep": {"axis": "delta_cl_ueV", "start": 0, "stop": 1, "count": 3, "color": 1}},
        {"sweep": {"axis": "bogus", "values": [1]}},
        {"sweep": {"axis": "delta_cl_ueV", "start": 0, "stop": 1}},
        {"sweep": {"axis": "delta_cl_ueV", "values": [1, 0, 2]}},
        {"sweep": {"axis": "delta_cl_ueV", "values": [1], "scale": "log"}},
        {"sweep": {"axis": "delta_cl_ueV", "values": [1], "links": [{"target": "x", "source": "omega_R_ueV"}]}},
        {"omega_R_ueV": 10},
    ):
        with pytest.raises(ConfigError):
            spec_from_config(bad)


@given(st.floats(-5, 5), st.floats(0.1, 3), st.floats(-3, 3))
def test_level_crossings_linear(slope_sign, slope, level):
    slope = slope if slope_sign >= 0 else -slope
    x = np.linspace(-10, 10, 41)
    y = slope * (x - 1.234)
    roots = level_crossings(x, y, level)
    expected = 1.234 + level / slope
    if -10 <= expected <= 10:
        assert len(roots) == 1 and roots[0] == pytest.approx(expected, abs=1e-9)
    else:
        assert roots == []


def test_minimize_variance_two_level():
    p = PhysicalParams(g_R=0, gamma_prime=0, delta_xl=0, phonons_enabled=False, fock_truncation=1)
    x, v = sweep.minimize_variance(p, "omega_R", 0.2, 3.0, xatol=1e-7)
    assert x == pytest.approx(2 / math.sqrt(6), rel=1e-4) and v == pytest.approx(-0.125, abs=1e-9)


# --- CLI -----------------------------------------------------------------


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_cli_steady(tmp_path, capsys):
    assert cli.main(["steady", "--truncation", "2", "--no-phonons"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# tool=qdsqueeze") and "variance" in out
    out_path = tmp_path / "s.json"
    assert cli.main(["steady", "--truncation", "2", "--format", "json", "--out", str(out_path)]) == 0
    data = json.loads(out_path.read_text())
    assert data["rows"][0]["error"] == "" and data["meta"]["kind"] == "steady"


def test_cli_full_me_and_rates(tmp_path, capsys):
    cfg = write(tmp_path, {"omega_R_ueV": 60, "g_R_ueV": 40, "kappa_ueV": 54, "fock_truncation": 2})
    assert cli.main(["steady", "--config", cfg, "--full-me"]) == 0
    assert "# method=full" in capsys.readouterr().out
    assert cli.main(["rates", "--config", cfg]) == 0
    assert "rate_sigma_plus_perps" in capsys.readouterr().out


def test_cli_rates_sweep(tmp_path):
    cfg = write(tmp_path, {"sweep": {"axis": "delta_xl_ueV", "start": -1000, "stop": 1000, "count": 5}})
    out = tmp_path / "r.csv"
    assert cli.main(["rates", "--config", cfg, "--out", str(out)]) == 0
    table = read_table(out)
    assert len(table.rows) == 5 and table.meta["kind"] == "rates"


def test_cli_sweep_and_partial_failure(tmp_path):
    cfg = {
        "omega_R_ueV": 0, "g_R_ueV": 0, "kappa_ueV": 10, "gamma_prime_ueV": 0, "phonons_enabled": False, "fock_truncation": 1,
        "sweep": {"axis": "gamma_ueV", "values": [0.0, 1.0, 2.0]},
    }
    out = tmp_path / "p.csv"
    assert cli.main(["sweep", "--config", write(tmp_path, cfg), "--out", str(out)]) == 3
    table = read_table(out)
    assert table.failed_rows == 1 and "AmbiguousSteadyStateError" in table.rows[0][-1]
    cfg["sweep"]["values"] = [1.0, 2.0]
    assert cli.main(["sweep", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0


def test_cli_exit_codes(tmp_path):
    assert cli.main(["steady", "--config", write(tmp_path, {"omega": 1})]) == 1
    assert cli.main(["steady", "--config", str(tmp_path / "missing.json")]) == 1
    assert cli.main(["sweep"]) == 1
    assert cli.main(["steady", "--threads", "0"]) == 1
    degenerate = {"omega_R_ueV": 0, "g_R_ueV": 0, "kappa_ueV": 0, "gamma_ueV": 0, "gamma_prime_ueV": 0, "phonons_enabled": False}
    assert cli.main(["steady", "--config", write(tmp_path, degenerate)]) == 2


def test_cli_figure(monkeypatch, tmp_path):
    real = cli.figure_preset

    def reduced(fid):
        spec = real(fid)
        return dataclasses.replace(spec, axis1=Axis(spec.axis1.name, spec.axis1.values[::60], spec.axis1.normalized))

    monkeypatch.setattr(cli, "figure_preset", reduced)
    out = tmp_path / "f.csv"
    assert cli.main(["figure", "fig2", "--out", str(out), "--threads", "2"]) == 0
    table = read_table(out)
    assert table.meta["label"] == "fig2" and len(table.rows) == 15
    assert set(table.column("omega_R_ueV")) == {50.0, 100.0, 200.0}


def test_cli_power(capsys):
    assert cli.main(["power"]) == 0
    lines = capsys.readouterr().out.splitlines()
    row = dict(zip(lines[2].split(","), lines[3].split(",")))
    assert float(row["power_mW"]) == pytest.approx(14.4836, rel=1e-5)
    assert cli.main(["power", "--omega-ueV", "-1"]) == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "qdsqueeze", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "figure" in res.stdout
