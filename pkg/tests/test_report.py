import json

import pytest

from intrinsic_graphs.report import (ConfigError, ReportConfig, dumps, emit_plot_data,
                                     parse_config, run_report)


def test_config_parsing():
    cfg = parse_config("""
        # comment line
        source = hyperbolic-fan   # trailing comment
        analyses = flow, ruling
        window = -2, 2, -2, 2
        n_eta = 33
        tolerance = 1e-8
        plots = false
        stability_resolution = 100, 20
    """)
    assert cfg.source == "hyperbolic-fan"
    assert cfg.analyses == ("flow", "ruling")
    assert cfg.window == (-2.0, 2.0, -2.0, 2.0)
    assert cfg.n_eta == 33 and cfg.tolerance == 1e-8 and cfg.plots is False
    assert cfg.stability_resolution == (100, 20)


@pytest.mark.parametrize("text", [
    "n_eta = 8", "tolerance = 1e-2", "tolerance = 1e-14", "analyses = area, dance",
    "colour = blue", "n_tau", "window = 1, 2, 3", "n_eta = many",
])
def test_config_validation(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_dumps_formats_floats_with_17_digits():
    text = dumps({"x": 0.1, "n": 3, "nan": float("nan"), "l": [1e-20, True, None], "s": "a"})
    data = json.loads(text)
    assert data == {"x": 0.1, "n": 3, "nan": None, "l": [1e-20, True, None], "s": "a"}
    assert "0.10000000000000001" in text


def test_report_is_byte_identical_across_runs(tmp_path):
    cfg = ReportConfig(source="sine", analyses=("area", "variation", "flow", "ruling"),
                       out_dir=str(tmp_path), n_bumps=2, plots=False)
    run_report(cfg)
    first = (tmp_path / "report.json").read_bytes()
    run_report(cfg)
    assert (tmp_path / "report.json").read_bytes() == first


def test_fan_pipeline(tmp_path):
    cfg = ReportConfig(source="hyperbolic-fan", zeta_window=(-1.0, 1.0), n_bumps=3,
                       analyses=("variation", "flow", "ruling", "stability"),
                       out_dir=str(tmp_path))
    rep = run_report(cfg)
    assert rep.exit_code == 0
    assert [s["name"] for s in rep.document["stages"]] == ["field", "variation", "flow",
                                                           "ruling", "stability"]
    assert rep.stage("flow")["result"]["stationarity_residual"] < 1e-6
    assert rep.stage("variation")["result"]["max_rel_first"] < 1e-6
    st = rep.stage("stability")["result"]
    assert st["verdict"] == "unstable" and st["lambda_min"] < -1e-3
    for f in ("report.json", "flow.csv", "ruling.csv", "witness.csv", "ruling.png",
              "witness.png", "flow.png"):
        assert (tmp_path / f).exists()
    entry = rep.stage("variation")["result"]["entries"][0]
    assert {"op", "value", "err_est", "region"} <= set(entry)


def test_plane_stability_report(tmp_path):
    rep = run_report(ReportConfig(source="plane:a=1,b=0", analyses=("stability",),
                                  out_dir=str(tmp_path), plots=False))
    st = rep.stage("stability")["result"]
    assert st["verdict"] == "stable-on-window" and st["lambda_min"] >= -1e-10
    assert set(st) >= {"lambda_min", "verdict", "window", "resolution", "witness_csv"}


def test_young_area_on_the_positive_window(tmp_path):
    rep = run_report(ReportConfig(source="young", analyses=("area", "variation"),
                                  area_region=(0, 1, 1, 2), out_dir=str(tmp_path),
                                  plots=False))
    assert rep.stage("area")["result"]["value"] == pytest.approx(5 ** 0.5, abs=1e-12)
    assert rep.stage("variation")["result"]["max_rel_first"] < 1e-6


def test_stage_failure_gives_exit_code_two(tmp_path):
    rep = run_report(ReportConfig(source="nowhere", analyses=("area", "flow"),
                                  out_dir=str(tmp_path), plots=False))
    assert rep.exit_code == 2
    stages = {s["name"]: s for s in rep.document["stages"]}
    assert stages["field"]["status"] == "error" and "young" in stages["field"]["message"]
    assert stages["area"]["status"] == "skipped"


def test_csv_field_source(tmp_path):
    from intrinsic_graphs.catalog import catalog_get
    path = tmp_path / "fan.csv"
    catalog_get("hyperbolic-fan").graph(33, 33).f.dump_csv(path)
    rep = run_report(ReportConfig(source=str(path), analyses=("area",),
                                  out_dir=str(tmp_path), plots=False))
    assert rep.exit_code == 0
    assert rep.stage("field")["result"]["kind"] == "csv"


def test_emit_plot_data(tmp_path):
    rep = run_report(ReportConfig(source="hyperbolic-fan", analyses=("ruling", "hardy"),
                                  hardy_L=(5.0, 10.0), hardy_n=400, out_dir=str(tmp_path),
                                  plots=False))
    p = emit_plot_data(rep, "ruling", tmp_path / "r.csv")
    assert p.read_text().splitlines()[0] == "zeta,a,b,da,db"
    h = emit_plot_data(rep, "hardy", tmp_path / "h.csv").read_text().splitlines()
    assert h[0] == "L,n,inf_quotient" and len(h) == 3
    with pytest.raises(KeyError) as info:
        emit_plot_data(rep, "witness", tmp_path / "w.csv")
    assert "ruling" in str(info.value)


def test_every_series_lands_on_disk_as_csv(tmp_path):
    cfg = ReportConfig(source="young", analyses=("hardy", "probe", "exponents"),
                       hardy_L=(5.0,), hardy_n=200, out_dir=str(tmp_path), plots=False)
    assert run_report(cfg).exit_code == 0
    heads = {n: (tmp_path / f"{n}.csv").read_text().splitlines()[0]
             for n in ("hardy", "probe", "exponents")}
    assert heads["hardy"] == "L,n,inf_quotient"
    assert heads["probe"] == "cutoff,moment,exp_moment"
    assert heads["exponents"].startswith("p,q,")
