"""Config grammar, sweep engine, and command-line surface.

Commands run in-process through ``main(argv)``; the short pulse from
the first reference row keeps every evaluation cheap.  Byte-identical
re-runs are part of the output contract and are tested as bytes.
"""

import csv
import io
import json

import pytest

from craswitch.sweep_cli import (
    ConfigError,
    SweepSpec,
    build_point,
    main,
    parse_config,
    resolve_point_config,
    run_sweep,
)

BASE = {
    "omega_r_mhz": "7000",
    "omega_ge_mhz": "7360",
    "g_ef_mhz": "50",
    "j_mhz": "20",
    "kappa_mhz": "45",
    "n_res": "7",
    "tau_p_us": "0.06",
}


def cfg_text(extra=None, drop=()):
    items = {k: v for k, v in BASE.items() if k not in drop}
    items.update(extra or {})
    return "\n".join(f"{k} = {v}" for k, v in items.items()) + "\n"


def write_cfg(path, extra=None, drop=()):
    path.write_text(cfg_text(extra, drop), encoding="utf-8")
    return str(path)


def read_csv(path_or_text):
    text = (path_or_text.read_text(encoding="utf-8")
            if hasattr(path_or_text, "read_text") else path_or_text)
    meta = [l for l in text.splitlines() if l.startswith("#")]
    body = [l for l in text.splitlines() if not l.startswith("#")]
    rows = list(csv.DictReader(io.StringIO("\n".join(body))))
    return meta, rows


# --- config grammar ---------------------------------------------------------

def test_parse_config_grammar():
    cfg = parse_config(
        "# a comment line\n"
        "\n"
        "omega_r_mhz = 7000   # trailing comment\n"
        "  j_mhz=12\n"
        "tau_p_us = '0.30'\n"
        'g_ef_mhz = "40"\n')
    assert cfg == {"omega_r_mhz": "7000", "j_mhz": "12",
                   "tau_p_us": "0.30", "g_ef_mhz": "40"}


@pytest.mark.parametrize("line, msg", [
    ("omega_r_mhz 7000", "expected 'key = value'"),
    ("omega_r_mhz =", "empty key or value"),
    ("bogus_key = 3", "unknown key"),
    ("j_mhz = 10\nj_mhz = 12", "duplicate key"),
])
def test_parse_config_rejects(line, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(line)


def test_resolve_point_defaults_and_required():
    point = resolve_point_config(parse_config(cfg_text(drop=("n_res",))))
    assert point["n_res"] == 7
    assert point["omega0_mhz"] == point["omega_r_mhz"] == 7000.0
    assert point["kappa1_mhz"] == point["kappa2_mhz"] == 45.0
    assert point["grid_halfwidth"] == 40.0 and point["grid_points"] == 4001

    with pytest.raises(ConfigError, match="missing required key j_mhz"):
        resolve_point_config(parse_config(cfg_text(drop=("j_mhz",))))
    with pytest.raises(ConfigError, match="not both"):
        resolve_point_config(parse_config(cfg_text({"kappa1_mhz": "30"})))
    with pytest.raises(ConfigError, match="missing kappa"):
        resolve_point_config(parse_config(cfg_text(drop=("kappa_mhz",))))
    with pytest.raises(ConfigError, match="not a number"):
        resolve_point_config(parse_config(cfg_text({"j_mhz": "fast"})))
    with pytest.raises(ConfigError, match="integer"):
        resolve_point_config(parse_config(cfg_text({"n_res": "7.5"})))


def test_build_point_applies_overrides():
    point = resolve_point_config(parse_config(cfg_text()))
    p, pulse, grid = build_point(point, {"kappa_mhz": 30.0, "n_res": 5})
    assert p.n_res == 5
    assert p.kappa_1 == p.kappa_2 == pytest.approx(30.0 * 2 * 3.14159265, rel=1e-6)
    assert pulse.tau_p == 0.06
    assert grid.omega[0] < pulse.omega_0 < grid.omega[-1]


# --- sweep specification ----------------------------------------------------

@pytest.mark.parametrize("axis, msg", [
    ("kappa1_mhz 10, 20, 3", "expected 'name"),
    ("resistance_ohm: 1, 2, 2", "not sweepable"),
    ("kappa1_mhz: 10, 20", "expected 'name"),
    ("kappa1_mhz: 10, twenty, 3", "bad numbers"),
    ("kappa1_mhz: -5, 20, 3", "positive"),
    ("kappa1_mhz: 10, 20, 0", "points"),
    ("n_res: 5, 8, 3", "integers"),
])
def test_axis_grammar_rejected(axis, msg):
    with pytest.raises(ConfigError, match=msg):
        SweepSpec.from_config(parse_config(cfg_text({"sweep.axis1": axis})))


def test_spec_conflicts():
    with pytest.raises(ConfigError, match="without sweep.axis1"):
        SweepSpec.from_config(parse_config(
            cfg_text({"sweep.axis2": "kappa1_mhz: 10, 20, 2"})))
    with pytest.raises(ConfigError, match="same parameter"):
        SweepSpec.from_config(parse_config(
            cfg_text({"sweep.axis1": "j_mhz: 10, 20, 2",
                      "sweep.axis2": "j_mhz: 10, 20, 2"})))
    with pytest.raises(ConfigError, match="owns kappa"):
        SweepSpec.from_config(parse_config(
            cfg_text({"sweep.axis1": "kappa1_mhz: 10, 20, 2",
                      "sweep.optimize_kappa": "10, 40, 4"})))
    with pytest.raises(ConfigError, match="unknown column"):
        SweepSpec.from_config(parse_config(
            cfg_text({"sweep.outputs": "C, sharpness"})))
    with pytest.raises(ConfigError, match="limit"):
        SweepSpec.from_config(parse_config(
            cfg_text({"sweep.axis1": "kappa1_mhz: 1, 50, 1001",
                      "sweep.axis2": "kappa2_mhz: 1, 50, 1001"})))


def test_grid_is_axis_major():
    spec = SweepSpec.from_config(parse_config(
        cfg_text({"sweep.axis1": "j_mhz: 10, 12, 2",
                  "sweep.axis2": "g_ef_mhz: 30, 50, 3"})))
    grid = spec.grid()
    assert len(grid) == 6
    assert grid[0] == {"j_mhz": 10.0, "g_ef_mhz": 30.0}
    assert grid[1] == {"j_mhz": 10.0, "g_ef_mhz": 40.0}
    assert grid[3] == {"j_mhz": 12.0, "g_ef_mhz": 30.0}
    # n_res axes materialise as integers
    spec = SweepSpec.from_config(parse_config(
        cfg_text({"sweep.axis1": "n_res: 5, 9, 3"})))
    assert spec.axes[0].values == (5, 7, 9)


# --- commands ----------------------------------------------------------------

SWEEP_EXTRA = {"sweep.axis1": "kappa1_mhz: 30, 50, 2",
               "sweep.axis2": "kappa2_mhz: 30, 50, 2"}


@pytest.fixture(scope="module")
def sweep_outputs(tmp_path_factory):
    """One 2x2 sweep written three ways: jobs=1, jobs=2, jobs=1 again."""
    root = tmp_path_factory.mktemp("sweep")
    cfg = write_cfg(root / "sweep.cfg", SWEEP_EXTRA)
    paths = [root / name for name in ("a.csv", "b.csv", "c.csv")]
    codes = [main(["sweep", "--config", cfg, "--out", str(out), "--jobs", jobs])
             for out, jobs in zip(paths, ("1", "2", "1"))]
    assert codes == [0, 0, 0]
    return paths


def test_sweep_csv_shape(sweep_outputs):
    meta, rows = read_csv(sweep_outputs[0])
    assert meta[0].startswith("# craswitch ")
    assert meta[1] == "# command: sweep"
    assert meta[2].startswith("# config sha256: ")
    assert list(rows[0]) == ["kappa1_mhz", "kappa2_mhz", "T_g", "T_e",
                             "R_g", "R_e", "C", "upsilon_g", "upsilon_e",
                             "upsilon", "error"]
    # axis-major: axis1 (kappa1) is the outer loop
    assert [(r["kappa1_mhz"], r["kappa2_mhz"]) for r in rows] == [
        ("30", "30"), ("30", "50"), ("50", "30"), ("50", "50")]
    for r in rows:
        assert r["error"] == ""
        assert 0.0 < float(r["C"]) <= 1.0


def test_sweep_output_is_byte_deterministic(sweep_outputs):
    blobs = [p.read_bytes() for p in sweep_outputs]
    assert blobs[0] == blobs[1] == blobs[2]


def test_sweep_json_and_argmax_annotation(tmp_path):
    cfg = write_cfg(tmp_path / "sweep.cfg", SWEEP_EXTRA)
    out = tmp_path / "sweep.json"
    assert main(["sweep", "--config", cfg, "--out", str(out),
                 "--format", "json", "--annotate-argmax"]) == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["meta"]["command"] == "sweep"
    assert doc["columns"][-2:] == ["row_max", "error"]
    points = doc["points"]
    assert len(points) == 4
    # one argmax marker per axis1 block, sitting on that block's best C
    for block in (points[:2], points[2:]):
        marked = [pt for pt in block if pt["row_max"] == 1]
        assert len(marked) == 1
        assert marked[0]["C"] == max(pt["C"] for pt in block)


def test_single_point_sweep_matches_run(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "point.cfg")
    assert main(["run", "--config", cfg]) == 0
    run_doc = json.loads(capsys.readouterr().out)
    assert sorted(run_doc) == ["C", "R_e", "R_g", "T_e", "T_g", "diagnostics",
                               "params", "upsilon", "upsilon_e", "upsilon_g"]
    assert run_doc["C"] == pytest.approx(
        run_doc["T_g"] - run_doc["T_e"], abs=1e-12)
    assert run_doc["params"]["omega_c_mhz"] == pytest.approx(7004.0, abs=0.5)

    out = tmp_path / "single.csv"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert len(rows) == 1
    assert float(rows[0]["C"]) == pytest.approx(run_doc["C"], abs=1e-9)


def test_optimizer_owns_kappa(tmp_path):
    cfg = write_cfg(tmp_path / "opt.cfg",
                    {"sweep.axis1": "n_res: 5, 7, 2",
                     "sweep.optimize_kappa": "25, 45, 3"})
    out = tmp_path / "opt.csv"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert [r["n_res"] for r in rows] == ["5", "7"]
    for r in rows:
        assert r["error"] == ""
        assert float(r["kappa_opt_mhz"]) in (25.0, 35.0, 45.0)


def test_failed_points_are_reported_not_fatal(tmp_path):
    # the second value pushes the switch coupling out of the dispersive
    # regime: that point must fail alone, with the sweep exiting 2
    cfg = write_cfg(tmp_path / "bad.cfg",
                    {"sweep.axis1": "g_ge_mhz: 150, 200, 2"})
    out = tmp_path / "bad.csv"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 2
    _, rows = read_csv(out)
    assert rows[0]["error"] == "" and float(rows[0]["C"]) > 0
    assert rows[1]["error"].startswith("DetuningTooSmall")
    assert rows[1]["C"] == ""


def test_emit_plot(tmp_path):
    cfg = write_cfg(tmp_path / "plot.cfg",
                    {"sweep.axis1": "kappa1_mhz: 40, 40, 1",
                     "sweep.axis2": "kappa2_mhz: 45, 45, 1"})
    out = tmp_path / "map.csv"
    assert main(["sweep", "--config", cfg, "--out", str(out),
                 "--emit-plot"]) == 0
    script = (tmp_path / "map.csv.gp").read_text(encoding="utf-8")
    assert "set pm3d map" in script and "map.csv" in script

    # refused without two axes / csv / a named output file
    cfg1 = write_cfg(tmp_path / "one_axis.cfg",
                     {"sweep.axis1": "kappa1_mhz: 40, 45, 2"})
    assert main(["sweep", "--config", cfg1, "--out", str(out),
                 "--emit-plot"]) == 1
    assert main(["sweep", "--config", cfg, "--out", str(out),
                 "--emit-plot", "--format", "json"]) == 1
    assert main(["sweep", "--config", cfg, "--emit-plot"]) == 1


def test_config_errors_exit_1(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "absent.cfg")]) == 1
    assert "error:" in capsys.readouterr().err

    bad = tmp_path / "bad.cfg"
    bad.write_text(cfg_text({"warp_factor": "9"}), encoding="utf-8")
    assert main(["run", "--config", str(bad)]) == 1

    sweep_in_run = write_cfg(tmp_path / "s.cfg",
                             {"sweep.axis1": "j_mhz: 10, 12, 2"})
    assert main(["run", "--config", sweep_in_run]) == 1
    assert "sweep subcommand" in capsys.readouterr().err

    assert main(["run", "--config", write_cfg(tmp_path / "p.cfg"),
                 "--jobs", "0"]) == 1


def test_oracle_check_command(tmp_path):
    cfg = write_cfg(tmp_path / "point.cfg")
    out = tmp_path / "oracle.csv"
    assert main(["oracle-check", "--config", cfg, "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert [r["quantity"] for r in rows] == ["T_g", "T_e", "C"]
    for r in rows:
        assert r["status"] == "pass"
        assert float(r["abs_diff"]) <= float(r["tolerance"])


def test_table1_command(tmp_path):
    out = tmp_path / "table1.csv"
    assert main(["table1", "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert len(rows) == 15     # 3 reference rows x 5 quantities
    assert {r["status"] for r in rows} == {"pass"}
    assert {r["quantity"] for r in rows} == {
        "omega_c_mhz", "omega_ef_mhz", "alpha_mhz", "C", "upsilon"}


def test_diagnose_command(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "point.cfg")
    assert main(["diagnose", "--config", cfg]) == 0
    text = capsys.readouterr().out
    _, rows = read_csv(text)
    report = {r["key"]: r["value"] for r in rows}
    assert report["dispersive_valid"] == "True"
    assert len(report["band_modes_mhz"].split()) == 7

    out = tmp_path / "diag.json"
    assert main(["diagnose", "--config", cfg, "--out", str(out),
                 "--format", "json"]) == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["diagnostics"]["dispersive_valid"] is True
    assert len(doc["diagnostics"]["band_modes_mhz"]) == 7


def test_run_sweep_library_entry():
    spec = SweepSpec.from_config(parse_config(
        cfg_text({"sweep.axis1": "kappa2_mhz: 40, 50, 2",
                  "sweep.outputs": "C, upsilon"})))
    columns, rows = run_sweep(spec)
    assert columns == ["kappa2_mhz", "C", "upsilon", "error"]
    assert [r["kappa2_mhz"] for r in rows] == [40.0, 50.0]
    assert all(not r["error"] for r in rows)
