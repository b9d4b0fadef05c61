import json
import math
import os
from importlib import resources

import numpy as np
import pytest

from heatdesign import cli_io
from heatdesign.cli_io import (CliError, REPORT_KEYS, canonical_json,
                               load_config, parse_config, run_solve,
                               run_verify)

SQRT2 = math.sqrt(2.0)

WEDGE_OUTER = [
    [-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0],
    [-1.0, 0.5], [0.0, 0.0], [-1.0, -0.5],
]


def wedge_raw(backend="flow-grid", resolution=48, **solver_extra):
    solver = {"backend": backend, "resolution": resolution, **solver_extra}
    return {
        "domain": {"polygon": {"outer": [list(v) for v in WEDGE_OUTER]}},
        "sources": [
            {"type": "atom", "point": [-0.5, 0.5], "weight": 1.0},
            {"type": "atom", "point": [-0.5, -0.5], "weight": -1.0},
        ],
        "lambda0": 1.0,
        "solver": solver,
    }


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------

def test_canonical_json_sorts_keys_and_keeps_precision():
    text = canonical_json({"b": 1.0 / 3.0, "a": [1, True, None]})
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text)["b"] == 1.0 / 3.0


def test_canonical_json_rejects_nan():
    with pytest.raises(CliError):
        canonical_json({"x": float("nan")})


def test_round_trip_is_byte_identical(tmp_path):
    cfg = parse_config(wedge_raw())
    path = tmp_path / "cfg.json"
    cli_io.write_config(cfg, str(path))
    first = path.read_bytes()
    cfg2 = load_config(str(path))
    cli_io.write_config(cfg2, str(path))
    assert path.read_bytes() == first


def test_shipped_configs_load_and_round_trip():
    base = resources.files("heatdesign") / "configs"
    names = sorted(p.name for p in base.iterdir() if p.name.endswith(".json"))
    assert names == ["arc.json", "brothers.json", "diagonals.json",
                     "nonconvex.json", "segments.json"]
    for name in names:
        text = (base / name).read_text()
        cfg = parse_config(json.loads(text))
        assert cfg.to_json() == text


# ---------------------------------------------------------------------------
# Validation failures
# ---------------------------------------------------------------------------

def test_unknown_top_level_key_rejected():
    raw = wedge_raw()
    raw["extra"] = 1
    with pytest.raises(CliError, match="extra"):
        parse_config(raw)


def test_unknown_solver_key_rejected():
    with pytest.raises(CliError, match="solver"):
        parse_config(wedge_raw(warm_start=True))


def test_bad_backend_rejected():
    with pytest.raises(CliError, match="backend"):
        parse_config(wedge_raw(backend="cg"))


def test_missing_resolution_for_pdhg_rejected():
    raw = wedge_raw(backend="pdhg")
    del raw["solver"]["resolution"]
    with pytest.raises(CliError, match="resolution"):
        parse_config(raw)


def test_nonpositive_budget_rejected():
    raw = wedge_raw()
    raw["lambda0"] = 0.0
    with pytest.raises(CliError, match="lambda0"):
        parse_config(raw)


def test_unbalanced_source_rejected_at_load():
    raw = wedge_raw()
    raw["sources"][1]["weight"] = -0.5
    with pytest.raises(CliError, match="balanced"):
        parse_config(raw)


def test_parse_error_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "domain": }\n')
    with pytest.raises(CliError, match="line 2"):
        load_config(str(path))


def test_missing_file_reports_cleanly(tmp_path):
    with pytest.raises(CliError, match="cannot read"):
        load_config(str(tmp_path / "nope.json"))


# ---------------------------------------------------------------------------
# Solve pipeline
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def wedge_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("wedge_out")
    cfg = parse_config(wedge_raw())
    report = run_solve(cfg, out_dir=str(out))
    return cfg, report, out


def test_report_has_exactly_the_contract_keys(wedge_run):
    _, report, _ = wedge_run
    assert tuple(report.to_dict()) == REPORT_KEYS


def test_flow_grid_value_on_wedge(wedge_run):
    _, report, _ = wedge_run
    assert report.value_Q1 == pytest.approx(SQRT2, abs=1e-9)
    assert report.Y == pytest.approx(2.0, abs=1e-8)
    assert abs(report.trace_total - 1.0) <= 1e-9


def test_field_files_written_atomically(wedge_run):
    _, _, out = wedge_run
    files = sorted(os.listdir(out))
    assert files == ["p.csv", "report.json", "tensor.csv", "u.csv"]
    header = (out / "p.csv").read_text().splitlines()[0]
    assert header == "x,y,p1,p2"
    assert (out / "u.csv").read_text().splitlines()[0] == "x,y,u"
    assert (out / "tensor.csv").read_text().splitlines()[0] == "x,y,rho,n1,n2"


def test_report_json_matches_report(wedge_run):
    _, report, out = wedge_run
    on_disk = json.loads((out / "report.json").read_text())
    assert on_disk == report.to_dict()


def test_reports_are_deterministic_apart_from_wall_time():
    cfg = parse_config(wedge_raw())
    a = run_solve(cfg).to_dict()
    b = run_solve(cfg).to_dict()
    a.pop("wall_time"), b.pop("wall_time")
    assert a == b


def test_visibility_backend_full_pipeline():
    cfg = parse_config(wedge_raw(backend="flow-visibility", resolution=48))
    report = run_solve(cfg)
    assert report.value_Q1 == pytest.approx(SQRT2, abs=1e-9)
    assert report.gap == 0.0
    assert abs(report.support_defect) <= 0.05


# ---------------------------------------------------------------------------
# Command surface and exit codes
# ---------------------------------------------------------------------------

def test_solve_command_exit_zero(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cli_io.write_config(parse_config(wedge_raw()), str(cfg_path))
    rc = cli_io.main(["solve", str(cfg_path), "--out", str(tmp_path / "o")])
    assert rc == 0
    assert '"value_Q1"' in capsys.readouterr().out


def test_stalled_solve_exits_two(tmp_path):
    raw = wedge_raw(backend="pdhg", resolution=32, max_iter=50)
    cfg_path = tmp_path / "cfg.json"
    cli_io.write_config(parse_config(raw), str(cfg_path))
    rc = cli_io.main(["solve", str(cfg_path)])
    assert rc == 2


def test_input_error_exits_one(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"domain": 3}')
    rc = cli_io.main(["solve", str(path)])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_verify_command_rows():
    rows = run_verify("nonconvex", backend="flow-visibility",
                      resolution=48, tol=0.1)
    assert [r["check"] for r in rows] == [
        "value_Q1", "trace", "gap", "support_outside_mass",
        "alignment_defect"]
    assert all(r["pass"] for r in rows)


def test_verify_rejects_unknown_example():
    with pytest.raises(CliError):
        run_verify("square", backend="pdhg", resolution=16)


def test_plot_command(tmp_path):
    cfg = parse_config(wedge_raw())
    run_solve(cfg, out_dir=str(tmp_path))
    rc = cli_io.main(["plot", str(tmp_path)])
    assert rc == 0
    for name in ("u.png", "density.png", "tensor.png"):
        assert (tmp_path / name).stat().st_size > 0


def test_plot_missing_fields_fails(tmp_path):
    rc = cli_io.main(["plot", str(tmp_path)])
    assert rc == 1
