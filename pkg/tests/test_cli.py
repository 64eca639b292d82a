import json
import os

import numpy as np
import pytest

from dielscat.cli import ConfigError, main, parse_config, validate_config
from dielscat.reporting import emit, far_field_rows, format_float


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


FOLDYLAX_DOC = {"a": 0.05, "h": 0.9, "eta0": 1.0, "c0": 1.0, "sign": "+",
                "c_r": 1.0, "lambda_b": 0.4,
                "theta": [0, 0, 1], "p": [1, 0, 0]}


def test_parse_config_roundtrip(tmp_path):
    path = write_config(tmp_path, FOLDYLAX_DOC)
    config = parse_config(path, "foldylax")
    path2 = write_config(tmp_path, config, "again.json")
    assert parse_config(path2, "foldylax") == config


def test_parse_config_rejects_bad_h(tmp_path):
    doc = dict(FOLDYLAX_DOC, h=0.5)
    path = write_config(tmp_path, doc)
    with pytest.raises(ConfigError, match=r"9/11"):
        parse_config(path, "foldylax")


def test_parse_config_rejects_oblique_polarization(tmp_path):
    doc = dict(FOLDYLAX_DOC, p=[float(np.sqrt(0.99)), 0.0, 0.1])
    path = write_config(tmp_path, doc)
    with pytest.raises(ConfigError, match="polarization"):
        parse_config(path, "foldylax")


def test_parse_config_rejects_unknown_key(tmp_path):
    doc = dict(FOLDYLAX_DOC, bogus=1)
    path = write_config(tmp_path, doc)
    with pytest.raises(ConfigError, match="bogus"):
        parse_config(path, "foldylax")


def test_parse_config_missing_key(tmp_path):
    doc = {k: v for k, v in FOLDYLAX_DOC.items() if k != "eta0"}
    path = write_config(tmp_path, doc)
    with pytest.raises(ConfigError, match="eta0"):
        parse_config(path, "foldylax")


def test_overrides(tmp_path):
    path = write_config(tmp_path, FOLDYLAX_DOC)
    config = parse_config(path, "foldylax", overrides=["a=0.04"])
    assert config["a"] == 0.04
    with pytest.raises(ConfigError):
        parse_config(path, "foldylax", overrides=["no-equals-sign"])


def test_validate_converge_decreasing():
    base = {"a_list": [0.03, 0.04], "h": 0.9, "eta0": 1.0, "c0": 1.0,
            "sign": "+", "c_r": 2.0, "lambda_b": 0.4}
    with pytest.raises(ConfigError, match="decreasing"):
        validate_config(base, "converge")


def test_format_float_shortest_roundtrip():
    for x in (0.1, 1.0 / 3.0, 2.5e-17, -1.0):
        assert float(format_float(x)) == x
    assert format_float(0.1) == "0.1"


def test_emit_csv_complex_split(tmp_path):
    rows = [{"x": 1.0, "v": 2.0 + 3.0j}, {"x": 2.0, "v": -1.0j}]
    path = str(tmp_path / "out.csv")
    emit(rows, "csv", path, meta={"tag": "demo"})
    lines = open(path).read().splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == "x,v_re,v_im"
    assert lines[2] == "1.0,2.0,3.0"
    assert lines[3] == "2.0,-0.0,-1.0"


def test_emit_json_roundtrip(tmp_path):
    rows = [{"v": 1.5 - 0.5j, "n": 3}]
    path = str(tmp_path / "out.json")
    emit(rows, "json", path)
    doc = json.load(open(path))
    assert doc["rows"][0]["v"] == {"re": 1.5, "im": -0.5}
    assert doc["rows"][0]["n"] == 3


def test_emit_deterministic(tmp_path):
    rows = [{"a": 0.1, "v": 1.0 + 2.0j}]
    p1, p2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    emit(rows, "csv", p1, meta={"k": 1})
    emit(rows, "csv", p2, meta={"k": 1})
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_far_field_rows_shape():
    class Samples:
        directions = np.eye(3)
        values = np.eye(3) * (1 + 1j)
    rows = far_field_rows(Samples())
    assert len(rows) == 3
    assert rows[0]["E_x"] == 1 + 1j


def test_cli_effective_end_to_end(tmp_path):
    cfg = write_config(tmp_path, {"xi_values": [1.0, 10.0]})
    out = str(tmp_path / "out")
    code = main(["effective", "--config", cfg, "--out", out])
    assert code == 0
    table = open(os.path.join(out, "effective_results.csv")).read()
    assert "dielectric-positive" in table
    assert "plasmonic-negative" in table
    assert os.path.exists(os.path.join(out, "effective_plotdata.json"))


def test_cli_foldylax_end_to_end_and_determinism(tmp_path):
    cfg = write_config(tmp_path, FOLDYLAX_DOC)
    out1, out2 = str(tmp_path / "o1"), str(tmp_path / "o2")
    assert main(["foldylax", "--config", cfg, "--out", out1]) == 0
    assert main(["foldylax", "--config", cfg, "--out", out2]) == 0
    b1 = open(os.path.join(out1, "foldylax_results.csv"), "rb").read()
    b2 = open(os.path.join(out2, "foldylax_results.csv"), "rb").read()
    assert b1 == b2
    header = b1.decode().splitlines()
    assert sum(1 for ln in header if not ln.startswith("#")) == 27  # 26 + head


def test_cli_lse_json_output(tmp_path):
    cfg = write_config(tmp_path, FOLDYLAX_DOC)
    out = str(tmp_path / "out")
    code = main(["lse", "--config", cfg, "--out", out, "--format", "json",
                 "--set", "grid_n=6"])
    assert code == 0
    doc = json.load(open(os.path.join(out, "lse_results.json")))
    assert doc["meta"]["residual"] <= 1e-6
    assert len(doc["rows"]) == 26


def test_cli_counting(tmp_path):
    cfg = write_config(tmp_path, {
        "pitches": [1.0 / j for j in range(4, 9)],
        "boundary_pitches": [1.0 / (j + 0.5) for j in range(5, 9)]})
    out = str(tmp_path / "out")
    assert main(["counting", "--config", cfg, "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "counting_results.csv"))


def test_cli_spectrum(tmp_path):
    cfg = write_config(tmp_path, {"grid_n": 12, "lmax": 4})
    out = str(tmp_path / "out")
    assert main(["spectrum", "--config", cfg, "--out", out]) == 0
    lines = open(os.path.join(out, "spectrum_results.csv")).read().splitlines()
    meta = [ln for ln in lines if ln.startswith("#")]
    assert any("nearest_to_third" in ln for ln in meta)


def test_cli_bad_config_exit_code(tmp_path):
    cfg = write_config(tmp_path, dict(FOLDYLAX_DOC, h=0.5))
    out = str(tmp_path / "out")
    assert main(["foldylax", "--config", cfg, "--out", out]) == 2


def test_cli_missing_config_file(tmp_path):
    assert main(["foldylax", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path)]) == 2
