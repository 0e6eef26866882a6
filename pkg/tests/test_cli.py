import json

import pytest

from tabdrw.cli import main


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def table_csv(tmp_path, capsys):
    path = tmp_path / "t.csv"
    assert _run(capsys, "synth", "--rows", 1000, "--cols", 11, "--seed", 3, "-o", path)[0] == 0
    return path


def test_embed_detect_roundtrip(tmp_path, capsys, table_csv):
    out_csv, state = tmp_path / "w.csv", tmp_path / "state.txt"
    code, out, _ = _run(capsys, "embed", table_csv, "--key", 928, "-o", out_csv, "--state", state)
    report = json.loads(out)
    assert code == 0 and report["clipping_ratio"] == 0 and report["seed"] == 0
    code, out, _ = _run(capsys, "detect", out_csv, "--key", 928)
    assert code == 0 and json.loads(out)["decision"] is True
    code, out, _ = _run(capsys, "detect", out_csv, "--key", 928, "--state", state)
    assert json.loads(out)["transform"] == "frozen"
    # a negative verdict still exits 0
    code, out, _ = _run(capsys, "detect", table_csv, "--key", 928, "--threshold", 1e9)
    assert code == 0 and json.loads(out)["decision"] is False


def test_gamma_zero_embed_is_byte_identical(tmp_path, capsys, table_csv):
    out_csv = tmp_path / "w.csv"
    _run(capsys, "embed", table_csv, "--key", 1, "--gamma", 0, "-o", out_csv)
    assert out_csv.read_bytes() == table_csv.read_bytes()


def test_embed_is_byte_deterministic(tmp_path, capsys, table_csv):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    _run(capsys, "embed", table_csv, "--key", 5, "-o", a)
    _run(capsys, "embed", table_csv, "--key", 5, "-o", b)
    assert a.read_bytes() == b.read_bytes()


def test_missing_key_is_usage_error(tmp_path, capsys, table_csv):
    with pytest.raises(SystemExit) as exc:
        main(["embed", str(table_csv), "-o", str(tmp_path / "w.csv")])
    assert exc.value.code == 2


def test_config_file_supplies_key(tmp_path, capsys, table_csv):
    cfg = tmp_path / "d.cfg"
    cfg.write_text("key = 928\ngamma = 0.5\nprivacy = false\n")
    _run(capsys, "embed", table_csv, "--key", 928, "-o", tmp_path / "w.csv")
    code, out, _ = _run(capsys, "detect", tmp_path / "w.csv", "--config", cfg)
    assert code == 0 and json.loads(out)["decision"] is True


def test_operational_error_exits_one(tmp_path, capsys):
    code, _, err = _run(capsys, "detect", tmp_path / "missing.csv", "--key", 1)
    assert code == 1 and "error" in err


def test_attack_commands(tmp_path, capsys, table_csv):
    code, out, _ = _run(capsys, "attack", table_csv, "--kind", "row_del", "--frac", 0.1,
                        "-o", tmp_path / "r.csv")
    assert json.loads(out)["rows_out"] == 900
    code, out, err = _run(capsys, "attack", table_csv, "--kind", "col_del", "-o", tmp_path / "c.csv")
    assert code == 0 and "bootstrapped" in err
    code, out, _ = _run(capsys, "attack", table_csv, "--kind", "shuffle", "-o", tmp_path / "s.csv")
    assert sorted(table_csv.read_text().splitlines()) == sorted((tmp_path / "s.csv").read_text().splitlines())


def test_bound_prints_reference_values(capsys, tmp_path):
    code, out, _ = _run(capsys, "bound", "--sigma", "0.1,0.5,1.0")
    assert code == 0
    assert [line.split(",")[1] for line in out.split()[1:]] == ["30.1295", "14.9496", "7.0440"]
    code, out, _ = _run(capsys, "bound", "--sigma", "0.1,0.2,0.5", "--sample-size", "--q", 3.09,
                        "--plot", tmp_path / "b.png")
    assert [line.split(",")[2] for line in out.split()[1:]] == ["108", "153", "437"]
    assert (tmp_path / "b.png").exists()


def test_trace_rank(capsys):
    code, out, _ = _run(capsys, "trace", "--rank", 0.5, "--m", 6, "--seed", 7)
    rep = json.loads(out)
    assert rep["bits"] == [0, 1, 0, 1, 1, 0] and rep["seed"] == 7


def test_trace_row(capsys, table_csv):
    code, out, _ = _run(capsys, "trace", table_csv, "--key", 928, "--row", 3)
    rep = json.loads(out)
    assert code == 0 and len(rep["bits"]) == rep["m"] == 5 and 0 <= rep["normalized_rank"] <= 1


def test_calibrate_and_use_null(tmp_path, capsys, table_csv):
    null = tmp_path / "null.json"
    code, out, _ = _run(capsys, "calibrate", "--key", 928, "--n-tables", 12, "--rows", 500,
                        "--resamples", 2000, "-o", null)
    assert code == 0 and json.loads(out)["source"] == "monte_carlo"
    code, out, _ = _run(capsys, "detect", table_csv, "--key", 928, "--null", null)
    assert json.loads(out)["null"]["source"] == "monte_carlo"


def test_fidelity_command(tmp_path, capsys, table_csv):
    code, out, _ = _run(capsys, "fidelity", table_csv, table_csv, "--report", tmp_path / "f.json")
    assert code == 0 and out == ""
    assert json.loads((tmp_path / "f.json").read_text())["density"] == 1.0


def test_sweep_command(tmp_path, capsys):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("attacks = none, shuffle\nrows = 500\ntrials = 2\nnull = theoretical\n")
    code, out, _ = _run(capsys, "sweep", cfg, "--csv", tmp_path / "g.csv", "--plot",
                        tmp_path / "g.png", "--seed", 11)
    rep = json.loads(out)
    assert code == 0 and rep["seed"] == 11 and len(rep["rows"]) == 2
    assert rep["rows"][0]["z_values"] == rep["rows"][1]["z_values"]
    assert (tmp_path / "g.png").exists()
