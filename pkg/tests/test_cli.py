import json

import pytest

from susyfactor.cli import main

BROKEN = """
dimension = 2
[phases]
phi = "(x1^2 + x2^2)/2"
[operator]
A = [["1", "0"], ["0", "1"]]
U = ["0", "0"]
v = "x1^2 + x2^2 - 2*h + 1"
[verify]
box = [[-1.0, 1.0], [-1.0, 1.0]]
grid_points = 5
"""


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gallery_pass(capsys):
    code, out, _ = run(["gallery", "witten", "--grid", "7"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["verdict"] == "PASS"
    assert rep["environment"]["grid_points"] == 7
    assert {c["name"] for c in rep["checks"]} >= {"assumption", "eikonal_r1", "factorization"}


def test_gallery_fail(capsys):
    code, out, _ = run(["gallery", "r3-example", "--grid", "5", "--h", "0.1"], capsys)
    assert code == 1 and json.loads(out)["verdict"] == "FAIL"


def test_verify_failing_spec_file(tmp_path, capsys):
    p = tmp_path / "broken.toml"
    p.write_text(BROKEN)
    code, out, _ = run(["verify", str(p)], capsys)
    rep = json.loads(out)
    assert code == 1
    assert not next(c for c in rep["checks"] if c["name"] == "factorization")["pass"]


def test_input_errors(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("dimension = = 2\n")
    code, _, err = run(["verify", str(p)], capsys)
    assert code == 2 and "malformed TOML" in err
    code, _, err = run(["gallery", "nope"], capsys)
    assert code == 2 and "unknown gallery" in err
    code, _, err = run(["verify", str(tmp_path / "missing.toml")], capsys)
    assert code == 2
    with pytest.raises(SystemExit) as info:
        main(["gallery", "witten", "--h", "2"])
    assert info.value.code == 2
    capsys.readouterr()


def test_out_file_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["gallery", "kfp", "--grid", "7", "--seed", "3", "--out", str(a)]) == 0
    assert main(["gallery", "kfp", "--grid", "7", "--seed", "3", "--out", str(b)]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and str(a) in out
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text())["environment"]["seed"] == 3


def test_tensor(tmp_path, capsys):
    code, out, _ = run(["tensor", "witten", "witten", "--grid", "3", "--h", "0.1"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["verdict"] == "PASS"
    p = tmp_path / "broken.toml"
    p.write_text(BROKEN)
    code, out, _ = run(["tensor", str(p), "witten", "--grid", "3", "--h", "0.1"], capsys)
    assert code == 1 and json.loads(out)["verdict"] == "FAIL"


def test_morse2d_command(tmp_path, capsys):
    code, out, _ = run(["morse2d", "perturbation-two-wells", "--grid", "201"], capsys)
    rep = json.loads(out)["morse2d"]
    assert code == 1
    assert rep["components"] == 3 and rep["per_component_pass"]
    assert not rep["glue"]["pass"] and rep["glue"]["verdict_kind"] == "sampled"
    p = tmp_path / "flat.toml"
    p.write_text(BROKEN + "[morse2d]\ngrid_points = 101\n")
    code, out, _ = run(["morse2d", str(p)], capsys)
    assert code == 0 and json.loads(out)["morse2d"]["components"] == 1
    code, _, err = run(["morse2d", "r3-example"], capsys)
    assert code == 2 and "two-dimensional" in err
