import csv
import io
import json

import pytest

from nullity_lab.cli import ConfigError, main, read_config


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_flat_analyze_passes(capsys):
    code, out, _ = run(capsys, "analyze", "--energy", "y1^2+y2^2", "--dim", "2", "--point", "0,0;1,2",
                       "--checks", "identities,nullity:R", "--format", "json")
    assert code == 0
    rep = json.loads(out)
    assert rep["passed"] is True
    assert "convention_ledger" in rep
    assert "μ_R = 2" in out or '"mu": 2' in out


def test_syntax_error_exit_code(capsys):
    code, _, err = run(capsys, "analyze", "--energy", "y1 ++ y2", "--dim", "2", "--point", "0,0;1,1")
    assert code == 2
    assert "offset 3" in err or "3" in err


def test_non_admissible_exit_code(capsys):
    code, _, err = run(capsys, "analyze", "--energy", "y1^2-y2^2", "--dim", "2", "--point", "0,0;1,2")
    assert code == 3


def test_missing_energy(capsys):
    code, _, _ = run(capsys, "verify", "--point", "0,0;1,1")
    assert code == 2


def test_point_dimension_mismatch(capsys):
    code, _, err = run(capsys, "nullity", "--energy", "y1^2+y2^2", "--dim", "2", "--point", "0,0,0;1,1,1")
    assert code == 2 and "dim" in err


def test_nullity_json(capsys):
    code, out, _ = run(capsys, "nullity", "--energy", "exp(-x1)*(exp(-x1*x3)*y1^2*y3+x2*y2^3)^(2/3)",
                       "--dim", "3", "--which", "P", "--point", "0,1,0;1,1,1", "--format", "json")
    assert code == 0
    rep = json.loads(out)
    assert "NaN" not in out
    assert rep["points"][0]["mu"] == 2 if "points" in rep else '"mu": 2' in out


def test_bracket_command(capsys):
    code, out, _ = run(capsys, "bracket", "--energy", "exp(-x1)*(exp(-x1*x3)*y1^2*y3+x2*y2^3)^(2/3)",
                       "--dim", "3", "--point", "0,1,0;1,1,1", "--field", "A=1,y2/y1,0",
                       "--field", "B=0,0,1", "--format", "json")
    assert code in (0, 1)
    assert '"is_horizontal": false' in out


def test_classify_csv(capsys):
    code, out, _ = run(capsys, "classify", "--energy", "y1^2+y2^2+y3^2", "--dim", "3",
                       "--point", "0,0,0;1,2,3", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows


def test_sampling_flags(capsys):
    code, out, _ = run(capsys, "verify", "--energy", "y1^2+(1+x1^2)*y2^2", "--dim", "2", "--samples", "3",
                       "--seed", "5", "--box=-1..1,-1..1,0.5..2,0.5..2", "--format", "json")
    assert code == 0
    assert json.loads(out)["passed"] is True


def test_example_deterministic(capsys):
    _, a, _ = run(capsys, "example", "1", "--seed", "42", "--format", "json")
    _, b, _ = run(capsys, "example", "1", "--seed", "42", "--format", "json")
    assert a == b
    rep = json.loads(a)
    assert rep["errata"]


def test_out_file(tmp_path, capsys):
    path = tmp_path / "r.json"
    code, out, _ = run(capsys, "classify", "--energy", "y1^2+y2^2", "--dim", "2", "--point", "0,0;1,1",
                       "--format", "json", "--out", str(path))
    assert code == 0 and out == ""
    assert json.loads(path.read_text())["passed"] is True


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# flat plane\nenergy = y1^2+y2^2\ndim = 2\npoint = 0,0;1,1\npoint = 1,1;2,1\n"
                   "checks = identities\nformat = json\n")
    parsed = read_config(str(cfg))
    assert parsed.points == ["0,0;1,1", "1,1;2,1"]
    code, out, _ = run(capsys, "analyze", "--config", str(cfg))
    assert code == 0


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    with pytest.raises(ConfigError):
        read_config(str(bad))
    with pytest.raises(ConfigError):
        read_config(str(tmp_path / "missing.cfg"))


def test_unknown_check(capsys):
    code, _, _ = run(capsys, "analyze", "--energy", "y1^2", "--dim", "1", "--point", "0;1", "--checks", "magic")
    assert code == 2


def test_version(capsys):
    code, out, _ = run(capsys, "--version")
    assert code == 0 and "0.1.0" in out
