import io
import json

import pytest

import vacua_lab.cli as cli
from vacua_lab.cli import run


def call(*argv):
    out = io.StringIO()
    code = run(list(argv), out=out)
    return code, out.getvalue()


def error_of(capsys):
    return json.loads(capsys.readouterr().err)["error"]


def test_fusion_level_one():
    code, text = call("fusion", "--algebra", "A1", "--level", "1")
    assert code == 0
    rows = [line.split("\t") for line in text.strip().splitlines()[1:]]
    assert len(rows) == 8
    assert {tuple(r[:3]) for r in rows if r[3] == "1"} == {("0", "0", "0"), ("0", "1", "1"), ("1", "0", "1"), ("1", "1", "0")}


def test_fusion_json_and_jobs_agree():
    code, serial = call("fusion", "--level", "2", "--format", "json")
    code2, pooled = call("fusion", "--level", "2", "--format", "json", "--jobs", "2")
    assert code == code2 == 0 and serial == pooled
    data = json.loads(serial)
    assert sum(r[3] for r in data["rows"]) == 10


def test_fusion_sl3():
    code, text = call("fusion", "--algebra", "A2", "--level", "1")
    assert code == 0 and text.count("\t1\n") == 9


def test_dim_commands():
    assert call("dim", "--genus", "1", "--level", "2")[1].strip().splitlines()[1].split("\t")[-1] == "3"
    assert call("dim", "--genus", "2", "--level", "1")[1].strip().splitlines()[1].split("\t")[-1] == "4"
    code, text = call("dim", "--genus", "0", "--labels", "1", "1", "2", "2", "--level", "2", "--order", "alt")
    assert code == 0 and text.strip().splitlines()[1] == "0\t1 1 2 2\t1"


def test_character_leading_term():
    code, text = call("character", "--label", "0", "--level", "1", "--max-degree", "0")
    assert code == 0 and text == "offset\tstep\tcoefficient\n0\t0\t1\n"
    code, text = call("character", "--label", "1", "--level", "1", "--max-degree", "3", "--format", "json")
    data = json.loads(text)
    assert data["conformal_weight"] == "1/4"
    assert [t["coefficient"] for t in data["terms"]] == [2, 2, 6, 8]
    assert data["terms"][2]["exponent"] == {"offset": "1/4", "step": 2}


def test_virasoro_check():
    code, text = call("virasoro-check", "--label", "1", "--level", "1", "--cutoff", "3")
    assert code == 0 and all(line.endswith("ok") for line in text.strip().splitlines()[1:])


def test_fock_command():
    code, text = call("fock", "--charge", "-1", "--max-degree", "3", "--format", "json")
    data = json.loads(text)
    assert code == 0
    assert [r[3] for r in data["rows"]] == [1, 1, 2, 3]
    assert data["states"][1]["states"] == ["|-1;1>"]
    assert data["spot_checks"]["anticommutators"] > 0


def test_vacua_commands():
    assert call("vacua", "--labels", "1", "1", "0", "--level", "1")[1].strip().endswith("\t1")
    assert call("vacua", "--labels", "1", "1", "1", "--level", "1")[1].strip().endswith("\t0")
    assert call("vacua", "--labels", "1", "1", "2", "--level", "2", "--points", "0", "1/2", "-3")[1].strip().endswith("\t1")
    code, text = call("vacua", "--abelian", "--points", "0", "1", "5/2")
    assert code == 0 and text.strip().endswith("\t1")


def test_glue_series_commands():
    code, text = call("glue-series", "--label", "1", "--level", "1", "--max-degree", "2")
    assert code == 0
    assert [line.split("\t")[-1] for line in text.strip().splitlines()[1:]] == ["2", "2", "6"]
    code, text = call("glue-series", "--labels", "1", "1", "--level", "2", "--order", "1", "--format", "json")
    assert code == 0 and json.loads(text)["series"]["offset"] == "3/16"
    code, text = call("glue-series", "--abelian", "--points", "0", "1", "2", "--max-degree", "1")
    assert code == 0 and text.splitlines()[1:] == ["0\t0\t|0;1>\t-1/2", "0\t1\t|0;1>\t-9/4"]


def test_wall_sigma_and_compose(tmp_path):
    code, text = call("wall-sigma", "--lagrangians", "[[[1,0]],[[0,1]],[[1,1]]]")
    assert code == 0 and text == "sigma\n-1\n"
    f = tmp_path / "lags.json"
    f.write_text("[[[0,1]],[[1,0]],[[1,1]]]")
    assert call("wall-sigma", "--lagrangians", "@%s" % f)[1] == "sigma\n1\n"
    assert call("wall-sigma", "--random", "5", "--genus", "2", "--seed", "3")[1].strip().endswith("ok")
    ident = '{"matrix": [[1, 0], [0, 1]], "s": 1}'
    code, text = call("compose", "--first", ident, "--second", ident, "--lagrangians", "[[[1,0]],[[1,0]],[[1,0]]]")
    assert code == 0 and text.strip().splitlines()[1].endswith("\t2")
    assert call("compose", "--random", "5", "--genus", "2")[1].strip().endswith("ok")


@pytest.mark.parametrize("argv", [
    ["fusion", "--level", "2"],
    ["fock", "--charge", "1", "--max-degree", "3", "--format", "json"],
    ["glue-series", "--abelian", "--points", "0", "1", "2", "--max-degree", "1", "--format", "json"],
    ["wall-sigma", "--random", "4", "--genus", "3", "--seed", "11", "--format", "json"],
])
def test_output_is_byte_deterministic(argv):
    assert call(*argv) == call(*argv)


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"level": 2, "genus": 1, "format": "json"}))
    data = json.loads(call("dim", "--config", str(cfg))[1])
    assert data["level"] == 2 and data["rows"][0][-1] == 3
    data = json.loads(call("dim", "--config", str(cfg), "--level", "3")[1])
    assert data["rows"][0][-1] == 4


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": "red"}))
    assert call("dim", "--config", str(bad))[0] == 2
    assert error_of(capsys)["kind"] == "config"
    assert call("dim", "--config", str(tmp_path / "missing.json"))[0] == 2
    capsys.readouterr()
    for argv in (["fusion", "--level", "0"], ["fusion", "--algebra", "E8"], ["fusion", "--format", "xml"],
                 ["character", "--label", "5", "--level", "1"], ["vacua", "--abelian"],
                 ["vacua", "--labels", "1", "1", "--points", "0", "0"], ["nonsense"]):
        assert call(*argv)[0] == 2, argv
        err = error_of(capsys)
        assert err["exit_code"] == 2 and err["message"]


def test_cutoff_cap_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("VACUA_LAB_MAX_CUTOFF", "2")
    assert call("character", "--label", "0", "--max-degree", "3")[0] == 2
    assert "VACUA_LAB_MAX_CUTOFF" in error_of(capsys)["message"]
    assert call("character", "--label", "0", "--max-degree", "2")[0] == 0


def test_stabilization_failure(monkeypatch, capsys):
    monkeypatch.setenv("VACUA_LAB_MAX_TRUNCATION", "1")
    assert call("vacua", "--labels", "1", "1", "0", "--level", "1")[0] == 4
    err = error_of(capsys)
    assert err["kind"] == "stabilization" and "certificate" in err["details"]


def test_invariant_violation(monkeypatch, capsys):
    monkeypatch.setattr(cli, "fusion_oracle", lambda *a: 7)
    assert call("fusion", "--level", "1")[0] == 3
    err = error_of(capsys)
    assert err["kind"] == "invariant" and err["details"]["oracle"] == 7


def test_main_exits_with_code():
    with pytest.raises(SystemExit) as exc:
        cli.main(["dim", "--genus", "1", "--level", "1"])
    assert exc.value.code == 0
