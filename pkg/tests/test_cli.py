import json

import jsonschema
import pytest

from regretscope.cli import main
from regretscope.report import data_path, schema_path

SMALL = ["--seeds", "2", "--episodes", "1500", "--eval-episodes", "20"]


def _schema(name):
    return json.loads(schema_path(name).read_text())


def _run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_worked_example_text(capsys):
    code, out, _ = _run(capsys, ["worked-example"])
    assert code == 0
    for s in ("4.263", "0.271", "0.312"):
        assert s in out


def test_worked_example_json_validates(capsys):
    code, out, _ = _run(capsys, ["--format", "json", "worked-example"])
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, _schema("report"))
    assert doc["kind"] == "worked-example"


def test_worked_example_delta_zero(capsys):
    code, out, _ = _run(capsys, ["--format", "json", "worked-example", "--delta", "0"])
    assert code == 0
    doc = json.loads(out)
    assert doc["values"]["r_total"] == pytest.approx(0.0, abs=1e-9)


def test_solve_bundled(capsys, tmp_path):
    files = [str(data_path(n)) for n in ("worked_train_env.json", "worked_rho0.json", "worked_pi0.json")]
    code, out, _ = _run(capsys, ["--format", "json", "--out", str(tmp_path), "solve", *files])
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, _schema("report"))
    assert doc["r_total"] == pytest.approx(doc["r_rec"] + doc["r_dec"], abs=1e-12)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    jsonschema.validate(manifest, _schema("manifest"))
    assert set(manifest["inputs"]) == {"env", "rho", "pi"}


def test_solve_budget_exit(capsys):
    files = [str(data_path(n)) for n in ("worked_train_env.json", "worked_rho0.json", "worked_pi0.json")]
    code, _, err = _run(capsys, ["solve", *files, "--budget", "1"])
    assert code == 3 and "budget" in err


def test_malformed_env_exit(capsys, tmp_path):
    env = json.loads(data_path("worked_train_env.json").read_text())
    env["tau"][1][0] = [x * 0.5 for x in env["tau"][1][0]]
    bad = tmp_path / "env.json"
    bad.write_text(json.dumps(env))
    files = [str(bad), str(data_path("worked_rho0.json")), str(data_path("worked_pi0.json"))]
    code, _, err = _run(capsys, ["solve", *files])
    assert code == 2 and "tau" in err


def test_missing_file_exit(capsys, tmp_path):
    code, _, err = _run(capsys, ["solve", str(tmp_path / "nope.json"), "a", "b"])
    assert code == 2


def test_bad_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["maze", "run", "--filter", "sepia"])
    assert exc.value.code == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["maze", "run", "--filter", "hidedoor", *SMALL],
        ["maze", "perturb", "--mode", "mask", "--p", "0.3", "0", *SMALL],
        ["maze", "similarity", "--filter", "hidecolors"],
        ["maze", "coarsen", "--levels", "0,1;", *SMALL],
    ],
)
def test_maze_commands_and_replay(capsys, tmp_path, argv):
    out = tmp_path / "run"
    code, text, _ = _run(capsys, ["--out", str(out), *argv])
    assert code == 0 and text
    manifest = json.loads((out / "manifest.json").read_text())
    jsonschema.validate(manifest, _schema("manifest"))
    jsonschema.validate(json.loads((out / "report.json").read_text()), _schema("report"))
    code, text, _ = _run(capsys, ["replay", str(out / "manifest.json")])
    assert code == 0 and "byte-identical" in text


def test_replay_detects_tampering(capsys, tmp_path):
    out = tmp_path / "run"
    assert main(["--out", str(out), "worked-example"]) == 0
    capsys.readouterr()
    m = json.loads((out / "manifest.json").read_text())
    m["params"]["delta"] = 0.2
    (out / "manifest.json").write_text(json.dumps(m))
    code, _, err = _run(capsys, ["replay", str(out / "manifest.json")])
    assert code == 1 and "mismatch" in err


def test_default_out_dir(capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, _, _ = _run(capsys, ["maze", "similarity"])
    assert code == 0
    assert (tmp_path / "runs" / "maze-similarity" / "manifest.json").exists()
