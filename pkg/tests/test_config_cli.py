import json

import pytest

from invpot.cli import main
from invpot.config import OUTPUT_ENV, RunConfig, apply_overrides, dump_config, load_config, parse_text, parse_value
from invpot.net import ConfigurationError

TINY = ["--set", "epochs=3", "--set", "n_data=8", "--set", "n_interior=8", "--set", "n_initial=8",
        "--set", "n_boundary=8", "--set", "data_nodes=30", "--set", "nl=1", "--set", "nn=4",
        "--set", "resolution=4"]


def test_parse_values():
    assert parse_value("epochs", "2e4") == 20000
    assert parse_value("lam", "1e-2") == 0.01
    assert parse_value("relative_noise", "yes") is True
    assert parse_value("data_nodes", "auto") is None
    assert parse_value("scheme", " standard ") == "standard"
    with pytest.raises(ConfigurationError):
        parse_value("epochs", "1.5")
    with pytest.raises(ConfigurationError):
        parse_value("strict_alternation", "maybe")


def test_overrides_and_aliases():
    cfg = apply_overrides(RunConfig(), {"lambda": "10", "nl": "4", "nn": "30", "delta": "0.05"})
    assert cfg.train.lam == 10.0 and cfg.train.delta == 0.05
    assert (cfg.u_layers, cfg.q_layers, cfg.u_width, cfg.q_width) == (4, 4, 30, 30)
    with pytest.raises(ConfigurationError):
        apply_overrides(RunConfig(), {"learning_speed": "1"})
    with pytest.raises(ConfigurationError):
        apply_overrides(RunConfig(), {"scheme": "ritz"})
    with pytest.raises(ConfigurationError):
        apply_overrides(RunConfig(), {"problem": "example9"})


def test_text_format_round_trip(tmp_path):
    text = "# desk run\nproblem = example2  # the disk\nepochs = 500\n\nlam = 0.1\n"
    assert parse_text(text) == {"problem": "example2", "epochs": "500", "lam": "0.1"}
    path = tmp_path / "run.cfg"
    path.write_text(text)
    cfg = load_config(path, {"epochs": "7"})
    assert cfg.problem == "example2" and cfg.train.epochs == 7 and cfg.train.lam == 0.1
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg
    with pytest.raises(ConfigurationError):
        parse_text("epochs 5")


def test_key_ignores_output_and_repeats():
    a = RunConfig()
    assert a.key() == apply_overrides(a, {"output": "/elsewhere", "repeats": "5"}).key()
    assert a.key() != apply_overrides(a, {"seed": "1"}).key()


def test_output_root_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
    assert RunConfig().output_dir() == tmp_path
    assert RunConfig(output="x").output_dir().name == "x"


def _call(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_cli_run_and_metrics(tmp_path, capsys):
    code, out, _ = _call(capsys, ["run", "--output", str(tmp_path)] + TINY)
    assert code == 0
    payload = json.loads(out)
    assert payload["status"] == "ok" and payload["epochs_run"] == 3
    for name in ("checkpoint.json", "train_log.csv", "metrics.json", "manifest.json", "config.txt"):
        assert (tmp_path / name).exists()
    code, out, _ = _call(capsys, ["metrics", "--checkpoint", str(tmp_path / "checkpoint.json"),
                                  "--resolution", "4"])
    assert code == 0 and json.loads(out)["Re_q"] == pytest.approx(payload["Re_q"])


def test_cli_errors_are_json(tmp_path, capsys):
    code, _, err = _call(capsys, ["run", "--set", "epochs=-3"])
    assert code == 2 and json.loads(err)["error"] == "configuration"
    code, _, err = _call(capsys, ["frobnicate"])
    assert code == 2 and "message" in json.loads(err)
    code, _, err = _call(capsys, ["metrics", "--checkpoint", str(tmp_path / "missing.json")])
    assert code == 4 and json.loads(err)["error"] == "io"
    code, _, err = _call(capsys, ["study-lambda", "--lambdas", "a,b"])
    assert code == 2


def test_cli_forward_solve(tmp_path, capsys):
    dump = tmp_path / "uT.csv"
    code, out, _ = _call(capsys, ["forward-solve", "--h", "0.25", "--k", "0.125", "--dump", str(dump)])
    assert code == 0
    payload = json.loads(out)
    assert payload["nodes"] == [5, 5] and payload["steps"] == 8
    lines = dump.read_text().splitlines()
    assert lines[0] == "x0,x1,u_T" and len(lines) == 26


def test_cli_grad_check(capsys):
    code, out, _ = _call(capsys, ["grad-check", "--points", "8", "--set", "nl=1", "--set", "nn=3"])
    assert code == 0 and json.loads(out)["passed"] is True


def test_cli_mollify_rate(tmp_path, capsys):
    code, out, _ = _call(capsys, ["mollify-rate", "--deltas", "0.1,0.01", "--trials", "1",
                                  "--output", str(tmp_path)])
    assert code == 0
    assert len(json.loads(out)["rows"]) == 2
    assert (tmp_path / "mollify-rate.csv").exists() and (tmp_path / "manifest.json").exists()


def test_cli_studies_with_tiny_budget(tmp_path, capsys):
    base = ["--output", str(tmp_path), "--set", "repeats=1"] + TINY
    code, out, _ = _call(capsys, ["study-lambda", "--lambdas", "0.01,1"] + base)
    assert code == 0 and len(json.loads(out)["rows"]) == 2
    code, out, _ = _call(capsys, ["compare-schemes"] + base)
    assert code == 0 and "re_q_lower" in json.loads(out)["summary"]
    code, out, _ = _call(capsys, ["study-noise", "--deltas", "0.01,0.1"] + base)
    assert code == 0 and "slope_re_q" in json.loads(out)["summary"]
    code, out, _ = _call(capsys, ["study-arch", "--layers", "1", "--widths", "3,4"] + base)
    assert code == 0 and len(json.loads(out)["rows"]) == 6
    for sub in ("study-lambda", "compare-schemes", "study-noise", "study-arch"):
        assert (tmp_path / sub / "manifest.json").exists()
