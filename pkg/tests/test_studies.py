import csv
import json

import pytest

from invpot.config import apply_overrides, RunConfig
from invpot.studies import (RunRecord, compare_schemes, execute, mollify_rate, repeat_configs, seeds_for,
                            study_architecture, study_lambda, study_noise, summarize, train_and_evaluate)
from invpot.problem import example1


def tiny(**extra):
    kv = dict(epochs=3, n_data=8, n_interior=8, n_initial=8, n_boundary=8, data_nodes=30,
              nl=1, nn=4, resolution=4, repeats=2)
    kv.update(extra)
    return apply_overrides(RunConfig(), {k: str(v) for k, v in kv.items()})


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_seeds_and_repeats():
    cfg = tiny(seed=5, repeats=3)
    assert seeds_for(cfg) == [5, 6, 7]
    assert [c.train.seed for c in repeat_configs(cfg)] == [5, 6, 7]


def test_run_cache_is_reused(tmp_path):
    cfg = tiny()
    first = train_and_evaluate(cfg, tmp_path)
    files = sorted(p.name for p in (tmp_path / "runs").iterdir())
    assert len(files) == 3
    stamp = (tmp_path / "runs" / files[0]).stat().st_mtime_ns
    again = train_and_evaluate(cfg, tmp_path)
    assert again == first
    assert (tmp_path / "runs" / files[0]).stat().st_mtime_ns == stamp


def test_summary_statistics():
    recs = [RunRecord({}, s, "ok", 1, q, 0.1, 0.2, 0.0) for s, q in enumerate([0.1, 0.3])]
    recs.append(RunRecord({}, 2, "diverged", 1, 0.2, 0.1, 0.2, 0.0))
    s = summarize(recs)
    assert s["n"] == 3 and s["diverged"] == 1
    assert s["re_q_mean"] == pytest.approx(0.2) and s["re_u_std"] == pytest.approx(0.0)


def test_study_outputs_are_idempotent(tmp_path):
    cfg = tiny()
    res = study_lambda(cfg, [1e-2, 1.0, 10.0], tmp_path)
    header = read_csv(res.csv_path)
    assert [r["lam"] for r in header] == ["0.01", "1.0", "10.0"]
    assert {"re_q_mean", "re_q_std", "re_lap_u_mean", "diverged"} <= set(header[0])
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seeds"] == [0, 1] and manifest["config"]["lam"] == 0.01 and "version" in manifest
    assert "interior_not_worse" in res.summary
    before = res.csv_path.read_bytes(), (tmp_path / "manifest.json").read_bytes()
    study_lambda(cfg, [1e-2, 1.0, 10.0], tmp_path)
    assert (res.csv_path.read_bytes(), (tmp_path / "manifest.json").read_bytes()) == before


def test_single_value_studies_degenerate():
    cfg = tiny(repeats=1)
    assert len(study_lambda(cfg, [0.5]).rows) == 1
    noise = study_noise(cfg, [0.0])
    assert len(noise.rows) == 1 and noise.summary["inversions"] == 0
    arch = study_architecture(cfg, [1], [3])
    assert [r["metric"] for r in arch.rows] == ["re_q", "re_u", "re_lap_u"]


def test_architecture_csv_schema(tmp_path):
    res = study_architecture(tiny(repeats=1), [1], [3, 4], tmp_path)
    rows = read_csv(res.csv_path)
    assert list(rows[0]) == ["NL", "NN", "metric", "mean", "std"]
    assert len(rows) == 6
    assert "1" in res.summary["spearman_width_vs_re_q"]


def test_scheme_comparison_rows(tmp_path):
    res = compare_schemes(tiny(repeats=1), tmp_path)
    assert [r["scheme"] for r in res.rows] == ["sobolev", "standard"]
    assert res.summary["re_u_ratio"] >= 1.0


def test_process_pool_matches_serial():
    cfgs = repeat_configs(tiny())
    assert execute(cfgs, workers=2) == execute(cfgs)


def test_three_dimensional_run():
    rec = train_and_evaluate(tiny(problem="example3", repeats=1, n_boundary=12))
    assert rec.status == "ok" and rec.epochs_run == 3 and 0 < rec.re_u < 10


def test_mollify_rate_study(tmp_path):
    res = mollify_rate(example1(), [0.1, 0.01, 0.001], trials=2, seed=1, out=tmp_path)
    assert len(res.rows) == 3 and res.rows[0]["epsilon"] == pytest.approx(0.1 ** (1 / 3))
    assert 0.1 < res.summary["slope"] < 0.6
    assert read_csv(res.csv_path)[0].keys() == {"delta", "epsilon", "sup_error", "trials"}
