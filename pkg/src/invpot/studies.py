"""Experiment drivers: repeated runs, sweeps over noise, lambda and architecture, scheme comparison.

Every study writes a tidy CSV and a ``manifest.json`` (full configuration,
seeds, package version) under its output directory. Single runs are stored
under ``runs/<config-hash>-s<seed>.json`` (in ``cache`` when given, so several
studies can share runs); a rerun with the same
configuration loads them instead of retraining, which makes studies
resumable and their outputs reproducible byte for byte.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .config import RunConfig
from .metrics import evaluate_metrics
from .mollify import rate_study
from .train import run

METRICS = ("re_q", "re_u", "re_lap_u")


@dataclass
class RunRecord:
    config: dict
    seed: int
    status: str
    epochs_run: int
    re_q: float
    re_u: float
    re_lap_u: float
    final_loss: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def seeds_for(cfg: RunConfig) -> list[int]:
    """Repeat ``r`` trains with seed ``base + r``."""
    return [cfg.train.seed + r for r in range(cfg.repeats)]


_NOT_PER_RUN = ("output", "repeats")


def _comparable(d: dict) -> dict:
    return {k: v for k, v in d.items() if k not in _NOT_PER_RUN}


def _run_path(root: Path, cfg: RunConfig) -> Path:
    return root / "runs" / f"{cfg.key()}-s{cfg.train.seed}.json"


def train_and_evaluate(cfg: RunConfig, root: Path | None = None) -> RunRecord:
    """One training run plus test metrics; cached under ``root`` when given."""
    path = _run_path(root, cfg) if root is not None else None
    if path is not None and path.exists():
        stored = json.loads(path.read_text())
        if _comparable(stored.get("config", {})) == _comparable(cfg.to_dict()):
            return RunRecord(**stored)
    problem = cfg.get_problem()
    u_spec, q_spec = cfg.specs()
    ckpt = path.with_suffix(".ckpt.json") if path is not None else None
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
    res = run(problem, u_spec, q_spec, cfg.train, checkpoint_path=ckpt,
              log_path=path.with_suffix(".log.csv") if path is not None else None)
    rep = evaluate_metrics(problem, res.u, res.q, cfg.mesh_resolution())
    rec = RunRecord(cfg.to_dict(), cfg.train.seed, res.status, res.epochs_run,
                    rep.re_q, rep.re_u, rep.re_lap_u,
                    res.log[-1]["J_total"] if res.log else float("nan"))
    if path is not None:
        path.write_text(json.dumps(rec.to_dict(), indent=1, sort_keys=True))
    return rec


def _job(args):
    cfg, root = args
    return train_and_evaluate(cfg, root)


def execute(configs: list[RunConfig], root: Path | None = None, workers: int = 1) -> list[RunRecord]:
    """Run independent configurations, optionally in a process pool; order is preserved."""
    jobs = [(c, root) for c in configs]
    if workers <= 1 or len(jobs) <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, jobs))


def repeat_configs(cfg: RunConfig) -> list[RunConfig]:
    return [replace(cfg, train=replace(cfg.train, seed=s)) for s in seeds_for(cfg)]


def summarize(records: list[RunRecord]) -> dict[str, float]:
    out = {"n": len(records)}
    for m in METRICS:
        vals = np.array([getattr(r, m) for r in records], dtype=float)
        out[f"{m}_mean"] = float(np.mean(vals))
        out[f"{m}_std"] = float(np.std(vals))
    out["diverged"] = sum(r.status != "ok" for r in records)
    return out


def write_rows(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    keys = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def write_manifest(out: Path, study: str, cfg: RunConfig | None, extra: dict | None = None) -> Path:
    manifest = {"study": study, "version": __version__}
    if cfg is not None:
        manifest["config"] = cfg.to_dict()
        manifest["seeds"] = seeds_for(cfg)
    manifest.update(extra or {})
    out.mkdir(parents=True, exist_ok=True)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True, default=float))
    return path


@dataclass
class StudyResult:
    rows: list[dict]
    summary: dict
    csv_path: Path | None = None


def _sweep(cfg: RunConfig, param: str, values: list, out: Path | None,
           workers: int, cache: Path | None = None) -> tuple[list[dict], list[list[RunRecord]]]:
    configs, groups = [], []
    for v in values:
        base = replace(cfg, train=replace(cfg.train, **{param: v}))
        reps = repeat_configs(base)
        groups.append(len(reps))
        configs.extend(reps)
    records = execute(configs, cache or out, workers)
    rows, grouped, pos = [], [], 0
    for v, n in zip(values, groups):
        recs = records[pos:pos + n]
        pos += n
        grouped.append(recs)
        rows.append({param: v, **summarize(recs)})
    return rows, grouped


def study_noise(cfg: RunConfig, deltas, out: Path | None = None, workers: int = 1,
                cache: Path | None = None) -> StudyResult:
    """Re_q, Re_u, Re_lap_u against the noise level, with the fitted log-log slope of Re_q."""
    deltas = [float(d) for d in deltas]
    rows, _ = _sweep(cfg, "delta", deltas, out, workers, cache)
    pos = [(r["delta"], r["re_q_mean"]) for r in rows if r["delta"] > 0 and r["re_q_mean"] > 0]
    slope = float(np.polyfit(np.log([p[0] for p in pos]), np.log([p[1] for p in pos]), 1)[0]) \
        if len(pos) >= 2 else float("nan")
    means = [r["re_q_mean"] for r in sorted(rows, key=lambda r: r["delta"])]
    inversions = sum(b < a for a, b in zip(means, means[1:]))
    summary = {"slope_re_q": slope, "reference_slope": 1.0 / 3.0, "inversions": inversions}
    return _finish("study-noise", cfg, rows, summary, out)


def study_lambda(cfg: RunConfig, lambdas, out: Path | None = None, workers: int = 1,
                 cache: Path | None = None) -> StudyResult:
    """One row per lambda with mean and std of every metric over the repeats."""
    lambdas = [float(v) for v in lambdas]
    rows, _ = _sweep(cfg, "lam", lambdas, out, workers, cache)
    best = min(rows, key=lambda r: r["re_q_mean"])["lam"]
    summary = {"best_lambda": best}
    if len(rows) >= 3:
        by = {r["lam"]: r["re_q_mean"] for r in rows}
        lo, hi = min(by), max(by)
        mid = 1e-2 if 1e-2 in by else best
        summary["interior_not_worse"] = bool(by[mid] <= min(by[lo], by[hi]))
    return _finish("study-lambda", cfg, rows, summary, out)


def study_architecture(cfg: RunConfig, layers, widths, out: Path | None = None,
                       workers: int = 1, cache: Path | None = None) -> StudyResult:
    """Grid over (NL, NN) applied to both networks; rows are ``NL, NN, metric, mean, std``."""
    pairs = [(int(nl), int(nn)) for nl in layers for nn in widths]
    configs, counts = [], []
    for nl, nn in pairs:
        reps = repeat_configs(replace(cfg, u_layers=nl, q_layers=nl, u_width=nn, q_width=nn))
        configs.extend(reps)
        counts.append(len(reps))
    records = execute(configs, cache or out, workers)
    rows, pos, means = [], 0, {}
    for (nl, nn), n in zip(pairs, counts):
        s = summarize(records[pos:pos + n])
        pos += n
        means[(nl, nn)] = s["re_q_mean"]
        for m in METRICS:
            rows.append({"NL": nl, "NN": nn, "metric": m, "mean": s[f"{m}_mean"], "std": s[f"{m}_std"]})
    trend = {}
    for nl in sorted(set(p[0] for p in pairs)):
        xs = [nn for (l, nn) in pairs if l == nl]
        if len(xs) >= 2:
            rho = stats.spearmanr(xs, [means[(nl, nn)] for nn in xs]).statistic
            trend[str(nl)] = float(rho) if np.isfinite(rho) else float("nan")
    return _finish("study-arch", cfg, rows, {"spearman_width_vs_re_q": trend}, out)


def compare_schemes(cfg: RunConfig, out: Path | None = None, workers: int = 1,
                    cache: Path | None = None) -> StudyResult:
    """Sobolev-type loss (scheme I) against plain least squares (scheme II), identical seeds."""
    rows, _ = _sweep(cfg, "scheme", ["sobolev", "standard"], out, workers, cache)
    a, b = rows
    summary = {
        "re_q_lower": bool(a["re_q_mean"] < b["re_q_mean"]),
        "re_lap_u_lower": bool(a["re_lap_u_mean"] < b["re_lap_u_mean"]),
        "re_u_ratio": float(max(a["re_u_mean"], b["re_u_mean"]) / min(a["re_u_mean"], b["re_u_mean"]))
        if min(a["re_u_mean"], b["re_u_mean"]) > 0 else math.inf,
    }
    return _finish("compare-schemes", cfg, rows, summary, out)


def mollify_rate(problem, deltas, trials: int = 10, seed: int = 0, scale: float = 1.0,
                 out: Path | None = None) -> StudyResult:
    study = rate_study(problem, deltas, trials=trials, seed=seed, scale=scale)
    rows = [{"delta": r.delta, "epsilon": r.epsilon, "sup_error": r.sup_error, "trials": r.trials}
            for r in study.rows]
    summary = {"slope": study.slope, "problem": problem.name, "trials": trials, "seed": seed, "scale": scale}
    return _finish("mollify-rate", None, rows, summary, out)


def _finish(name: str, cfg, rows, summary, out) -> StudyResult:
    csv_path = None
    if out is not None:
        out = Path(out)
        csv_path = out / f"{name}.csv"
        write_rows(csv_path, rows)
        write_manifest(out, name, cfg, {"summary": summary})
    return StudyResult(rows, summary, csv_path)
