"""Command-line entry point.

    invpot run --config run.cfg --set delta=0.05 --set epochs=2000
    invpot metrics --checkpoint out/checkpoint.json --problem example1
    invpot study-noise --deltas 0.001,0.01,0.05,0.1
    invpot study-lambda --lambdas 1e-4,1e-2,10
    invpot study-arch --layers 3 --widths 10,20
    invpot compare-schemes
    invpot mollify-rate --problem example1
    invpot forward-solve --problem example1 --h 0.02 --k 0.005
    invpot grad-check --problem example1 --points 32

Results go to stdout as JSON and, for commands that produce files, under
``--output`` (default ``$INVPOT_OUTPUT_ROOT``, else ``./invpot-output``).
Failures exit nonzero with ``{"error": ..., "message": ...}`` on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .autodiff import NumericError
from .config import OUTPUT_ENV, RunConfig, dump_config, load_config
from .metrics import evaluate_checkpoint, evaluate_metrics
from .mollify import ResolutionError
from .net import ConfigurationError
from .oracle import FDGrid, loss_gradient_check, refinement_orders, solve_forward
from .problem import get_problem
from .studies import compare_schemes, mollify_rate, study_architecture, study_lambda, study_noise, write_manifest
from .train import run

EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO, EXIT_OTHER = 2, 3, 4, 1


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ConfigurationError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _overrides(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _config(args) -> RunConfig:
    over = _overrides(args.set)
    if getattr(args, "output", None):
        over["output"] = args.output
    return load_config(args.config, over)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _emit(payload: dict) -> None:
    print(json.dumps(_jsonable(payload), indent=1, sort_keys=True))


# -- commands ----------------------------------------------------------------

def cmd_run(args) -> dict:
    cfg = _config(args)
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    problem = cfg.get_problem()
    u_spec, q_spec = cfg.specs()
    (out / "config.txt").write_text(dump_config(cfg))
    res = run(problem, u_spec, q_spec, cfg.train, checkpoint_path=out / "checkpoint.json",
              log_path=out / "train_log.csv")
    rep = evaluate_metrics(problem, res.u, res.q, cfg.mesh_resolution())
    metrics = {"Re_q": rep.re_q, "Re_u": rep.re_u, "Re_lap_u": rep.re_lap_u,
               "Re_u_at_T_over_7": rep.re_u_at_seventh}
    (out / "metrics.json").write_text(json.dumps(_jsonable(rep.as_dict()), indent=1))
    write_manifest(out, "run", cfg, {"status": res.status, "epochs_run": res.epochs_run, "metrics": metrics})
    return {"status": res.status, "epochs_run": res.epochs_run, "output": out, **metrics}


def cmd_metrics(args) -> dict:
    problem = get_problem(args.problem)
    rep = evaluate_checkpoint(problem, args.checkpoint, args.resolution)
    return {"Re_q": rep.re_q, "Re_u": rep.re_u, "Re_lap_u": rep.re_lap_u,
            "Re_u_at_T_over_7": rep.re_u_at_seventh,
            "times": rep.times, "Re_u_series": rep.re_u_series}


def _study_out(cfg: RunConfig, name: str) -> Path:
    return cfg.output_dir() / name


def cmd_study_noise(args) -> dict:
    cfg = _config(args)
    res = study_noise(cfg, _floats(args.deltas), _study_out(cfg, "study-noise"), args.workers)
    return {"rows": res.rows, "summary": res.summary, "csv": res.csv_path}


def cmd_study_lambda(args) -> dict:
    cfg = _config(args)
    res = study_lambda(cfg, _floats(args.lambdas), _study_out(cfg, "study-lambda"), args.workers)
    return {"rows": res.rows, "summary": res.summary, "csv": res.csv_path}


def cmd_study_arch(args) -> dict:
    cfg = _config(args)
    res = study_architecture(cfg, _ints(args.layers), _ints(args.widths),
                             _study_out(cfg, "study-arch"), args.workers)
    return {"rows": res.rows, "summary": res.summary, "csv": res.csv_path}


def cmd_compare_schemes(args) -> dict:
    cfg = _config(args)
    res = compare_schemes(cfg, _study_out(cfg, "compare-schemes"), args.workers)
    return {"rows": res.rows, "summary": res.summary, "csv": res.csv_path}


def cmd_mollify_rate(args) -> dict:
    problem = get_problem(args.problem)
    deltas = sorted(_floats(args.deltas), reverse=True)
    out = Path(args.output) if args.output else Path(_default_root()) / "mollify-rate"
    res = mollify_rate(problem, deltas, args.trials, args.seed, args.scale, out)
    return {"rows": res.rows, "summary": res.summary, "csv": res.csv_path}


def cmd_forward_solve(args) -> dict:
    problem = get_problem(args.problem)
    grid = FDGrid.uniform(problem.domain, args.h, args.k)
    sol = solve_forward(problem, problem.q_exact, grid)
    payload = {"problem": problem.name, "h": args.h, "k": args.k, "nodes": list(grid.shape),
               "steps": grid.steps, "max_error": sol.max_error(problem.u_exact)}
    if args.refine:
        payload["orders"] = refinement_orders(problem, problem.q_exact, problem.domain, args.h, args.k)
    if args.dump:
        field = sol.final_field()
        np.savetxt(args.dump, np.column_stack([field.nodes(), field.values.ravel()]),
                   delimiter=",", header=",".join([f"x{i}" for i in range(field.dim)] + ["u_T"]),
                   comments="")
        payload["dump"] = args.dump
    return payload


def cmd_grad_check(args) -> dict:
    cfg = _config(args)
    u_spec, q_spec = cfg.specs()
    res = loss_gradient_check(cfg.get_problem(), u_spec, q_spec, points=args.points, seed=cfg.train.seed,
                              scheme=cfg.train.scheme, lam=cfg.train.lam)
    res["passed"] = res["max_rel_error"] < args.tolerance
    return res


def _default_root() -> str:
    return os.environ.get(OUTPUT_ENV, "invpot-output")


# -- parser --------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """Usage errors become configuration errors so they are reported as JSON too."""

    def error(self, message):
        raise ConfigurationError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="invpot", description="Potential reconstruction from final-time data.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one configuration key")
        sp.add_argument("--output", help=f"output directory (default ${OUTPUT_ENV})")
        return sp

    with_config(sub.add_parser("run", help="train one reconstruction")).set_defaults(fn=cmd_run)

    sp = sub.add_parser("metrics", help="test-mesh errors of a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--problem", default="example1")
    sp.add_argument("--resolution", type=int, help="test mesh points per axis (default 50, 20 in 3-D)")
    sp.set_defaults(fn=cmd_metrics)

    for name, fn, extra in (
        ("study-noise", cmd_study_noise, [("--deltas", "0.001,0.01,0.05,0.1")]),
        ("study-lambda", cmd_study_lambda, [("--lambdas", "1e-4,1e-3,1e-2,1e-1,1,10")]),
        ("study-arch", cmd_study_arch, [("--layers", "2,3,4"), ("--widths", "10,20,30")]),
        ("compare-schemes", cmd_compare_schemes, []),
    ):
        sp = with_config(sub.add_parser(name))
        for flag, default in extra:
            sp.add_argument(flag, default=default)
        sp.add_argument("--workers", type=int, default=1)
        sp.set_defaults(fn=fn)

    sp = sub.add_parser("mollify-rate", help="sup-error of the mollified Laplacian against noise level")
    sp.add_argument("--problem", default="example1")
    sp.add_argument("--deltas", default="0.1,0.01,0.001,0.0001")
    sp.add_argument("--trials", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--scale", type=float, default=1.0)
    sp.add_argument("--output")
    sp.set_defaults(fn=cmd_mollify_rate)

    sp = sub.add_parser("forward-solve", help="finite-difference forward solve with the exact potential")
    sp.add_argument("--problem", default="example1")
    sp.add_argument("--h", type=float, default=0.02)
    sp.add_argument("--k", type=float, default=0.005)
    sp.add_argument("--refine", action="store_true", help="also report observed convergence orders")
    sp.add_argument("--dump", help="write u(., T) on the grid as CSV")
    sp.set_defaults(fn=cmd_forward_solve)

    sp = with_config(sub.add_parser("grad-check", help="loss gradient against central differences"))
    sp.add_argument("--points", type=int, default=32)
    sp.add_argument("--tolerance", type=float, default=1e-4)
    sp.set_defaults(fn=cmd_grad_check)
    return p


def _error(kind: str, exc: BaseException, **extra) -> dict:
    return {"error": kind, "message": str(exc), **extra}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        payload = args.fn(args)
    except (ConfigurationError, ResolutionError) as exc:
        code, err = EXIT_CONFIG, _error("configuration", exc)
    except NumericError as exc:
        code, err = EXIT_NUMERIC, _error("numeric", exc, term=exc.term)
    except OSError as exc:
        code, err = EXIT_IO, _error("io", exc)
    except (ValueError, KeyError) as exc:
        code, err = EXIT_CONFIG, _error("invalid-input", exc)
    except Exception as exc:  # noqa: BLE001 - every failure must surface as JSON
        code, err = EXIT_OTHER, _error(type(exc).__name__, exc)
    else:
        _emit(payload)
        return 0
    print(json.dumps(_jsonable(err)), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
