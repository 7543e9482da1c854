"""Relative L2 reconstruction errors on a uniform test mesh."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .net import Network, load_checkpoint


@dataclass
class MetricsReport:
    re_q: float
    re_u: float
    re_lap_u: float
    times: list = field(default_factory=list)
    re_u_series: list = field(default_factory=list)
    re_u_at_seventh: float = float("nan")

    def as_dict(self) -> dict:
        return asdict(self)


def default_resolution(dim: int) -> int:
    """50 points per axis, 20 in three dimensions (20^4 space-time points)."""
    return 20 if dim >= 3 else 50


def space_mesh(domain, resolution: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, resolution) for lo, hi in domain.bounds]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _rel(err2: float, ref2: float) -> float:
    return float(np.sqrt(err2 / ref2)) if ref2 > 0 else float("nan")


def _eval(fn, pts, chunk):
    return np.concatenate([np.asarray(ad.value_of(fn(pts[i:i + chunk]))) for i in range(0, len(pts), chunk)])


def potential_error(problem, q, resolution: int = 50, chunk: int = 50000) -> float:
    x = space_mesh(problem.domain, resolution)
    qe = problem.q_exact(x)
    qn = _eval(q.value, x, chunk)
    return _rel(np.sum((qe - qn) ** 2), np.sum(qe ** 2))


def _slice(problem, u, x, t, need_laplacian, chunk):
    tt = np.full(len(x), t)
    pts = np.column_stack([x, tt])
    if need_laplacian:
        vals, laps = [], []
        for i in range(0, len(pts), chunk):
            jet = u.jet(pts[i:i + chunk], time=False, space=True)
            vals.append(np.asarray(ad.value_of(jet.value)))
            laps.append(np.asarray(ad.value_of(jet.laplacian())))
        return np.concatenate(vals), np.concatenate(laps)
    return _eval(u.value, pts, chunk), None


def evaluate_metrics(problem, u, q, resolution: int = 50, *, laplacian: bool = True,
                     chunk: int = 20000) -> MetricsReport:
    """``Re_q``, ``Re_u``, ``Re_{Laplace u}`` on the mesh ``resolution`` points per axis (time included).

    Norms are mesh sums with equal weights; the weights cancel in the ratios.
    Also returns the per-time-slice ``Re_u`` and its value at ``t = T/7``.
    """
    dom = problem.domain
    x = space_mesh(dom, resolution)
    times = np.linspace(0.0, dom.T, resolution)
    eu = ru = el = rl = 0.0
    series = []
    for t in times:
        un, ln = _slice(problem, u, x, t, laplacian, chunk)
        tt = np.full(len(x), t)
        ue = problem.u_exact(x, tt)
        e2, r2 = np.sum((ue - un) ** 2), np.sum(ue ** 2)
        eu += e2
        ru += r2
        series.append(_rel(e2, r2))
        if laplacian:
            le = problem.laplacian_u(x, tt)
            el += np.sum((le - ln) ** 2)
            rl += np.sum(le ** 2)
    un7, _ = _slice(problem, u, x, dom.T / 7.0, False, chunk)
    ue7 = problem.u_exact(x, np.full(len(x), dom.T / 7.0))
    return MetricsReport(
        re_q=potential_error(problem, q, resolution, chunk),
        re_u=_rel(eu, ru),
        re_lap_u=_rel(el, rl) if laplacian else float("nan"),
        times=[float(t) for t in times],
        re_u_series=series,
        re_u_at_seventh=_rel(np.sum((ue7 - un7) ** 2), np.sum(ue7 ** 2)),
    )


def evaluate_checkpoint(problem, path, resolution: int | None = None) -> MetricsReport:
    nets, _ = load_checkpoint(path)
    (us, up), (qs, qp) = nets["u"], nets["q"]
    if us.space_dim != problem.domain.dim or qs.input_dim != problem.domain.dim:
        raise ValueError(f"checkpoint networks are {us.space_dim}-dimensional, "
                         f"problem {problem.name} is {problem.domain.dim}-dimensional")
    res = resolution or default_resolution(problem.domain.dim)
    return evaluate_metrics(problem, Network(us, up), Network(qs, qp), res)


def quick_errors(problem, u, q, resolution: int = 20) -> tuple[float, float]:
    """Cheap ``(Re_q, Re_u)`` pair for monitoring during training."""
    rep = evaluate_metrics(problem, u, q, resolution, laplacian=False)
    return rep.re_q, rep.re_u
