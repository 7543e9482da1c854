"""Pointwise residuals of the PDE, boundary, initial and final-time conditions.

``u`` and ``q`` are evaluators: anything with ``jet(points, time=, space=)``
(for ``u``) and ``value(points)`` (for ``q``), i.e. a
:class:`invpot.net.Network` or one of the exact oracles in
:mod:`invpot.problem`.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import autodiff as ad
from .autodiff import NumericError

KINDS = ("interior", "spatial_boundary", "initial", "data")


@dataclass
class CollocationBatch:
    kind: str
    x: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown batch kind {self.kind!r}")
        self.x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        self.t = np.asarray(self.t, dtype=np.float64).reshape(-1)
        if len(self.t) != len(self.x):
            raise ValueError("x and t lengths differ")

    @property
    def count(self) -> int:
        return len(self.x)

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.x, self.t])


@dataclass
class MollifiedData:
    """``G_eps phi^delta`` and its Laplacian at the data points (fixed for a run)."""

    values: np.ndarray
    laplacians: np.ndarray
    epsilon: float = 0.0


@dataclass
class ResidualBatch:
    r_int: object = None
    dt_r_int: object = None
    r_sb: object = None
    dt_r_sb: object = None
    dtt_r_sb: object = None
    r_tb: object = None
    q_r_tb: object = None
    lap_r_tb: object = None
    r_d: object = None
    q_r_d: object = None
    lap_r_d: object = None

    def numpy(self) -> "ResidualBatch":
        return ResidualBatch(**{f.name: (None if getattr(self, f.name) is None
                                         else np.asarray(ad.value_of(getattr(self, f.name))))
                                for f in fields(self)})


def _finite(r, name: str):
    v = ad.value_of(r)
    bad = ~np.isfinite(v)
    if np.any(bad):
        raise NumericError(f"{name}: non-finite value at point index {int(np.argmax(bad))}", term=name)
    return ad.label(r, name)


def _require(batch: CollocationBatch, kind: str) -> None:
    if batch.kind != kind:
        raise ValueError(f"expected a {kind!r} batch, got {batch.kind!r}")


def interior_residuals(u, q, batch: CollocationBatch, problem):
    """``u_t - Laplace u + q u - F`` and its time derivative."""
    _require(batch, "interior")
    jet = u.jet(batch.points, time=True, space=True)
    qv = q.value(batch.x)
    F = problem.F(batch.x, batch.t)
    F_t = problem.F_t(batch.x, batch.t)
    r = jet.dt - jet.laplacian() + ad.mul(qv, jet.value) - F
    dr = jet.dtt - jet.dt_laplacian() + ad.mul(qv, jet.dt) - F_t
    return _finite(r, "r_int"), _finite(dr, "dt_r_int")


def boundary_residuals(u, batch: CollocationBatch, problem):
    """``u - b`` on the lateral boundary with its first two time derivatives."""
    _require(batch, "spatial_boundary")
    jet = u.jet(batch.points, time=True, space=False)
    x, t = batch.x, batch.t
    return (_finite(jet.value - problem.b(x, t), "r_sb"),
            _finite(jet.dt - problem.b_t(x, t), "dt_r_sb"),
            _finite(jet.dtt - problem.b_tt(x, t), "dtt_r_sb"))


def initial_residuals(u, q, batch: CollocationBatch, problem):
    """``u(., 0) - u_0``, the same weighted by ``q``, and its Laplacian."""
    _require(batch, "initial")
    jet = u.jet(batch.points, time=False, space=True)
    r = jet.value - problem.u0(batch.x)
    qr = ad.mul(q.value(batch.x), r)
    lap = jet.laplacian() - problem.laplacian_u0(batch.x)
    return _finite(r, "r_tb"), _finite(qr, "q_r_tb"), _finite(lap, "lap_r_tb")


def data_residuals(u, q, batch: CollocationBatch, mollified: MollifiedData):
    """``u(., T) - G_eps phi^delta``, the same weighted by ``q``, and its Laplacian."""
    _require(batch, "data")
    if len(mollified.values) != batch.count:
        raise ValueError("mollified data does not match the data batch")
    jet = u.jet(batch.points, time=False, space=True)
    r = jet.value - mollified.values
    qr = ad.mul(q.value(batch.x), r)
    lap = jet.laplacian() - mollified.laplacians
    return _finite(r, "r_d"), _finite(qr, "q_r_d"), _finite(lap, "lap_r_d")


def compute_residuals(u, q, batches: dict[str, CollocationBatch], problem,
                      mollified: MollifiedData) -> ResidualBatch:
    res = ResidualBatch()
    res.r_int, res.dt_r_int = interior_residuals(u, q, batches["interior"], problem)
    res.r_sb, res.dt_r_sb, res.dtt_r_sb = boundary_residuals(u, batches["spatial_boundary"], problem)
    res.r_tb, res.q_r_tb, res.lap_r_tb = initial_residuals(u, q, batches["initial"], problem)
    res.r_d, res.q_r_d, res.lap_r_d = data_residuals(u, q, batches["data"], mollified)
    return res
