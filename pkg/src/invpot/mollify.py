"""Radial mollification of gridded data and of its Laplacian.

The kernel profile is ``rho(t) = c_d t^2 (1 - t)^3`` on [0, 1], normalised so
that ``pi_d * int_0^1 rho(t) t^(d-1) dt = 1`` (``pi_d`` is the area of the unit
sphere). With ``rho_eps(r) = eps^-d rho(r / eps)`` the mollifier is

    G_eps psi(x) = int_{|x-y| <= eps} rho_eps(|x - y|) psi(y) dy

and its Laplacian is obtained by differentiating the kernel:

    Laplace rho_eps(r) = eps^(-d-2) [rho''(r/eps) + (d-1) rho'(r/eps) / (r/eps)].

Both integrals are evaluated with the midpoint rule on the data lattice.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

BOUNDARY_MODES = ("renormalize", "moment")


class ResolutionError(ValueError):
    """The kernel radius is not resolved by the data lattice."""


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d (2, 2 pi, 4 pi for d = 1, 2, 3)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


# Profiles are c * t^2 (1 - t)^k on [0, 1]. k = 2 vanishes to first order at
# t = 1 only, so its extension by zero is C^1 and the Laplacian kernel jumps at
# r = eps; k = 3 is C^2 on the whole line.
PROFILES = {"quartic": 2, "quintic": 3}


@dataclass(frozen=True)
class RadialKernel:
    dim: int
    normalizer: float
    profile: str = "quintic"

    @property
    def sphere_area(self) -> float:
        return sphere_area(self.dim)

    @property
    def _poly(self) -> Polynomial:
        k = PROFILES[self.profile]
        return self.normalizer * Polynomial([0.0, 0.0, 1.0]) * Polynomial([1.0, -1.0]) ** k

    def _eval(self, poly: Polynomial, t):
        t = np.asarray(t, dtype=np.float64)
        return np.where((t >= 0) & (t < 1), poly(t), 0.0)

    def rho(self, t):
        return self._eval(self._poly, t)

    def d1(self, t):
        return self._eval(self._poly.deriv(), t)

    def d2(self, t):
        return self._eval(self._poly.deriv(2), t)

    def d1_over_t(self, t):
        """``rho'(t) / t``; a polynomial, so the limit at ``t = 0`` is ``rho''(0)``."""
        return self._eval(Polynomial(self._poly.deriv().coef[1:]), t)

    def laplacian_profile(self, t):
        """Laplacian of ``rho(|y|)`` at ``|y| = t`` (unit radius)."""
        t = np.asarray(t, dtype=np.float64)
        lap = self._poly.deriv(2) + (self.dim - 1) * Polynomial(self._poly.deriv().coef[1:])
        return self._eval(lap, t)


def make_kernel(dim: int, profile: str = "quintic") -> RadialKernel:
    """Kernel normalised so that ``sphere_area(d) * int_0^1 rho(t) t^(d-1) dt = 1``.

    ``profile="quartic"`` gives ``c t^2 (1-t)^2`` with ``c = (d+2)(d+3)(d+4) / (2 pi_d)``;
    the default ``"quintic"`` gives ``c t^2 (1-t)^3`` with
    ``c = (d+2)(d+3)(d+4)(d+5) / (6 pi_d)``.
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"kernel available for d = 1, 2, 3; got {dim}")
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    k = PROFILES[profile]
    # int_0^1 t^(d+1) (1 - t)^k dt = B(d + 2, k + 1)
    moment = math.factorial(dim + 1) * math.factorial(k) / math.factorial(dim + k + 2)
    return RadialKernel(dim, 1.0 / (moment * sphere_area(dim)), profile)


@dataclass(frozen=True)
class MollifierConfig:
    dim: int
    epsilon: float
    kernel: RadialKernel | None = None
    boundary: str = "renormalize"

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.kernel is None:
            object.__setattr__(self, "kernel", make_kernel(self.dim))
        if self.boundary not in BOUNDARY_MODES:
            raise ValueError(f"boundary must be one of {BOUNDARY_MODES}")


@dataclass
class SampledField:
    """Values on a cell-centred lattice: node ``i`` of axis ``k`` sits at ``lo_k + (i + 1/2) h_k``."""

    axes: list[np.ndarray]
    values: np.ndarray

    def __post_init__(self):
        self.axes = [np.asarray(a, dtype=np.float64) for a in self.axes]
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != tuple(len(a) for a in self.axes):
            raise ValueError("values do not match the lattice shape")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([a[1] - a[0] for a in self.axes])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def lower(self) -> np.ndarray:
        return np.array([a[0] for a in self.axes]) - 0.5 * self.spacing

    @property
    def upper(self) -> np.ndarray:
        return np.array([a[-1] for a in self.axes]) + 0.5 * self.spacing

    def nodes(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @classmethod
    def lattice(cls, bounds, nodes_per_axis) -> list[np.ndarray]:
        if np.isscalar(nodes_per_axis):
            nodes_per_axis = [int(nodes_per_axis)] * len(bounds)
        axes = []
        for (lo, hi), n in zip(bounds, nodes_per_axis):
            h = (hi - lo) / n
            axes.append(lo + (np.arange(n) + 0.5) * h)
        return axes

    @classmethod
    def from_function(cls, fn: Callable, bounds, nodes_per_axis) -> "SampledField":
        axes = cls.lattice(bounds, nodes_per_axis)
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        return cls(axes, np.asarray(fn(pts), dtype=np.float64).reshape(grids[0].shape))


def _ball(field: SampledField, x: np.ndarray, eps: float):
    """Offsets ``y - x``, distances and values of lattice nodes with ``|y - x| < eps``."""
    idx = []
    for a, xi in zip(field.axes, x):
        lo = np.searchsorted(a, xi - eps, side="left")
        hi = np.searchsorted(a, xi + eps, side="right")
        idx.append(np.arange(lo, hi))
    sub = field.values[np.ix_(*idx)]
    grids = np.meshgrid(*[field.axes[k][idx[k]] - x[k] for k in range(field.dim)], indexing="ij")
    off = np.stack([g.ravel() for g in grids], axis=1)
    r = np.sqrt(np.sum(off * off, axis=1))
    keep = r < eps
    return off[keep], r[keep], sub.ravel()[keep]


def _check(cfg: MollifierConfig, field: SampledField) -> None:
    if field.dim != cfg.dim:
        raise ValueError(f"field is {field.dim}-dimensional, mollifier {cfg.dim}-dimensional")
    h = float(field.spacing.max())
    if cfg.epsilon <= 2.0 * h:
        raise ResolutionError(f"epsilon={cfg.epsilon:g} not resolved by lattice spacing h={h:g} (need eps > 2h)")


def _as_points(x, dim):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    return np.atleast_2d(x).reshape(-1, dim), single


def _monomials(s: np.ndarray) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Columns 1, s_i, s_i s_j (i <= j) of the scaled offsets."""
    d = s.shape[1]
    pairs = [(i, j) for i in range(d) for j in range(i, d)]
    cols = [np.ones(len(s))] + [s[:, i] for i in range(d)] + [s[:, i] * s[:, j] for i, j in pairs]
    return np.stack(cols, axis=1), pairs


def _moment_fix(w, carrier, s, targets):
    P, _ = _monomials(s)
    A = P.T @ (carrier[:, None] * P)
    c = np.linalg.solve(A, targets - P.T @ w)
    return w + carrier * (P @ c)


def _targets(d: int, zeroth: float, diag: float) -> np.ndarray:
    pairs = [(i, j) for i in range(d) for j in range(i, d)]
    return np.array([zeroth] + [0.0] * d + [diag if i == j else 0.0 for i, j in pairs])


def second_moment(kernel: RadialKernel) -> float:
    """``int rho(|y|) |y|^2 dy`` over the unit ball."""
    k = kernel.dim
    integrand = kernel._poly * Polynomial([0.0] * (k + 1) + [1.0])
    return kernel.sphere_area * float(integrand.integ()(1.0))


def _value_weights(cfg: MollifierConfig, field: SampledField, off, r):
    eps, d = cfg.epsilon, cfg.dim
    rho = cfg.kernel.rho(r / eps)
    if cfg.boundary == "renormalize":
        return rho / np.sum(rho)
    w = rho * field.cell_volume / eps ** d
    mu2 = second_moment(cfg.kernel) / d
    return _moment_fix(w, rho, off / eps, _targets(d, 1.0, mu2))


def _laplacian_weights(cfg: MollifierConfig, field: SampledField, off, r):
    eps, d = cfg.epsilon, cfg.dim
    t = r / eps
    w = cfg.kernel.laplacian_profile(t) * field.cell_volume * eps ** (-d - 2)
    return _moment_fix(w, cfg.kernel.rho(t), off / eps, _targets(d, 0.0, 2.0 / eps ** 2))


def mollify(cfg: MollifierConfig, field: SampledField, x):
    """``G_eps psi`` at ``x`` (one point or a batch).

    ``boundary="renormalize"``: the ball is clipped to the domain and the sum
    is divided by the kernel mass actually integrated, so constants are
    reproduced exactly everywhere. ``boundary="moment"``: the midpoint weights
    are corrected so that the rule reproduces the kernel's moments up to
    second order; away from the boundary this only removes quadrature error,
    near it the clipped ball acts as if the data continued quadratically.
    """
    _check(cfg, field)
    pts, single = _as_points(x, cfg.dim)
    out = np.empty(len(pts))
    for n, p in enumerate(pts):
        off, r, vals = _ball(field, p, cfg.epsilon)
        out[n] = np.dot(_value_weights(cfg, field, off, r), vals)
    return out[0] if single else out


def kernel_mass(cfg: MollifierConfig, field: SampledField, x):
    """Plain midpoint quadrature of ``rho_eps(|x - y|)`` over the lattice."""
    pts, single = _as_points(x, cfg.dim)
    eps, vol = cfg.epsilon, field.cell_volume
    out = np.array([np.sum(cfg.kernel.rho(_ball(field, p, eps)[1] / eps)) * vol / eps ** cfg.dim
                    for p in pts])
    return out[0] if single else out


def mollify_laplacian(cfg: MollifierConfig, field: SampledField, x):
    """``Laplace(G_eps psi)`` at ``x`` by quadrature of the differentiated kernel.

    The midpoint weights of ``Laplace rho_eps`` get the same second-order
    moment correction as in ``mollify(boundary="moment")``: they annihilate
    constants and linear functions and return ``2d`` on ``|y|^2`` exactly.
    Points within ``eps`` of the boundary therefore see a quadratic
    continuation of the data instead of a truncated kernel.
    """
    _check(cfg, field)
    pts, single = _as_points(x, cfg.dim)
    out = np.empty(len(pts))
    for n, p in enumerate(pts):
        off, r, vals = _ball(field, p, cfg.epsilon)
        out[n] = np.dot(_laplacian_weights(cfg, field, off, r), vals)
    return out[0] if single else out


def select_epsilon(delta: float, scale: float = 1.0) -> float:
    """Kernel radius ``scale * delta^(1/3)``; zero (identity operator) for exact data."""
    if delta < 0:
        raise ValueError("noise level must be non-negative")
    if delta == 0:
        return 0.0
    return scale * float(np.cbrt(delta))


# -- convergence-rate harness ------------------------------------------------

@dataclass
class RateRow:
    delta: float
    epsilon: float
    sup_error: float
    trials: int


@dataclass
class RateStudy:
    rows: list[RateRow] = field(default_factory=list)
    slope: float = float("nan")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delta", "epsilon", "sup_error", "trials"])
            for row in self.rows:
                w.writerow([repr(row.delta), repr(row.epsilon), repr(row.sup_error), row.trials])


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def interior_test_points(bounds, margin: float, per_axis: int) -> np.ndarray:
    """Uniform points in the box shrunk by ``margin`` on every side."""
    axes = []
    for lo, hi in bounds:
        a, b = lo + margin, hi - margin
        if b <= a:
            raise ValueError("margin leaves no interior")
        axes.append(np.linspace(a, b, per_axis) if per_axis > 1 else np.array([(a + b) / 2]))
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def rate_study(problem, deltas: Sequence[float], trials: int = 10, seed: int = 0,
               scale: float = 1.0, nodes_per_eps: float = 20.0, test_per_axis: int = 3,
               max_nodes_per_axis: int = 2000) -> RateStudy:
    """Sup-error of ``Laplace G_eps phi^delta`` against the exact ``Laplace phi``.

    For every noise level the data lattice uses ``h = eps / nodes_per_eps``
    and errors are taken at interior points farther than ``eps`` from the
    boundary; the reported error is the mean over ``trials`` noisy draws of the
    per-draw maximum. ``problem`` needs ``domain``, ``phi`` and ``laplacian_phi``.
    """
    from .problem import add_noise  # problem imports this module

    bounds = problem.domain.bounds
    d = problem.domain.dim
    seeds = np.random.SeedSequence(seed).spawn(len(deltas))
    study = RateStudy()
    for delta, ss in zip(deltas, seeds):
        eps = select_epsilon(delta, scale)
        if eps == 0.0:
            # identity mollifier: the exact Laplacian is used directly
            study.rows.append(RateRow(delta, 0.0, 0.0, trials))
            continue
        nodes = [min(max_nodes_per_axis, int(math.ceil((hi - lo) * nodes_per_eps / eps))) for lo, hi in bounds]
        clean = SampledField.from_function(problem.phi, bounds, nodes)
        cfg = MollifierConfig(d, eps)
        pts = interior_test_points(bounds, eps * 1.0000001, test_per_axis)
        exact = problem.laplacian_phi(pts)
        errs = []
        for child in ss.spawn(trials):
            meas = add_noise(clean, delta, seed=child)
            errs.append(np.max(np.abs(mollify_laplacian(cfg, meas.noisy, pts) - exact)))
        study.rows.append(RateRow(float(delta), eps, float(np.mean(errs)), trials))
    study.slope = loglog_slope([r.delta for r in study.rows], [r.sup_error for r in study.rows])
    return study
