"""Manufactured parabolic problems ``(d/dt - Laplace + q) u = F`` with known potential.

Each problem bundles the exact state and potential together with every
companion the loss needs (source, its time derivative, boundary trace and its
time derivatives, initial data and its Laplacian, final-time data and its
Laplacian). All callables take ``x`` of shape ``(B, d)`` and, where relevant,
``t`` of shape ``(B,)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mollify import SampledField
from .net import Jet

Array = np.ndarray


@dataclass(frozen=True)
class Domain:
    """Box ``prod [lo_i, hi_i]`` times ``(0, T]``."""

    bounds: tuple[tuple[float, float], ...]
    T: float = 1.0

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("final time must be positive")
        for lo, hi in self.bounds:
            if not hi > lo:
                raise ValueError(f"empty interval [{lo}, {hi}]")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([hi - lo for lo, hi in self.bounds])

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.bounds])

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def face_areas(self) -> np.ndarray:
        """Measure of each face, ordered (axis 0 low, axis 0 high, axis 1 low, ...)."""
        L = self.lengths
        areas = []
        for i in range(self.dim):
            a = float(np.prod(np.delete(L, i)))
            areas.extend((a, a))
        return np.array(areas)

    @property
    def boundary_measure(self) -> float:
        return float(self.face_areas().sum())

    def distance_to_boundary(self, x: Array) -> Array:
        x = np.atleast_2d(x)
        return np.min(np.minimum(x - self.lower, self.upper - x), axis=1)

    def contains(self, x: Array, tol: float = 1e-12) -> Array:
        x = np.atleast_2d(x)
        return np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=1)


@dataclass(frozen=True)
class Problem:
    name: str
    domain: Domain
    q_exact: Callable[[Array], Array]
    u_exact: Callable[[Array, Array], Array]
    u_derivatives: Callable[[Array, Array], dict]
    F: Callable[[Array, Array], Array]
    F_t: Callable[[Array, Array], Array]
    M: float
    description: str = ""

    # Everything below is derived from u_exact so the problem stays consistent.
    def u0(self, x: Array) -> Array:
        return self.u_exact(x, np.zeros(len(np.atleast_2d(x))))

    def laplacian_u0(self, x: Array) -> Array:
        x = np.atleast_2d(x)
        return self.u_derivatives(x, np.zeros(len(x)))["u_xx"].sum(axis=0)

    def b(self, x: Array, t: Array) -> Array:
        return self.u_exact(x, t)

    def b_t(self, x: Array, t: Array) -> Array:
        return self.u_derivatives(x, t)["u_t"]

    def b_tt(self, x: Array, t: Array) -> Array:
        return self.u_derivatives(x, t)["u_tt"]

    def phi(self, x: Array) -> Array:
        x = np.atleast_2d(x)
        return self.u_exact(x, np.full(len(x), self.domain.T))

    def laplacian_phi(self, x: Array) -> Array:
        x = np.atleast_2d(x)
        return self.u_derivatives(x, np.full(len(x), self.domain.T))["u_xx"].sum(axis=0)

    def laplacian_u(self, x: Array, t: Array) -> Array:
        return self.u_derivatives(x, t)["u_xx"].sum(axis=0)

    def pde_defect(self, x: Array, t: Array) -> Array:
        """``u_t - Laplace u + q u - F`` for the exact pair; zero up to rounding."""
        x = np.atleast_2d(x)
        d = self.u_derivatives(x, t)
        return d["u_t"] - d["u_xx"].sum(axis=0) + self.q_exact(x) * d["u"] - self.F(x, t)


# -- the three manufactured examples -----------------------------------------

def _ex1_derivs(x, t):
    x = np.atleast_2d(x)
    et = np.exp(t)
    r2 = np.sum(x * x, axis=1)
    u = (r2 + 1.0) * et
    return {
        "u": u, "u_t": u, "u_tt": u,
        "u_x": 2.0 * x.T * et,
        "u_xx": np.broadcast_to(2.0 * et, (x.shape[1], len(x))).copy(),
        "u_txx": np.broadcast_to(2.0 * et, (x.shape[1], len(x))).copy(),
    }


def _ex1_q(x):
    x = np.atleast_2d(x)
    return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])


def example1() -> Problem:
    """u = (x^2 + y^2 + 1) e^t, q = sin(pi x) sin(pi y) on [0, 1]^2 x (0, 1]."""
    def u(x, t):
        x = np.atleast_2d(x)
        return (np.sum(x * x, axis=1) + 1.0) * np.exp(t)

    def F(x, t):
        x = np.atleast_2d(x)
        g = np.sum(x * x, axis=1) + 1.0
        return (g - 4.0 + _ex1_q(x) * g) * np.exp(t)

    return Problem("example1", Domain(((0.0, 1.0), (0.0, 1.0)), 1.0), _ex1_q, u, _ex1_derivs,
                   F, F, M=1.0, description="smooth potential, positive initial data")


EX2_PEAK = 15.0 * (1.0 - np.sqrt(3.0) / 2.0) + 2.0


def _ex2_q(x):
    x = np.atleast_2d(x)
    r = np.hypot(x[:, 0] - 1.0, x[:, 1] - 1.0)
    return np.where(r <= np.pi / 6.0, 15.0 * (np.cos(r) - np.sqrt(3.0) / 2.0) + 2.0, 2.0)


def _exp_sum_derivs(x, t):
    x = np.atleast_2d(x)
    e = np.exp(np.sum(x, axis=1))
    d = x.shape[1]
    return {
        "u": t * e, "u_t": e, "u_tt": np.zeros_like(e),
        "u_x": np.broadcast_to(t * e, (d, len(x))).copy(),
        "u_xx": np.broadcast_to(t * e, (d, len(x))).copy(),
        "u_txx": np.broadcast_to(e, (d, len(x))).copy(),
    }


def _exp_sum_u(x, t):
    return t * np.exp(np.sum(np.atleast_2d(x), axis=1))


def _exp_sum_source(q):
    def F(x, t):
        x = np.atleast_2d(x)
        e = np.exp(np.sum(x, axis=1))
        return e - x.shape[1] * t * e + q(x) * t * e

    def F_t(x, t):
        x = np.atleast_2d(x)
        e = np.exp(np.sum(x, axis=1))
        return -x.shape[1] * e + q(x) * e

    return F, F_t


def example2() -> Problem:
    """u = t e^(x+y) on [0, 2]^2 x (0, 1], piecewise potential with a cosine bump at (1, 1)."""
    F, F_t = _exp_sum_source(_ex2_q)
    return Problem("example2", Domain(((0.0, 2.0), (0.0, 2.0)), 1.0), _ex2_q, _exp_sum_u,
                   _exp_sum_derivs, F, F_t, M=EX2_PEAK,
                   description="non-smooth potential, zero initial data")


def _ex3_q(x):
    return np.sum(np.atleast_2d(x), axis=1)


def example3() -> Problem:
    """u = t e^(x+y+z), q = x + y + z on [0, 1]^3 x (0, 1]."""
    F, F_t = _exp_sum_source(_ex3_q)
    return Problem("example3", Domain(((0.0, 1.0),) * 3, 1.0), _ex3_q, _exp_sum_u,
                   _exp_sum_derivs, F, F_t, M=3.0, description="three space dimensions")


PROBLEMS: dict[str, Callable[[], Problem]] = {
    "example1": example1,
    "example2": example2,
    "example3": example3,
}


def get_problem(name: str) -> Problem:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None


# -- oracle evaluators with the same interface as invpot.net.Network ---------

@dataclass
class ExactState:
    """Analytic ``u`` exposing ``.value`` / ``.jet`` like a network."""

    problem: Problem

    def value(self, points):
        z = np.atleast_2d(points)
        return self.problem.u_exact(z[:, :-1], z[:, -1])

    def jet(self, points, *, time: bool = True, space: bool = True) -> Jet:
        z = np.atleast_2d(points)
        d = self.problem.u_derivatives(z[:, :-1], z[:, -1])
        jet = Jet(value=d["u"])
        if time:
            jet.dt, jet.dtt = d["u_t"], d["u_tt"]
        if space:
            jet.dx, jet.dxx = d["u_x"], d["u_xx"]
        if time and space:
            jet.dt_dxx = d["u_txx"]
        return jet


@dataclass
class ExactPotential:
    problem: Problem

    def value(self, points):
        return self.problem.q_exact(np.atleast_2d(points))


# -- measurements ------------------------------------------------------------

@dataclass
class Measurement:
    clean: SampledField
    noisy: SampledField
    delta: float
    seed: int | None
    relative: bool = False


def sample_final_data(problem: Problem, nodes_per_axis: int | tuple[int, ...]) -> SampledField:
    """The exact final-time data on a cell-centred lattice over the domain."""
    return SampledField.from_function(problem.phi, problem.domain.bounds, nodes_per_axis)


def add_noise(clean: SampledField, delta: float, seed: int | None = None,
              relative: bool = False) -> Measurement:
    """Perturb every node by ``delta * (2 U - 1)``, ``U`` uniform on [0, 1].

    With ``relative=True`` the amplitude is ``delta * max|phi|`` instead.
    """
    if delta < 0:
        raise ValueError("noise level must be non-negative")
    if delta == 0:
        noisy = SampledField(clean.axes, clean.values.copy())
        return Measurement(clean, noisy, 0.0, seed, relative)
    amp = delta * float(np.max(np.abs(clean.values))) if relative else delta
    rng = np.random.default_rng(seed)
    noise = amp * (2.0 * rng.random(clean.values.shape) - 1.0)
    return Measurement(clean, SampledField(clean.axes, clean.values + noise), delta, seed, relative)


# -- structural assumptions behind uniqueness --------------------------------

@dataclass
class AssumptionReport:
    problem: str
    checks: dict[str, bool] = field(default_factory=dict)
    minima: dict[str, float] = field(default_factory=dict)
    nu: float = 0.0

    @property
    def all_hold(self) -> bool:
        return all(self.checks.values())

    def violations(self) -> list[str]:
        return [k for k, ok in self.checks.items() if not ok]


def _boundary_samples(domain: Domain, n: int, rng: np.random.Generator) -> np.ndarray:
    areas = domain.face_areas()
    faces = rng.choice(len(areas), size=n, p=areas / areas.sum())
    x = domain.lower + rng.random((n, domain.dim)) * domain.lengths
    axis, high = faces // 2, faces % 2
    x[np.arange(n), axis] = np.where(high == 1, domain.upper[axis], domain.lower[axis])
    return x


def check_assumption1(problem: Problem, samples: int = 4000, seed: int = 0,
                      tol: float = 1e-12) -> AssumptionReport:
    """Sample the positivity / monotonicity conditions that guarantee uniqueness.

    Advisory only: the reconstruction runs whether or not they hold.
    """
    rng = np.random.default_rng(seed)
    dom = problem.domain
    x = dom.lower + rng.random((samples, dom.dim)) * dom.lengths
    t = rng.random(samples) * dom.T
    xb = _boundary_samples(dom, samples, rng)
    tb = rng.random(samples) * dom.T

    u0 = problem.u0(x)
    b = problem.b(xb, tb)
    rep = AssumptionReport(problem.name)
    rep.minima = {
        "u0": float(u0.min()),
        "b": float(b.min()),
        "b_t": float(problem.b_t(xb, tb).min()),
        "F": float(problem.F(x, t).min()),
        "F_t": float(problem.F_t(x, t).min()),
        "lap_u0 - M u0 + F(.,0)": float((problem.laplacian_u0(x) - problem.M * u0
                                         + problem.F(x, np.zeros(samples))).min()),
        "|u0 - b(.,0)| on boundary": -float(np.max(np.abs(problem.u0(xb) - problem.b(xb, np.zeros(samples))))),
    }
    rep.nu = min(rep.minima["u0"], rep.minima["b"])
    m = rep.minima
    rep.checks = {
        "u0 >= nu > 0": m["u0"] > 0,
        "u0 = b(.,0) on boundary": m["|u0 - b(.,0)| on boundary"] >= -1e-10,
        "b >= nu > 0": m["b"] > 0,
        "b_t >= 0": m["b_t"] >= -tol,
        "F >= 0": m["F"] >= -tol,
        "F_t >= 0": m["F_t"] >= -tol,
        "lap_u0 - M u0 + F(.,0) >= 0": m["lap_u0 - M u0 + F(.,0)"] >= -tol,
    }
    return rep
