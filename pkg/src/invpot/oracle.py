"""Independent checks: an implicit finite-difference forward solver and difference quotients."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mollify import SampledField


@dataclass(frozen=True)
class FDGrid:
    """Vertex grid over the closed box with ``n_k + 1`` nodes per axis and ``steps`` time steps."""

    bounds: tuple[tuple[float, float], ...]
    cells: tuple[int, ...]
    T: float
    steps: int

    def __post_init__(self):
        if len(self.cells) != len(self.bounds):
            raise ValueError("one cell count per axis required")
        if min(self.cells) < 2 or self.steps < 1 or self.T <= 0:
            raise ValueError("grid needs at least 2 cells per axis, 1 time step and T > 0")

    @classmethod
    def uniform(cls, domain, h: float, k: float) -> "FDGrid":
        cells = tuple(int(round(L / h)) for L in domain.lengths)
        return cls(tuple(domain.bounds), cells, domain.T, int(round(domain.T / k)))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / n for (lo, hi), n in zip(self.bounds, self.cells)])

    @property
    def k(self) -> float:
        return self.T / self.steps

    @property
    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, n + 1) for (lo, hi), n in zip(self.bounds, self.cells)]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.cells)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.steps + 1)

    def nodes(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for ax in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[ax] = 0
            mask[tuple(idx)] = True
            idx[ax] = -1
            mask[tuple(idx)] = True
        return mask.ravel()


@dataclass
class ForwardSolution:
    grid: FDGrid
    values: np.ndarray  # (steps + 1, *grid.shape)

    def at_final(self) -> np.ndarray:
        return self.values[-1]

    def final_field(self) -> SampledField:
        """``u(., T)`` as a lattice field, for feeding the pipeline with solver-generated data."""
        return SampledField(self.grid.axes, self.values[-1])

    def max_error(self, exact: Callable) -> float:
        x = self.grid.nodes()
        err = 0.0
        for n, t in enumerate(self.grid.times):
            ue = exact(x, np.full(len(x), t)).reshape(self.grid.shape)
            err = max(err, float(np.max(np.abs(self.values[n] - ue))))
        return err


def _laplacian(grid: FDGrid) -> sp.csr_matrix:
    """Second-difference Laplacian on interior nodes (Dirichlet nodes eliminated)."""
    inner = [n - 1 for n in grid.cells]
    eye = [sp.identity(m, format="csr") for m in inner]
    out = None
    for ax, (m, h) in enumerate(zip(inner, grid.spacing)):
        d2 = sp.diags([np.ones(m - 1), -2.0 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / h ** 2
        term = None
        for j in range(grid.dim):
            factor = d2 if j == ax else eye[j]
            term = factor if term is None else sp.kron(term, factor, format="csr")
        out = term if out is None else out + term
    return out.tocsr()


def _boundary_coupling(grid: FDGrid) -> tuple[sp.csr_matrix, np.ndarray]:
    """Maps full-grid values to the interior Laplacian's contribution from boundary nodes."""
    shape = grid.shape
    full = np.arange(np.prod(shape)).reshape(shape)
    interior = full[tuple(slice(1, -1) for _ in shape)].ravel()
    rows, cols, vals = [], [], []
    pos = np.arange(len(interior))
    inner_idx = np.stack(np.unravel_index(interior, shape), axis=1)
    for ax, h in enumerate(grid.spacing):
        for step in (-1, 1):
            nb = inner_idx.copy()
            nb[:, ax] += step
            on_edge = (nb[:, ax] == 0) | (nb[:, ax] == shape[ax] - 1)
            rows.append(pos[on_edge])
            cols.append(np.ravel_multi_index(nb[on_edge].T, shape))
            vals.append(np.full(on_edge.sum(), 1.0 / h ** 2))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(len(interior), int(np.prod(shape)))), interior


def solve_forward(problem, q, grid: FDGrid) -> ForwardSolution:
    """Backward Euler in time, central second differences in space, Dirichlet data from ``b``.

    ``q`` is a callable of ``x`` or an array of node values over the grid.
    The system matrix is an M-matrix for ``q >= 0``, so one sparse LU serves
    every step.
    """
    x = grid.nodes()
    qv = np.asarray(q(x) if callable(q) else q, dtype=np.float64).ravel()
    if qv.shape != (len(x),):
        raise ValueError("q must have one value per grid node")
    if np.any(qv < 0):
        raise ValueError("potential must be non-negative on the grid")
    mask = grid.boundary_mask()
    L = _laplacian(grid)
    B, interior = _boundary_coupling(grid)
    k = grid.k
    A = (sp.identity(len(interior)) / k - L + sp.diags(qv[interior])).tocsc()
    lu = spla.splu(A)

    u = np.empty((grid.steps + 1, len(x)))
    u[0] = problem.u0(x)
    xb = x[mask]
    xi = x[interior]
    for n in range(1, grid.steps + 1):
        t = grid.times[n]
        u[n, mask] = problem.b(xb, np.full(len(xb), t))
        rhs = u[n - 1, interior] / k + problem.F(xi, np.full(len(xi), t)) + B @ u[n]
        u[n, interior] = lu.solve(rhs)
    if not np.all(np.isfinite(u)):
        raise FloatingPointError("linear solve produced non-finite values")
    return ForwardSolution(grid, u.reshape((grid.steps + 1,) + grid.shape))


def refinement_orders(problem, q, domain, h: float, k: float) -> dict:
    """Observed convergence orders from two halving experiments.

    ``space``: ``h -> h/2`` together with ``k -> k/4``; the error of an
    ``O(h^2 + k)`` scheme then falls by 4, so ``log2`` of the ratio estimates
    the spatial order (it stays 2 even when the spatial truncation error
    vanishes, as for data quadratic in ``x``). ``time``: ``k -> k/2`` on a
    spatial grid four times finer than ``h``.
    """
    def err(hh, kk):
        return solve_forward(problem, q, FDGrid.uniform(domain, hh, kk)).max_error(problem.u_exact)

    es1, es2 = err(h, k), err(h / 2, k / 4)
    ek1, ek2 = err(h / 4, k), err(h / 4, k / 2)
    return {"space": float(np.log2(es1 / es2)), "time": float(np.log2(ek1 / ek2)),
            "errors": {"space": (es1, es2), "time": (ek1, ek2)}}


def fd_check(function: Callable, point, orders=(1, 2)) -> dict[int, np.ndarray]:
    """Central-difference derivatives along each coordinate axis.

    Order 1 uses ``h = eps^(1/3) max(1, |x_i|)``, order 2 ``h = eps^(1/4) max(1, |x_i|)``,
    the steps balancing truncation and rounding for each stencil.
    """
    x = np.atleast_1d(np.asarray(point, dtype=np.float64))
    scalar = np.ndim(point) == 0
    eps = np.finfo(np.float64).eps
    f0 = function(point)
    out = {}
    for order in orders:
        if order not in (1, 2):
            raise ValueError("only first and second order differences are supported")
        est = np.empty(len(x))
        for i in range(len(x)):
            h = (eps ** (1 / 3) if order == 1 else eps ** 0.25) * max(1.0, abs(x[i]))
            e = np.zeros_like(x)
            e[i] = h
            xp, xm = x + e, x - e
            if scalar:
                xp, xm = xp[0], xm[0]
            fp, fm = function(xp), function(xm)
            est[i] = (fp - fm) / (2 * h) if order == 1 else (fp - 2 * f0 + fm) / h ** 2
        out[order] = est[0] if scalar else est
    return out


def loss_gradient_check(problem, u_spec, q_spec, points: int = 32, seed: int = 0, step: float = 1e-5,
                        scheme: str = "sobolev", lam: float = 1e-2) -> dict:
    """Taped gradient of the empirical loss against central differences over every parameter.

    The ``points`` collocation points are split evenly over the four sets and
    exact final-time data are used. Per-entry relative errors use the
    denominator ``max(|g_ad|, |g_fd|, 1e-6 max|g_ad|)`` so that entries that
    are zero up to rounding do not dominate.
    """
    from .loss import assemble_scheme, monte_carlo_rule
    from .net import init_params, param_gradient, Network
    from .residual import compute_residuals
    from .train import TrainConfig, prepare_data, sample_sets

    n = max(1, points // 4)
    cfg = TrainConfig(n_data=n, n_interior=n, n_initial=n, n_boundary=points - 3 * n,
                      delta=0.0, lam=lam, scheme=scheme, seed=seed)
    batches = sample_sets(problem, cfg)
    mollified, _ = prepare_data(problem, batches["data"], cfg)
    rule = monte_carlo_rule(batches, problem.domain)
    rng = np.random.default_rng(seed)
    up, qp = init_params(u_spec, rng), init_params(q_spec, rng)

    def loss(a, b):
        res = compute_residuals(Network(u_spec, a), Network(q_spec, b), batches, problem, mollified)
        return assemble_scheme(scheme, res, rule, lam).total

    value, (gu, gq) = param_gradient(loss, [up, qp])
    ad_grad = np.concatenate([gu.to_vector(), gq.to_vector()])
    uv, qv = up.to_vector(), qp.to_vector()
    nu = len(uv)

    def total(vec):
        return float(loss(up.with_vector(vec[:nu]), qp.with_vector(vec[nu:])))

    base = np.concatenate([uv, qv])
    fd_grad = np.empty_like(base)
    for i in range(len(base)):
        e = np.zeros_like(base)
        e[i] = step
        fd_grad[i] = (total(base + e) - total(base - e)) / (2 * step)
    floor = 1e-6 * float(np.max(np.abs(ad_grad)))
    denom = np.maximum(np.maximum(np.abs(ad_grad), np.abs(fd_grad)), floor)
    rel = np.abs(ad_grad - fd_grad) / denom
    return {"loss": float(value), "parameters": int(len(base)), "max_rel_error": float(rel.max()),
            "worst_index": int(rel.argmax()), "max_abs_gradient": float(np.max(np.abs(ad_grad)))}


JET_ORDERS = {"value": 0, "dt": 1, "dx": 1, "dtt": 2, "dxx": 2, "dt_dxx": 3}


def jet_fd_errors(spec, params, point, h: float = 1e-4, h3: float = 1e-3, floor: float = 1e-2) -> dict:
    """Every jet field at one point against central differences of ``forward``.

    First and second derivatives use step ``h``; the mixed ``d/dt d2/dx_i2``
    nests a second difference in ``x_i`` inside a first difference in ``t``
    with step ``h3``. Returns ``{field: (jet, fd, rel_error)}`` with
    ``rel_error = |jet - fd| / max(|jet|, floor)`` (worst component).
    """
    from .net import forward, forward_jet

    z = np.asarray(point, dtype=np.float64)
    f = lambda p: float(forward(spec, params, p))
    d = spec.space_dim
    jet = forward_jet(spec, params, z[None, :]).numpy()

    def shift(p, axis, step):
        q = p.copy()
        q[axis] += step
        return q

    def d1(g, p, axis, s):
        return (g(shift(p, axis, s)) - g(shift(p, axis, -s))) / (2 * s)

    def d2(g, p, axis, s):
        return (g(shift(p, axis, s)) - 2 * g(p) + g(shift(p, axis, -s))) / s ** 2

    fd = {"value": np.array([f(z)]),
          "dx": np.array([d1(f, z, i, h) for i in range(d)]),
          "dxx": np.array([d2(f, z, i, h) for i in range(d)])}
    got = {"value": jet.value, "dx": jet.dx[:, 0], "dxx": jet.dxx[:, 0]}
    if spec.time_input:
        ti = spec.input_dim - 1
        fd["dt"] = np.array([d1(f, z, ti, h)])
        fd["dtt"] = np.array([d2(f, z, ti, h)])
        fd["dt_dxx"] = np.array([d1(lambda p, i=i: d2(f, p, i, h3), z, ti, h3) for i in range(d)])
        got.update({"dt": jet.dt, "dtt": jet.dtt, "dt_dxx": jet.dt_dxx[:, 0]})
    out = {}
    for name, ref in fd.items():
        val = np.atleast_1d(got[name])
        rel = np.abs(val - ref) / np.maximum(np.abs(val), floor)
        out[name] = (val, ref, float(rel.max()))
    return out
