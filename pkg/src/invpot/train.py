"""Training loop: collocation sampling, Adam, and the alternating potential/state updates."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .autodiff import NumericError
from .loss import assemble_scheme, monte_carlo_rule
from .metrics import quick_errors
from .mollify import MollifierConfig, SampledField, mollify, mollify_laplacian, select_epsilon
from .net import Network, NetworkSpec, ParamSet, init_params, param_gradient, save_checkpoint
from .problem import Measurement, Problem, add_noise, sample_final_data
from .residual import CollocationBatch, MollifiedData, compute_residuals

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 10_000
    n_data: int = 256
    n_interior: int = 256
    n_initial: int = 256
    n_boundary: int | None = None  # default: 256 per face of the box
    lam: float = 1e-2
    delta: float = 0.01
    relative_noise: bool = False
    eps_scale: float = 1.0
    data_nodes: int | None = None
    mollifier_boundary: str = "moment"
    seed: int = 0
    lr: float = 1e-3
    lr_decay: float = 10.0
    lr_period: int = 20_000
    beta1: float = 0.9
    beta2: float = 0.999
    fuzz: float = 1e-8
    scheme: str = "sobolev"
    resample: str = "once"
    strict_alternation: bool = False
    checkpoint_every: int = 1000
    metrics_every: int = 0
    metrics_resolution: int = 20
    divergence_threshold: float = 1e12

    def __post_init__(self):
        counts = (self.n_data, self.n_interior, self.n_initial,
                  1 if self.n_boundary is None else self.n_boundary)
        if min(counts) < 1:
            raise ValueError("all collocation counts must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.scheme not in ("sobolev", "standard"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.resample not in ("once", "per_epoch"):
            raise ValueError(f"unknown resample mode {self.resample!r}")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict:
        return asdict(self)


def learning_rate(config: TrainConfig, epoch: int) -> float:
    """Step schedule: divided by ``lr_decay`` every ``lr_period`` epochs."""
    return config.lr * config.lr_decay ** (-(epoch // config.lr_period))


# -- sampling ----------------------------------------------------------------

def _uniform_box(domain, n, rng):
    return domain.lower + rng.random((n, domain.dim)) * domain.lengths


def _positive_times(domain, n, rng):
    # uniform on (0, T]
    return domain.T * (1.0 - rng.random(n))


def sample_boundary(domain, n, rng) -> np.ndarray:
    """Uniform points on the box surface: faces chosen in proportion to their area."""
    areas = domain.face_areas()
    faces = rng.choice(len(areas), size=n, p=areas / areas.sum())
    x = _uniform_box(domain, n, rng)
    axis, high = faces // 2, faces % 2
    x[np.arange(n), axis] = np.where(high == 1, domain.upper[axis], domain.lower[axis])
    return x


def boundary_count(config: TrainConfig, dim: int) -> int:
    return config.n_boundary if config.n_boundary is not None else 256 * 2 * dim


def sample_sets(problem: Problem, config: TrainConfig, seed=None) -> dict[str, CollocationBatch]:
    """Uniform collocation sets; the same seed gives the same points."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    dom = problem.domain
    n_b = boundary_count(config, dom.dim)
    xi = _uniform_box(dom, config.n_interior, rng)
    ti = _positive_times(dom, config.n_interior, rng)
    xb = sample_boundary(dom, n_b, rng)
    tb = _positive_times(dom, n_b, rng)
    x0 = _uniform_box(dom, config.n_initial, rng)
    xd = _uniform_box(dom, config.n_data, rng)
    return {
        "interior": CollocationBatch("interior", xi, ti),
        "spatial_boundary": CollocationBatch("spatial_boundary", xb, tb),
        "initial": CollocationBatch("initial", x0, np.zeros(len(x0))),
        "data": CollocationBatch("data", xd, np.full(len(xd), dom.T)),
    }


# -- data preparation ----------------------------------------------------------

DEFAULT_DATA_NODES = {1: 2000, 2: 200, 3: 60}


def data_lattice_nodes(problem: Problem, config: TrainConfig, epsilon: float,
                       max_nodes: int = 4_000_000) -> list[int]:
    """Nodes per axis: the configured/default density, refined to ``h <= eps/20`` when affordable."""
    dom = problem.domain
    base = config.data_nodes or DEFAULT_DATA_NODES[dom.dim]
    # the default density refers to a unit length
    nodes = [max(4, int(round(base * L))) for L in dom.lengths]
    if epsilon > 0:
        fine = [int(math.ceil(20.0 * L / epsilon)) for L in dom.lengths]
        if np.prod(np.maximum(nodes, fine), dtype=float) <= max_nodes:
            nodes = list(np.maximum(nodes, fine))
    return [int(n) for n in nodes]


def prepare_data(problem: Problem, data_batch: CollocationBatch, config: TrainConfig,
                 seed=None) -> tuple[MollifiedData, Measurement | None]:
    """Noisy final-time data, mollified once at the data points.

    With ``delta = 0`` the mollifier is the identity and the exact ``phi`` and
    ``Laplace phi`` are used at the data points.
    """
    eps = select_epsilon(config.delta, config.eps_scale)
    if eps == 0.0:
        x = data_batch.x
        return MollifiedData(problem.phi(x), problem.laplacian_phi(x), 0.0), None
    nodes = data_lattice_nodes(problem, config, eps)
    clean = sample_final_data(problem, nodes)
    meas = add_noise(clean, config.delta, seed=seed, relative=config.relative_noise)
    cfg = MollifierConfig(problem.domain.dim, eps, boundary=config.mollifier_boundary)
    values = mollify(cfg, meas.noisy, data_batch.x)
    laps = mollify_laplacian(cfg, meas.noisy, data_batch.x)
    return MollifiedData(np.atleast_1d(values), np.atleast_1d(laps), eps), meas


# -- Adam ----------------------------------------------------------------------

@dataclass
class AdamState:
    m: np.ndarray
    V: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    tau: float = 1e-3
    fuzz: float = 1e-8

    @classmethod
    def zeros(cls, n: int, **kw) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), **kw)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray,
              lr: float | None = None) -> tuple[AdamState, np.ndarray]:
    """One Adam update with bias correction; returns the new state and parameters."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.m.shape:
        raise ValueError("gradient shape does not match optimizer state")
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient passed to Adam", term="gradient")
    tau = state.tau if lr is None else lr
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    V = state.beta2 * state.V + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    V_hat = V / (1.0 - state.beta2 ** t)
    new = params - tau * m_hat / (np.sqrt(V_hat) + state.fuzz)
    return replace(state, m=m, V=V, t=t), new


# -- the training loop ---------------------------------------------------------

@dataclass
class TrainResult:
    u: Network
    q: Network
    log: list[dict] = field(default_factory=list)
    status: str = "ok"
    epochs_run: int = 0
    mollified: MollifiedData | None = None
    batches: dict | None = None

    def write_log(self, path) -> None:
        write_log(self.log, path)

    def save_checkpoint(self, path, meta: dict | None = None) -> None:
        save_checkpoint(path, {"u": (self.u.spec, self.u.params), "q": (self.q.spec, self.q.params)}, meta)


def write_log(rows: list[dict], path) -> None:
    if not rows:
        Path(path).write_text("")
        return
    keys = list(rows[0])
    for row in rows[1:]:
        keys.extend(k for k in row if k not in keys)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, restval="")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def default_specs(dim: int, layers: int = 3, width: int = 20) -> tuple[NetworkSpec, NetworkSpec]:
    return (NetworkSpec(dim + 1, (width,) * layers, time_input=True),
            NetworkSpec(dim, (width,) * layers))


def loss_and_gradients(problem, u_spec, q_spec, u_params, q_params, batches, rule, mollified, config):
    """Loss breakdown and gradients with respect to both parameter sets, from one taped pass."""
    captured = {}

    def builder(up: ParamSet, qp: ParamSet):
        res = compute_residuals(Network(u_spec, up), Network(q_spec, qp), batches, problem, mollified)
        bd = assemble_scheme(config.scheme, res, rule, config.lam)
        captured["breakdown"] = bd
        return bd.total

    _, (gu, gq) = param_gradient(builder, [u_params, q_params])
    return captured["breakdown"], gu, gq


def run(problem: Problem, u_spec: NetworkSpec, q_spec: NetworkSpec, config: TrainConfig, *,
        checkpoint_path=None, log_path=None, init: tuple[ParamSet, ParamSet] | None = None) -> TrainResult:
    """Minimise the configured loss over both networks.

    Each epoch evaluates the loss and both gradients once, updates the
    potential network, then the state network (with a fresh gradient when
    ``strict_alternation`` is set). A non-finite or exploding loss stops the
    run and returns the last parameters that produced a finite loss.
    """
    if u_spec.space_dim != problem.domain.dim or q_spec.input_dim != problem.domain.dim:
        raise ValueError("network input sizes do not match the problem dimension")
    ss = np.random.SeedSequence(config.seed)
    s_u, s_q, s_sample, s_noise = ss.spawn(4)
    if init is None:
        u_params, q_params = init_params(u_spec, np.random.default_rng(s_u)), init_params(q_spec, np.random.default_rng(s_q))
    else:
        u_params, q_params = init[0].copy(), init[1].copy()
    sample_rng = np.random.default_rng(s_sample)

    batches = sample_sets(problem, config, sample_rng)
    mollified, _ = prepare_data(problem, batches["data"], config, seed=s_noise)
    rule = monte_carlo_rule(batches, problem.domain)

    opt_kw = dict(beta1=config.beta1, beta2=config.beta2, tau=config.lr, fuzz=config.fuzz)
    state_u = AdamState.zeros(u_params.size(), **opt_kw)
    state_q = AdamState.zeros(q_params.size(), **opt_kw)
    u_vec, q_vec = u_params.to_vector(), q_params.to_vector()

    result = TrainResult(Network(u_spec, u_params), Network(q_spec, q_params),
                         mollified=mollified, batches=batches)
    good = (u_vec.copy(), q_vec.copy())

    for epoch in range(config.epochs):
        if config.resample == "per_epoch" and epoch > 0:
            batches = sample_sets(problem, config, sample_rng)
            # the data points move, so the mollified data has to follow
            mollified, _ = prepare_data(problem, batches["data"], config, seed=s_noise)
            rule = monte_carlo_rule(batches, problem.domain)
        lr = learning_rate(config, epoch)
        up, qp = u_params.with_vector(u_vec), q_params.with_vector(q_vec)
        try:
            bd, gu, gq = loss_and_gradients(problem, u_spec, q_spec, up, qp, batches, rule, mollified, config)
            total = bd.total_value()
            if not math.isfinite(total) or total > config.divergence_threshold:
                raise NumericError(f"loss diverged ({total:g})", term="J_total")
        except NumericError as exc:
            log.warning("stopping at epoch %d: %s", epoch, exc)
            result.status = "diverged"
            break
        good = (u_vec, q_vec)

        state_q, q_vec = adam_step(state_q, q_vec, gq.to_vector(), lr)
        if config.strict_alternation:
            _, gu, _ = loss_and_gradients(problem, u_spec, q_spec, up, q_params.with_vector(q_vec),
                                          batches, rule, mollified, config)
        state_u, u_vec = adam_step(state_u, u_vec, gu.to_vector(), lr)

        row = {"epoch": epoch, "lr": lr, **bd.row()}
        if config.metrics_every and (epoch % config.metrics_every == 0 or epoch == config.epochs - 1):
            row["Re_q"], row["Re_u"] = quick_errors(
                problem, Network(u_spec, u_params.with_vector(u_vec)),
                Network(q_spec, q_params.with_vector(q_vec)), config.metrics_resolution)
        result.log.append(row)
        result.epochs_run = epoch + 1
        if checkpoint_path and config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
            _snapshot(result, u_spec, q_spec, u_params, q_params, u_vec, q_vec).save_checkpoint(
                checkpoint_path, {"epoch": epoch + 1, "config": config.to_dict()})

    if result.status == "diverged":
        u_vec, q_vec = good
    result.batches, result.mollified = batches, mollified
    final = _snapshot(result, u_spec, q_spec, u_params, q_params, u_vec, q_vec)
    if checkpoint_path:
        final.save_checkpoint(checkpoint_path, {"epoch": result.epochs_run, "status": final.status,
                                                "config": config.to_dict()})
    if log_path:
        final.write_log(log_path)
    return final


def _snapshot(result, u_spec, q_spec, u_params, q_params, u_vec, q_vec) -> TrainResult:
    return replace(result, u=Network(u_spec, u_params.with_vector(u_vec)),
                   q=Network(q_spec, q_params.with_vector(q_vec)))
