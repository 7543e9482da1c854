"""Fully connected tanh networks, their input-derivative jets, and parameter gradients.

A network ``s(z) = W_K l_{K-1}(...l_1(z)) + b_K`` with ``l_k(z) = tanh(W_k z + b_k)``
is used twice: once for the state ``u(x, t)`` (``time_input=True``, the last
input coordinate is time) and once for the potential ``q(x)``.

Input derivatives are obtained by pushing truncated Taylor coefficients
through the layers. For every hidden layer we carry the value and the
channels ``d/dt``, ``d2/dt2``, ``d/dx_i``, ``d2/dx_i2``, ``d2/dt dx_i`` and
``d3/dt dx_i2``. Affine maps act linearly on every channel (the bias only
touches the value); the activation mixes them through Faa di Bruno's formula.
Channels that are structurally zero are carried as ``None`` so they cost
nothing.

All arithmetic goes through :mod:`invpot.autodiff`, so the same code path
evaluates plain numpy parameters or taped parameters.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad

ACTIVATIONS = ("tanh",)


class ConfigurationError(ValueError):
    """Shapes or settings that do not fit together."""


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    widths: tuple[int, ...]
    output_dim: int = 1
    activation: str = "tanh"
    time_input: bool = False

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ConfigurationError("input_dim and output_dim must be positive")
        if any(w < 1 for w in self.widths):
            raise ConfigurationError(f"all widths must be >= 1, got {self.widths}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unsupported activation {self.activation!r}")
        if self.time_input and self.input_dim < 2:
            raise ConfigurationError("a time-dependent network needs at least one space input")

    @property
    def hidden_layers(self) -> int:
        return len(self.widths)

    @property
    def space_dim(self) -> int:
        return self.input_dim - 1 if self.time_input else self.input_dim

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.widths, self.output_dim)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "widths": list(self.widths),
            "output_dim": self.output_dim,
            "activation": self.activation,
            "time_input": self.time_input,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(
            input_dim=d["input_dim"],
            widths=tuple(d["widths"]),
            output_dim=d.get("output_dim", 1),
            activation=d.get("activation", "tanh"),
            time_input=d.get("time_input", False),
        )


@dataclass
class ParamSet:
    """Weights ``W_k`` (shape ``d_k x d_{k-1}``) and biases ``b_k`` of every layer.

    Entries are numpy arrays, or :class:`~invpot.autodiff.Var` while taped.
    """

    weights: list
    biases: list

    def arrays(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @classmethod
    def from_arrays(cls, arrays: Sequence) -> "ParamSet":
        return cls(list(arrays[0::2]), list(arrays[1::2]))

    def size(self) -> int:
        return sum(int(np.size(ad.value_of(a))) for a in self.arrays())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([np.ravel(ad.value_of(a)) for a in self.arrays()])

    def with_vector(self, vec: np.ndarray) -> "ParamSet":
        out, pos = [], 0
        for a in self.arrays():
            a = ad.value_of(a)
            out.append(np.array(vec[pos:pos + a.size], dtype=np.float64).reshape(a.shape))
            pos += a.size
        if pos != len(vec):
            raise ConfigurationError(f"vector has {len(vec)} entries, parameters need {pos}")
        return ParamSet.from_arrays(out)

    def copy(self) -> "ParamSet":
        return ParamSet([np.array(w, copy=True) for w in self.weights],
                        [np.array(b, copy=True) for b in self.biases])

    def check(self, spec: NetworkSpec) -> None:
        sizes = spec.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ConfigurationError("number of layers does not match the network spec")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if np.shape(ad.value_of(w)) != (sizes[k + 1], sizes[k]):
                raise ConfigurationError(f"W_{k + 1} has shape {np.shape(ad.value_of(w))}, "
                                         f"expected {(sizes[k + 1], sizes[k])}")
            if np.shape(ad.value_of(b)) != (sizes[k + 1],):
                raise ConfigurationError(f"b_{k + 1} has shape {np.shape(ad.value_of(b))}")
            if not (np.all(np.isfinite(ad.value_of(w))) and np.all(np.isfinite(ad.value_of(b)))):
                raise ConfigurationError(f"layer {k + 1} has non-finite parameters")


def init_params(spec: NetworkSpec, rng: np.random.Generator | int | None = None) -> ParamSet:
    """Xavier-uniform weights, zero biases."""
    rng = np.random.default_rng(rng)
    sizes = spec.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return ParamSet(weights, biases)


def zero_params(spec: NetworkSpec) -> ParamSet:
    sizes = spec.layer_sizes
    return ParamSet([np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])],
                    [np.zeros(o) for o in sizes[1:]])


def _points(spec: NetworkSpec, point) -> tuple[np.ndarray, bool]:
    z = np.asarray(point, dtype=np.float64)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    if z.shape[-1] != spec.input_dim:
        raise ConfigurationError(f"points have {z.shape[-1]} coordinates, network expects {spec.input_dim}")
    return z, single


def forward(spec: NetworkSpec, params: ParamSet, point):
    """Network output at one point (shape ``(input_dim,)``) or a batch ``(B, input_dim)``."""
    params.check(spec)
    z, single = _points(spec, point)
    h = z
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = ad.add(ad.linear(h, w), b)
        h = a if k == last else ad.tanh(a)
    out = ad.squeeze_last(h) if spec.output_dim == 1 else h
    return out[0] if single else out


@dataclass
class Jet:
    """Network value and input derivatives over a batch of ``B`` points.

    ``dx``, ``dxx`` and ``dt_dxx`` are stored space-axis first, shape ``(d, B)``:
    ``dxx[i]`` is the pure second derivative in ``x_i``. A field is ``None``
    when it was not requested.
    """

    value: object
    dt: object = None
    dtt: object = None
    dx: object = None
    dxx: object = None
    dt_dxx: object = None

    def laplacian(self):
        return ad.total(self.dxx, axis=0)

    def dt_laplacian(self):
        return ad.total(self.dt_dxx, axis=0)

    def numpy(self) -> "Jet":
        conv = lambda v: None if v is None else np.asarray(ad.value_of(v))
        return Jet(*(conv(getattr(self, f)) for f in ("value", "dt", "dtt", "dx", "dxx", "dt_dxx")))

    def __add__(self, other: "Jet") -> "Jet":
        def plus(a, b):
            if a is None or b is None:
                return None
            return ad.add(a, b)
        return Jet(*(plus(getattr(self, f), getattr(other, f))
                     for f in ("value", "dt", "dtt", "dx", "dxx", "dt_dxx")))


def _mul(a, b):
    if a is None or b is None:
        return None
    return ad.mul(a, b)


def _add(*terms):
    out = None
    for t in terms:
        if t is None:
            continue
        out = t if out is None else ad.add(out, t)
    return out


def _lin(h, w):
    return None if h is None else ad.linear(h, w)


def _tanh_jet(a: dict, need2: bool, need3: bool) -> dict:
    s = ad.tanh(a["v"])
    s2 = ad.square(s)
    d1 = 1.0 - s2
    d2 = d3 = None
    if need2:
        d2 = -2.0 * ad.mul(s, d1)
    if need3:
        d3 = -2.0 * ad.mul(d1, d1 - 2.0 * s2)
    at, ax = a["t"], a["x"]
    h = {"v": s}
    h["t"] = _mul(d1, at)
    h["x"] = _mul(d1, ax)
    h["tt"] = _add(_mul(d2, _mul(at, at)) if at is not None and need2 else None, _mul(d1, a["tt"]))
    ax2 = ad.square(ax) if ax is not None and need2 else None
    h["xx"] = _add(_mul(d2, ax2), _mul(d1, a["xx"]))
    h["tx"] = _add(_mul(d2, _mul(at, ax)) if need2 else None, _mul(d1, a["tx"]))
    if need3 and at is not None and ax is not None:
        h["txx"] = _add(
            _mul(d3, _mul(at, ax2)),
            _mul(d2, _add(2.0 * _mul(ax, a["tx"]) if a["tx"] is not None else None,
                          _mul(at, a["xx"]))),
            _mul(d1, a["txx"]),
        )
    else:
        h["txx"] = None
    return h


def forward_jet(spec: NetworkSpec, params: ParamSet, points, *, time: bool = True,
                space: bool = True) -> Jet:
    """Value and input derivatives of the network at a batch of points.

    ``time`` requests ``dt`` and ``dtt``; ``space`` requests ``dx`` and ``dxx``;
    both together also give ``dt_dxx``. For networks without a time input the
    time fields are returned as zeros.
    """
    params.check(spec)
    z, _ = _points(spec, points)
    d = spec.space_dim
    has_t = spec.time_input and time
    need3 = has_t and space

    w1 = params.weights[0]
    a = {"v": ad.add(ad.linear(z, w1), params.biases[0]),
         "t": None, "tt": None, "x": None, "xx": None, "tx": None, "txx": None}
    if has_t:
        a["t"] = ad.getitem(w1, (slice(None), d))
    if space:
        # (d, 1, n): d/dx_i of the first pre-activation is column i of W_1
        a["x"] = ad.reshape(ad.transpose(ad.getitem(w1, (slice(None), slice(0, d)))),
                            (d, 1, spec.layer_sizes[1]))
    last = len(params.weights) - 1
    for k in range(1, last + 1):
        h = _tanh_jet(a, True, need3)
        w, b = params.weights[k], params.biases[k]
        a = {key: _lin(val, w) for key, val in h.items()}
        a["v"] = ad.add(a["v"], b)
    out = {key: (None if val is None else ad.squeeze_last(val)) for key, val in a.items()}

    n = np.shape(ad.value_of(out["v"]))[0]

    def filled(val, shape):
        if val is None:
            return np.zeros(shape)
        if np.shape(ad.value_of(val)) != shape:
            return ad.add(val, np.zeros(shape))
        return val

    jet = Jet(value=out["v"])
    if time:
        jet.dt = filled(out["t"], (n,))
        jet.dtt = filled(out["tt"], (n,))
    if space:
        jet.dx = filled(out["x"], (d, n))
        jet.dxx = filled(out["xx"], (d, n))
    if time and space:
        jet.dt_dxx = filled(out["txx"], (d, n))
    return jet


def param_gradient(scalar_builder: Callable[..., object],
                   params_list: Sequence[ParamSet]) -> tuple[float, list[ParamSet]]:
    """Value and exact gradient of ``scalar_builder(*params_list)``.

    ``scalar_builder`` receives taped copies of the parameter sets and may
    combine :func:`forward` / :func:`forward_jet` evaluations freely. Raises
    :class:`~invpot.autodiff.NumericError` naming the first non-finite term.
    """
    layout = [len(p.arrays()) for p in params_list]
    flat = [a for p in params_list for a in p.arrays()]

    def fn(*leaves):
        sets, pos = [], 0
        for n in layout:
            sets.append(ParamSet.from_arrays(leaves[pos:pos + n]))
            pos += n
        return scalar_builder(*sets)

    value, grads = ad.grad(fn, flat)
    out, pos = [], 0
    for n in layout:
        out.append(ParamSet.from_arrays(grads[pos:pos + n]))
        pos += n
    return value, out


# -- checkpoints --------------------------------------------------------------

def params_to_dict(spec: NetworkSpec, params: ParamSet) -> dict:
    return {
        "spec": spec.to_dict(),
        "weights": [np.asarray(w).tolist() for w in params.weights],
        "biases": [np.asarray(b).tolist() for b in params.biases],
    }


def params_from_dict(d: dict) -> tuple[NetworkSpec, ParamSet]:
    spec = NetworkSpec.from_dict(d["spec"])
    params = ParamSet([np.array(w, dtype=np.float64).reshape(o, i)
                       for w, i, o in zip(d["weights"], spec.layer_sizes[:-1], spec.layer_sizes[1:])],
                      [np.array(b, dtype=np.float64) for b in d["biases"]])
    params.check(spec)
    return spec, params


def save_checkpoint(path, networks: dict[str, tuple[NetworkSpec, ParamSet]], meta: dict | None = None) -> None:
    """Write named networks to JSON. Floats are written with ``repr`` so reloading is bit-exact."""
    payload = {"format": "invpot-checkpoint/1", "meta": meta or {},
               "networks": {name: params_to_dict(s, p) for name, (s, p) in networks.items()}}
    Path(path).write_text(json.dumps(payload, allow_nan=False))


def load_checkpoint(path) -> tuple[dict[str, tuple[NetworkSpec, ParamSet]], dict]:
    payload = json.loads(Path(path).read_text())
    nets = {name: params_from_dict(d) for name, d in payload["networks"].items()}
    return nets, payload.get("meta", {})


@dataclass
class Network:
    """A spec bundled with its parameters; the evaluator the residuals consume."""

    spec: NetworkSpec
    params: ParamSet = field(repr=False)

    def value(self, points):
        return forward(self.spec, self.params, points)

    def jet(self, points, *, time: bool = True, space: bool = True) -> Jet:
        return forward_jet(self.spec, self.params, points, time=time, space=space)
