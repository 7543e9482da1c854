"""Empirical losses and training errors.

The Sobolev-type loss sums ten weighted squared residual streams:

    J = sum w_d0 |q R_d|^2 + sum w_d1 |Laplace R_d|^2
      + lam (sum w_i0 |R_int|^2 + sum w_i1 |d_t R_int|^2)
      + sum w_t0 |R_tb|^2 + sum w_t1 |q R_tb|^2 + sum w_t2 |Laplace R_tb|^2
      + sum w_s0 |R_sb|^2 + sum w_s1 |d_t R_sb|^2 + sum w_s2 |d_tt R_sb|^2

and the baseline least-squares loss keeps only the undifferentiated
``R_d, R_int, R_tb, R_sb`` terms.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad

TERMS = ("d0", "d1", "int0", "int1", "tb0", "tb1", "tb2", "sb0", "sb1", "sb2")
STANDARD_TERMS = ("d", "int", "tb", "sb")

# residual stream feeding each term, and the quadrature rule entry weighting it
_SOBOLEV = {
    "d0": ("q_r_d", "data", 0), "d1": ("lap_r_d", "data", 1),
    "int0": ("r_int", "interior", 0), "int1": ("dt_r_int", "interior", 1),
    "tb0": ("r_tb", "initial", 0), "tb1": ("q_r_tb", "initial", 1), "tb2": ("lap_r_tb", "initial", 2),
    "sb0": ("r_sb", "spatial_boundary", 0), "sb1": ("dt_r_sb", "spatial_boundary", 1),
    "sb2": ("dtt_r_sb", "spatial_boundary", 2),
}
_STANDARD = {
    "d": ("r_d", "data", 0), "int": ("r_int", "interior", 0),
    "tb": ("r_tb", "initial", 0), "sb": ("r_sb", "spatial_boundary", 0),
}
_LAMBDA_TERMS = {"int0", "int1", "int"}


@dataclass
class QuadratureRule:
    """Weights per batch kind and derivative order: ``weights[kind][k]`` is an array over points."""

    weights: dict[str, list[np.ndarray]]

    def get(self, kind: str, order: int) -> np.ndarray:
        per_order = self.weights[kind]
        return per_order[min(order, len(per_order) - 1)]


def batch_measure(kind: str, domain) -> float:
    if kind == "interior":
        return domain.volume * domain.T
    if kind == "spatial_boundary":
        return domain.boundary_measure * domain.T
    if kind in ("initial", "data"):
        return domain.volume
    raise ValueError(f"unknown batch kind {kind!r}")


def monte_carlo_weights(batch, domain) -> np.ndarray:
    """Equal weights ``measure / N`` for uniformly sampled points."""
    if batch.count == 0:
        raise ValueError(f"empty {batch.kind} batch")
    return np.full(batch.count, batch_measure(batch.kind, domain) / batch.count)


def monte_carlo_rule(batches: dict, domain) -> QuadratureRule:
    orders = {"interior": 2, "spatial_boundary": 3, "initial": 3, "data": 2}
    rule = {}
    for kind, batch in batches.items():
        w = monte_carlo_weights(batch, domain)
        rule[kind] = [w] * orders[kind]
    return QuadratureRule(rule)


@dataclass
class LossBreakdown:
    terms: dict
    lam: float
    total: object
    scheme: str = "sobolev"
    training_errors: dict = field(default_factory=dict)

    def total_value(self) -> float:
        return float(ad.value_of(self.total))

    def term_values(self) -> dict[str, float]:
        return {k: float(ad.value_of(v)) for k, v in self.terms.items()}

    def row(self) -> dict[str, float]:
        """Flat record: every term, the total, and the training errors (``E_*``)."""
        out = {f"J_{k}": v for k, v in self.term_values().items()}
        out["J_total"] = self.total_value()
        out.update({f"E_{k}": v for k, v in self.training_errors.items()})
        return out


def _weighted_square_sum(w, r):
    return ad.total(ad.mul(w, ad.square(r)))


def _assemble(residuals, rule: QuadratureRule, lam: float, table: dict, scheme: str) -> LossBreakdown:
    if lam <= 0:
        raise ValueError("lambda must be positive")
    terms = {}
    for name, (stream, kind, order) in table.items():
        r = getattr(residuals, stream, None)
        if r is None:
            raise ValueError(f"residual stream {stream!r} missing for term {name!r}")
        terms[name] = ad.label(_weighted_square_sum(rule.get(kind, order), r), f"J_{name}")
    total = None
    for name in table:
        term = ad.mul(lam, terms[name]) if name in _LAMBDA_TERMS else terms[name]
        total = term if total is None else ad.add(total, term)
    errors = {name: float(np.sqrt(ad.value_of(v))) for name, v in terms.items()}
    return LossBreakdown(terms, lam, ad.label(total, "J_total"), scheme, errors)


def assemble(residuals, rule: QuadratureRule, lam: float) -> LossBreakdown:
    """The Sobolev-regularised empirical loss; ``lam`` multiplies the two interior sums only."""
    return _assemble(residuals, rule, lam, _SOBOLEV, "sobolev")


def assemble_standard(residuals, rule: QuadratureRule, lam: float) -> LossBreakdown:
    """Plain least-squares baseline ``|R_d|^2 + lam |R_int|^2 + |R_tb|^2 + |R_sb|^2``."""
    return _assemble(residuals, rule, lam, _STANDARD, "standard")


def assemble_scheme(scheme: str, residuals, rule, lam) -> LossBreakdown:
    if scheme == "sobolev":
        return assemble(residuals, rule, lam)
    if scheme == "standard":
        return assemble_standard(residuals, rule, lam)
    raise ValueError(f"unknown loss scheme {scheme!r}")
