import numpy as np
import pytest

from invpot.autodiff import NumericError
from invpot.net import Network, NetworkSpec, zero_params
from invpot.problem import ExactPotential, ExactState, example1, example2, example3
from invpot.residual import (CollocationBatch, MollifiedData, boundary_residuals, compute_residuals,
                             data_residuals, initial_residuals, interior_residuals)
from invpot.train import TrainConfig, sample_sets

from conftest import random_net

ALL = [example1, example2, example3]


def exact_pair(p):
    return ExactState(p), ExactPotential(p)


def exact_data(p, batch):
    return MollifiedData(p.phi(batch.x), p.laplacian_phi(batch.x), 0.0)


def zero_pair(p):
    d = p.domain.dim
    us, qs = NetworkSpec(d + 1, (4,), time_input=True), NetworkSpec(d, (4,))
    return Network(us, zero_params(us)), Network(qs, zero_params(qs))


def random_pair(p, rng):
    d = p.domain.dim
    us, up = random_net(rng, d + 1, layers=2, width=6, time_input=True)
    qs, qp = random_net(rng, d, layers=2, width=6)
    return Network(us, up), Network(qs, qp)


@pytest.mark.parametrize("make", ALL)
def test_exact_oracles_give_zero_residuals(make):
    p = make()
    batches = sample_sets(p, TrainConfig(n_interior=64, n_boundary=64, n_initial=64, n_data=64))
    u, q = exact_pair(p)
    res = compute_residuals(u, q, batches, p, exact_data(p, batches["data"])).numpy()
    for name in ("r_int", "dt_r_int", "r_sb", "dt_r_sb", "dtt_r_sb", "r_tb", "q_r_tb", "lap_r_tb",
                 "r_d", "q_r_d", "lap_r_d"):
        assert np.max(np.abs(getattr(res, name))) < 1e-10, name


def test_zero_networks_example1():
    p = example1()
    b = sample_sets(p, TrainConfig(n_interior=20, n_boundary=20, n_initial=20, n_data=20))
    u, q = zero_pair(p)
    r, _ = interior_residuals(u, q, b["interior"], p)
    assert np.array_equal(r, -p.F(b["interior"].x, b["interior"].t))
    rsb, _, _ = boundary_residuals(u, b["spatial_boundary"], p)
    xb, tb = b["spatial_boundary"].x, b["spatial_boundary"].t
    assert np.allclose(rsb, -(np.sum(xb ** 2, axis=1) + 1) * np.exp(tb), rtol=1e-15)
    _, qr, _ = data_residuals(u, q, b["data"], exact_data(p, b["data"]))
    assert np.all(qr == 0)


def test_zero_network_example2_initial_residual():
    p = example2()
    b = sample_sets(p, TrainConfig(n_initial=30))
    u, q = zero_pair(p)
    r, qr, lap = initial_residuals(u, q, b["initial"], p)
    assert np.all(r == 0) and np.all(qr == 0) and np.all(lap == 0)


def test_time_derivative_residuals_match_differences(rng):
    p = example1()
    u, q = random_pair(p, rng)
    x = rng.random((6, 2))
    t = 0.2 + 0.6 * rng.random(6)
    h = 1e-4

    def r_int(tt):
        return interior_residuals(u, q, CollocationBatch("interior", x, tt), p)[0]

    _, dr = interior_residuals(u, q, CollocationBatch("interior", x, t), p)
    fd = (r_int(t + h) - r_int(t - h)) / (2 * h)
    assert np.allclose(dr, fd, rtol=1e-4, atol=1e-6)

    def r_sb(tt):
        return boundary_residuals(u, CollocationBatch("spatial_boundary", x, tt), p)[0]

    _, d1, d2 = boundary_residuals(u, CollocationBatch("spatial_boundary", x, t), p)
    assert np.allclose(d1, (r_sb(t + h) - r_sb(t - h)) / (2 * h), rtol=1e-4, atol=1e-6)
    fd2 = (r_sb(t + h) - 2 * r_sb(t) + r_sb(t - h)) / h ** 2
    assert np.allclose(d2, fd2, rtol=1e-3, atol=1e-4)


def test_laplacian_residuals_match_differences(rng):
    p = example1()
    u, q = random_pair(p, rng)
    x = 0.2 + 0.6 * rng.random((5, 2))
    h = 1e-4

    def r_tb(xx):
        return initial_residuals(u, q, CollocationBatch("initial", xx, np.zeros(len(xx))), p)[0]

    _, _, lap = initial_residuals(u, q, CollocationBatch("initial", x, np.zeros(5)), p)
    fd = sum((r_tb(x + h * e) - 2 * r_tb(x) + r_tb(x - h * e)) / h ** 2 for e in np.eye(2))
    assert np.allclose(lap, fd, rtol=1e-3, atol=1e-4)


def test_data_residuals_are_affine_in_data(rng):
    p = example1()
    u, q = random_pair(p, rng)
    b = CollocationBatch("data", rng.random((8, 2)), np.ones(8))
    m0 = MollifiedData(np.zeros(8), np.zeros(8))
    m1 = MollifiedData(np.ones(8), np.full(8, 2.0))
    r0, qr0, l0 = data_residuals(u, q, b, m0)
    r1, qr1, l1 = data_residuals(u, q, b, m1)
    assert np.allclose(r1 - r0, -1.0)
    assert np.allclose(qr1 - qr0, -q.value(b.x))
    assert np.allclose(l1 - l0, -2.0)


def test_batch_validation():
    with pytest.raises(ValueError):
        CollocationBatch("corner", np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        CollocationBatch("data", np.zeros((2, 2)), np.zeros(3))
    p = example1()
    u, q = exact_pair(p)
    with pytest.raises(ValueError):
        interior_residuals(u, q, CollocationBatch("data", np.zeros((2, 2)), np.ones(2)), p)
    with pytest.raises(ValueError):
        data_residuals(u, q, CollocationBatch("data", np.zeros((2, 2)), np.ones(2)),
                       MollifiedData(np.zeros(3), np.zeros(3)))


def test_nonfinite_residual_reports_point(rng):
    p = example1()
    u, q = random_pair(p, rng)
    b = CollocationBatch("data", rng.random((4, 2)), np.ones(4))
    bad = MollifiedData(np.array([0.0, 0.0, np.nan, 0.0]), np.zeros(4))
    with pytest.raises(NumericError) as err:
        data_residuals(u, q, b, bad)
    assert err.value.term == "r_d"
    assert "index 2" in str(err.value)
