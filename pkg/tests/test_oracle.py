import numpy as np
import pytest

from invpot.net import NetworkSpec
from invpot.oracle import FDGrid, fd_check, jet_fd_errors, loss_gradient_check, refinement_orders, solve_forward
from invpot.problem import example1, example2, example3

from conftest import random_net


def test_grid_geometry():
    g = FDGrid.uniform(example2().domain, 0.25, 0.1)
    assert g.cells == (8, 8) and g.steps == 10 and g.shape == (9, 9)
    assert np.allclose(g.spacing, 0.25) and g.k == pytest.approx(0.1)
    assert g.boundary_mask().sum() == 32
    with pytest.raises(ValueError):
        FDGrid(((0, 1),), (1,), 1.0, 4)


def test_example1_forward_error():
    p = example1()
    sol = solve_forward(p, p.q_exact, FDGrid.uniform(p.domain, 1 / 50, 1 / 200))
    assert sol.max_error(p.u_exact) < 1e-2
    x = sol.grid.nodes()
    assert np.allclose(sol.at_final().ravel()[sol.grid.boundary_mask()],
                       p.u_exact(x, np.ones(len(x)))[sol.grid.boundary_mask()], atol=1e-14)


def test_example3_linear_in_time_is_solved_well():
    p = example3()
    sol = solve_forward(p, p.q_exact, FDGrid.uniform(p.domain, 0.125, 0.1))
    assert sol.max_error(p.u_exact) < 1e-2


def test_refinement_orders_example1():
    p = example1()
    orders = refinement_orders(p, p.q_exact, p.domain, 1 / 16, 1 / 32)
    assert orders["space"] > 1.9
    assert orders["time"] > 0.9


def test_final_field_feeds_the_mollifier_lattice():
    p = example2()
    sol = solve_forward(p, p.q_exact, FDGrid.uniform(p.domain, 0.1, 0.05))
    f = sol.final_field()
    assert f.dim == 2 and f.values.shape == (21, 21)


def test_negative_potential_is_rejected():
    p = example1()
    with pytest.raises(ValueError):
        solve_forward(p, lambda x: -np.ones(len(x)), FDGrid.uniform(p.domain, 0.25, 0.25))


def test_fd_check_on_known_functions():
    out = fd_check(lambda x: np.sin(x[0]) * x[1] ** 3, np.array([0.3, 1.5]))
    assert np.allclose(out[1], [np.cos(0.3) * 1.5 ** 3, np.sin(0.3) * 3 * 1.5 ** 2], rtol=1e-9)
    assert np.allclose(out[2], [-np.sin(0.3) * 1.5 ** 3, np.sin(0.3) * 6 * 1.5], rtol=1e-6)
    s = fd_check(np.exp, 0.7)
    assert s[1] == pytest.approx(np.exp(0.7), rel=1e-9)


def test_jet_errors_are_small(rng):
    spec, params = random_net(rng, 3, layers=2, width=5, time_input=True)
    errs = jet_fd_errors(spec, params, np.array([0.3, 0.6, 0.4]))
    assert set(errs) == {"value", "dx", "dxx", "dt", "dtt", "dt_dxx"}
    assert errs["dx"][2] < 1e-5 and errs["dxx"][2] < 1e-4 and errs["dt_dxx"][2] < 1e-3


def test_small_gradient_check():
    p = example1()
    u_spec, q_spec = NetworkSpec(3, (4,), time_input=True), NetworkSpec(2, (4,))
    res = loss_gradient_check(p, u_spec, q_spec, points=8)
    assert res["parameters"] == 21 + 17
    assert res["max_rel_error"] < 1e-4
    std = loss_gradient_check(p, u_spec, q_spec, points=8, scheme="standard")
    assert std["max_rel_error"] < 1e-4
