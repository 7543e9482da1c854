import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from invpot import autodiff as ad
from invpot.autodiff import NumericError, Var


def fd_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def test_plain_arrays_pass_through():
    a = np.array([1.0, 2.0])
    assert isinstance(ad.add(a, 1.0), np.ndarray)
    assert np.array_equal(ad.mul(a, a), a * a)
    assert np.array_equal(ad.tanh(a), np.tanh(a))


def test_grad_of_composite_matches_differences(rng):
    w = rng.standard_normal((4, 3))
    h = rng.standard_normal((5, 3))

    def f(w_):
        z = ad.tanh(ad.linear(h, w_))
        return ad.total(ad.square(z - 0.3) * 2.0)

    val, (g,) = ad.grad(f, [w])
    num = fd_grad(lambda x: float(ad.value_of(f(x))), w)
    assert val == pytest.approx(float(f(w)))
    assert np.allclose(g, num, rtol=1e-6, atol=1e-8)


def test_broadcast_gradient_is_summed():
    b = np.array([0.5, -1.0])
    x = np.ones((3, 2))
    _, (g,) = ad.grad(lambda b_: ad.total(ad.mul(ad.add(x, b_), 2.0)), [b])
    assert np.array_equal(g, np.array([6.0, 6.0]))


def test_getitem_reshape_transpose_gradients(rng):
    a = rng.standard_normal((3, 4))

    def f(a_):
        part = ad.getitem(a_, (slice(None), slice(1, 3)))
        return ad.total(ad.square(ad.reshape(ad.transpose(part), (6,))))

    _, (g,) = ad.grad(f, [a])
    expect = np.zeros_like(a)
    expect[:, 1:3] = 2 * a[:, 1:3]
    assert np.allclose(g, expect)


def test_unused_input_has_zero_gradient():
    _, (ga, gb) = ad.grad(lambda a, b: ad.total(ad.square(a)), [np.ones(2), np.ones(3)])
    assert np.array_equal(gb, np.zeros(3))
    assert np.array_equal(ga, 2 * np.ones(2))


def test_nonfinite_output_names_term():
    def f(a):
        return ad.label(ad.total(ad.mul(a, np.inf)), "J_bad")

    with pytest.raises(NumericError) as err:
        ad.grad(f, [np.ones(2)])
    assert err.value.term == "J_bad"


def test_var_refuses_numpy_ufunc_dispatch():
    v = Var(np.ones(2))
    out = np.ones(2) + v
    assert isinstance(out, Var)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (4,), elements=st.floats(-3, 3)))
def test_tanh_square_gradient_property(x):
    _, (g,) = ad.grad(lambda a: ad.total(ad.square(ad.tanh(a))), [x])
    t = np.tanh(x)
    assert np.allclose(g, 2 * t * (1 - t * t), atol=1e-12)
