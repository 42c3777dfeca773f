import numpy as np
import pytest

from nwqm import autodiff as ad


def _params(rng, **shapes):
    return {name: ad.parameter(rng.normal(size=shape), name)
            for name, shape in shapes.items()}


def test_add_mul_matmul_against_finite_differences():
    rng = np.random.default_rng(0)
    params = _params(rng, w=(4, 3), b=(3,), x=(4,))

    def loss():
        y = params["x"] @ params["w"] + params["b"]
        return ad.total(y * y)

    worst = ad.check_gradients(loss, params)
    assert worst <= 1e-5


def test_nonlinearities_against_finite_differences():
    rng = np.random.default_rng(1)
    params = _params(rng, a=(5,), b=(5,))

    def loss():
        y = ad.sigmoid(params["a"]) * ad.tanh(params["b"]) + ad.absolute(params["a"] - params["b"])
        return ad.mean(y)

    assert ad.check_gradients(loss, params) <= 1e-5


def test_softmax_log_pick_against_finite_differences():
    rng = np.random.default_rng(2)
    params = _params(rng, z=(6,))

    def loss():
        return -ad.log(ad.pick(ad.softmax(params["z"]), 2))

    assert ad.check_gradients(loss, params) <= 1e-5


def test_concat_stack_mean_axis_against_finite_differences():
    rng = np.random.default_rng(3)
    params = _params(rng, a=(3,), b=(3,), c=(2,))

    def loss():
        stacked = ad.stack([params["a"], params["b"]])  # (2, 3)
        pooled = ad.mean(stacked, axis=0)
        return ad.total(ad.concat([pooled, params["c"]]))

    assert ad.check_gradients(loss, params) <= 1e-5


def test_rows_mean_gather_gradient():
    rng = np.random.default_rng(4)
    params = _params(rng, table=(7, 3))

    def loss():
        pooled = ad.rows_mean(params["table"], [0, 2, 2, 5])
        return ad.total(pooled * pooled)

    assert ad.check_gradients(loss, params) <= 1e-5


def test_broadcast_bias_gradient():
    rng = np.random.default_rng(5)
    params = _params(rng, m=(4, 3), bias=(3,))

    def loss():
        return ad.total(ad.sigmoid(params["m"] + params["bias"]))

    assert ad.check_gradients(loss, params) <= 1e-5


def test_abs_subgradient_zero_at_zero():
    x = ad.parameter(np.array([0.0, -2.0, 3.0]), "x")
    y = ad.total(ad.absolute(x))
    ad.backward(y)
    np.testing.assert_array_equal(x.grad, [0.0, -1.0, 1.0])


def test_gradient_accumulates_across_shared_use():
    x = ad.parameter(np.array([2.0]), "x")
    y = x * x  # dy/dx = 2x = 4
    ad.backward(ad.total(y))
    np.testing.assert_allclose(x.grad, [4.0])


def test_constants_get_no_gradients():
    x = ad.parameter(np.ones(3), "x")
    c = ad.constant(np.full(3, 2.0))
    ad.backward(ad.total(x * c))
    assert c.grad is None
    np.testing.assert_array_equal(x.grad, [2.0, 2.0, 2.0])


def test_backward_requires_scalar():
    x = ad.parameter(np.ones(3), "x")
    with pytest.raises(ValueError, match="scalar"):
        ad.backward(x * x)


def test_softmax_sums_to_one_and_stability():
    big = ad.constant(np.array([1000.0, 1000.5, 999.0]))
    out = ad.softmax(big).value
    assert np.isfinite(out).all()
    assert abs(out.sum() - 1.0) < 1e-12
