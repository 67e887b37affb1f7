import numpy as np
import pytest

from hoinfo.optim import ParamStore, grad_step, init_adam


def store_with(x):
    return ParamStore({"x": np.asarray(x, dtype=np.float64)})


def test_zero_gradients_leave_params_move_ema():
    params = store_with([1.0, -2.0])
    state = init_adam(params, lr=0.1, ema_decay=0.5)
    state.ema["x"] = np.array([0.0, 0.0])
    before = params.values["x"].copy()
    grad_step(params, {"x": np.zeros(2)}, state)
    np.testing.assert_array_equal(params.values["x"], before)
    # EMA contracts toward the (unchanged) parameters
    np.testing.assert_allclose(state.ema["x"], 0.5 * before)


def test_constant_gradient_moves_against_sign():
    params = store_with([0.0])
    state = init_adam(params, lr=0.01)
    for _ in range(50):
        grad_step(params, {"x": np.array([3.0])}, state)
    assert params.values["x"][0] < 0.0
    params = store_with([0.0])
    state = init_adam(params, lr=0.01)
    for _ in range(50):
        grad_step(params, {"x": np.array([-3.0])}, state)
    assert params.values["x"][0] > 0.0


def test_quadratic_bowl_converges():
    # minimize (x - 3)^2, analytic gradient 2 (x - 3)
    params = store_with([10.0])
    state = init_adam(params, lr=0.05)
    for step in range(5000):
        g = 2.0 * (params.values["x"] - 3.0)
        grad_step(params, {"x": g}, state)
        if abs(params.values["x"][0] - 3.0) < 1e-3:
            break
    assert abs(params.values["x"][0] - 3.0) < 1e-3
    assert step < 5000


def test_non_finite_gradient_names_parameter():
    params = ParamStore({"weights": np.ones(2), "bias": np.ones(1)})
    state = init_adam(params, lr=0.1)
    with pytest.raises(FloatingPointError, match="bias"):
        grad_step(params, {"weights": np.zeros(2), "bias": np.array([np.nan])}, state)


def test_zero_ema_decay_tracks_params():
    params = store_with([5.0])
    state = init_adam(params, lr=0.1, ema_decay=0.0)
    for _ in range(10):
        grad_step(params, {"x": np.array([1.0])}, state)
    np.testing.assert_array_equal(state.ema["x"], params.values["x"])


def test_grad_shape_mismatch_rejected():
    with pytest.raises(ValueError, match="shape"):
        ParamStore({"x": np.ones(3)}, grads={"x": np.ones(2)})


def test_invalid_hyperparameters_rejected():
    params = store_with([1.0])
    with pytest.raises(ValueError):
        init_adam(params, lr=0.0)
    with pytest.raises(ValueError):
        init_adam(params, lr=0.1, ema_decay=1.0)
