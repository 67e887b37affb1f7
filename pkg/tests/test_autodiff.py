import numpy as np
import pytest

from hoinfo import autodiff as ad


def scalar_graph(values: dict[str, np.ndarray]):
    """A little two-layer net with every supported op in the path."""
    nodes = {k: ad.leaf(v, requires_grad=True) for k, v in values.items()}
    x = ad.leaf(np.array([[0.3, -1.2], [2.0, 0.4], [-0.7, 0.9]]))
    h = ad.silu(ad.affine(x, nodes["w1"], nodes["b1"]))
    h = ad.add(h, nodes["c"])
    out = ad.affine(h, nodes["w2"], nodes["b2"])
    target = np.array([[0.1, -0.2, 0.4, 0.0], [0.0, 0.5, -1.0, 0.2], [1.0, 0.3, 0.0, -0.6]])
    mask = np.array([True, False, True, True])
    return ad.masked_mse(out, target, mask), nodes


def make_values(seed=0):
    gen = np.random.default_rng(seed)
    return {
        "w1": gen.standard_normal((2, 16)) * 0.5,
        "b1": gen.standard_normal(16) * 0.1,
        "c": gen.standard_normal(16) * 0.1,
        "w2": gen.standard_normal((16, 4)) * 0.5,
        "b2": gen.standard_normal(4) * 0.1,
    }


def test_gradients_match_central_differences():
    values = make_values()
    loss, nodes = scalar_graph(values)
    ad.backward(loss)
    gen = np.random.default_rng(1)
    step = 1e-4
    checked = 0
    for name, base in values.items():
        flat = base.ravel()
        picks = gen.choice(flat.size, size=min(flat.size, 40), replace=False)
        for idx in picks:
            vp = {k: v.copy() for k, v in values.items()}
            vp[name].ravel()[idx] += step
            vm = {k: v.copy() for k, v in values.items()}
            vm[name].ravel()[idx] -= step
            lp, _ = scalar_graph(vp)
            lm, _ = scalar_graph(vm)
            fd = (float(lp.value) - float(lm.value)) / (2 * step)
            an = nodes[name].grad.ravel()[idx]
            denom = max(abs(fd), abs(an), 1e-8)
            assert abs(fd - an) / denom <= 1e-3, f"{name}[{idx}]: fd={fd} an={an}"
            checked += 1
    assert checked >= 100


def test_add_broadcast_unbroadcasts_gradient():
    a = ad.leaf(np.ones((3, 2)), requires_grad=True)
    b = ad.leaf(np.ones(2), requires_grad=True)
    out = ad.add(a, b)
    loss = ad.masked_mse(out, np.zeros((3, 2)), np.array([True, True]))
    ad.backward(loss)
    assert a.grad.shape == (3, 2)
    assert b.grad.shape == (2,)
    np.testing.assert_allclose(b.grad, a.grad.sum(axis=0))


def test_masked_mse_value_and_mask():
    pred = ad.leaf(np.array([[1.0, 5.0], [3.0, -2.0]]), requires_grad=True)
    target = np.array([[0.0, 100.0], [1.0, 100.0]])
    out = ad.masked_mse(pred, target, np.array([True, False]))
    # only the first column counts: ((1-0)^2 + (3-1)^2) / 2
    assert float(out.value) == pytest.approx(2.5)
    ad.backward(out)
    np.testing.assert_allclose(pred.grad[:, 1], 0.0)


def test_masked_mse_empty_mask_rejected():
    pred = ad.leaf(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ValueError):
        ad.masked_mse(pred, np.ones((2, 2)), np.array([False, False]))


def test_silu_values():
    x = ad.leaf(np.array([0.0, 100.0, -100.0]))
    y = ad.silu(x)
    np.testing.assert_allclose(y.value, [0.0, 100.0, 0.0], atol=1e-12)


def test_backward_needs_scalar():
    x = ad.leaf(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        ad.backward(ad.add(x, x))


def test_no_grad_for_constant_leaves():
    x = ad.leaf(np.ones((2, 2)))
    w = ad.leaf(np.ones((2, 2)), requires_grad=True)
    out = ad.masked_mse(ad.affine(x, w), np.zeros((2, 2)), np.array([True, True]))
    ad.backward(out)
    assert x.grad is None
    assert w.grad is not None
