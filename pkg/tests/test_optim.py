"""Adam optimizer contracts: first-step magnitude, convergence, NaN guard."""

import numpy as np
import pytest

from oncotwin.nn.autodiff import GradientError, Tensor
from oncotwin.nn.optim import Adam


def test_zero_gradient_leaves_parameters():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    opt = Adam([p], lr=0.1)
    p.grad = np.zeros(2)
    before = p.data.copy()
    opt.step()
    assert np.array_equal(p.data, before)


def test_first_step_magnitude_is_lr_times_sign():
    p = Tensor(np.array([0.0, 0.0]), requires_grad=True)
    opt = Adam([p], lr=0.05)
    p.grad = np.array([3.0, -0.001])
    opt.step()
    # after bias correction the first update is lr*g/(|g|+eps') ~ lr*sign(g)
    assert np.allclose(p.data, [-0.05, 0.05], atol=1e-4)


def test_quadratic_convergence():
    w = Tensor(np.array([0.0]), requires_grad=True)
    opt = Adam([w], lr=0.1)
    for _ in range(200):
        opt.zero_grad()
        loss = (w - 5.0) ** 2
        loss.backward()
        opt.step()
    assert abs(w.data[0] - 5.0) < 0.1


def test_nan_gradient_names_parameter():
    p = Tensor(np.array([1.0]), requires_grad=True)
    opt = Adam([p], names=["encoder.weight"])
    p.grad = np.array([np.nan])
    with pytest.raises(GradientError, match="encoder.weight"):
        opt.step()


def test_determinism_of_schedule():
    def run():
        rng = np.random.default_rng(42)
        w = Tensor(rng.normal(size=(3, 3)), requires_grad=True)
        opt = Adam([w], lr=1e-2)
        x = Tensor(rng.normal(size=(5, 3)))
        for _ in range(25):
            opt.zero_grad()
            from oncotwin.nn import autodiff as ad

            loss = ad.sum_((ad.matmul(x, w)) ** 2)
            loss.backward()
            opt.step()
        return w.data.copy()

    assert np.array_equal(run(), run())
