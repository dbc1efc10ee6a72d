"""Gradient checks for every primitive against central finite differences.

The oracle perturbs one input entry at a time with h=1e-5 and compares the
symmetric difference quotient to the autodiff gradient. Relative error must
stay at or below 1e-4 on random small tensors.
"""

import numpy as np
import pytest

from oncotwin.nn import autodiff as ad
from oncotwin.nn.autodiff import Tensor


def rel_err(a, b):
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1.0)
    return np.max(np.abs(a - b) / denom)


def check_grad(build, x0, h=1e-5, tol=1e-4):
    """build(Tensor) -> scalar Tensor; compares grads at x0."""
    x = Tensor(x0.copy(), requires_grad=True)
    out = build(x)
    out.backward()
    numeric = ad.gradients_finite(lambda a: build(Tensor(a)).item(), x0, h=h)
    assert rel_err(x.grad, numeric) <= tol


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def test_add_broadcast_grad(rng):
    y = rng.normal(size=(1, 4))
    w = rng.normal(size=(3, 4))
    check_grad(lambda x: ad.sum_((x + Tensor(y)) * Tensor(w)),
               rng.normal(size=(3, 4)))


def test_mul_div_grad(rng):
    b = rng.normal(size=(3, 4)) + 3.0
    check_grad(lambda x: ad.sum_(x * Tensor(b) / (x * x + 1.0)), rng.normal(size=(3, 4)))


def test_power_grad(rng):
    check_grad(lambda x: ad.sum_(x**3), rng.normal(size=(2, 3)))


def test_matmul_grad(rng):
    b = rng.normal(size=(4, 2))
    check_grad(lambda x: ad.sum_(ad.matmul(x, Tensor(b)) ** 2), rng.normal(size=(3, 4)))


def test_relu_grad(rng):
    # keep away from the kink at 0 where the subgradient is arbitrary
    x0 = rng.normal(size=(3, 4))
    x0[np.abs(x0) < 0.05] = 0.1
    check_grad(lambda x: ad.sum_(ad.relu(x) * 2.0), x0)


def test_sigmoid_tanh_exp_log_sqrt_grads(rng):
    check_grad(lambda x: ad.sum_(ad.sigmoid(x)), rng.normal(size=(3, 3)))
    check_grad(lambda x: ad.sum_(ad.tanh(x)), rng.normal(size=(3, 3)))
    check_grad(lambda x: ad.sum_(ad.exp(x)), rng.normal(size=(3, 3)))
    check_grad(lambda x: ad.sum_(ad.log(x)), rng.uniform(0.5, 3.0, size=(3, 3)))
    check_grad(lambda x: ad.sum_(ad.sqrt(x)), rng.uniform(0.5, 3.0, size=(3, 3)))


def test_erf_softplus_grads(rng):
    check_grad(lambda x: ad.sum_(ad.erf(x)), rng.normal(size=(4,)).reshape(1, 4))
    check_grad(lambda x: ad.sum_(ad.softplus(x) ** 2), rng.normal(size=(3, 3)))


def test_softmax_grad(rng):
    w = rng.normal(size=(2, 5))
    check_grad(lambda x: ad.sum_(ad.softmax(x, axis=-1) * Tensor(w)),
               rng.normal(size=(2, 5)))


def test_log_softmax_grad(rng):
    w = rng.normal(size=(2, 5))
    check_grad(lambda x: ad.sum_(ad.log_softmax(x, axis=-1) * Tensor(w)),
               rng.normal(size=(2, 5)))


def test_logsumexp_grad(rng):
    check_grad(lambda x: ad.sum_(ad.logsumexp(x, axis=-1)), rng.normal(size=(3, 4)))


def test_mean_narrow_concat_transpose_reshape_grads(rng):
    w = rng.normal(size=(4, 3))
    check_grad(lambda x: ad.sum_(ad.transpose(x) * Tensor(w)), rng.normal(size=(3, 4)))
    check_grad(lambda x: ad.mean(ad.narrow(x, 1, 1, 2) ** 2), rng.normal(size=(3, 4)))
    check_grad(
        lambda x: ad.sum_(ad.concat([x, x * 2.0], axis=1) ** 2),
        rng.normal(size=(3, 2)),
    )
    check_grad(lambda x: ad.sum_(ad.reshape(x, (6,)) ** 2), rng.normal(size=(2, 3)))


def test_clip_min_grad(rng):
    x0 = rng.normal(size=(3, 4))
    x0[np.abs(x0 - 0.2) < 0.05] = 0.4
    check_grad(lambda x: ad.sum_(ad.clip_min(x, 0.2) ** 2), x0)


def test_attention_grad(rng):
    k = rng.normal(size=(5, 4))
    v = rng.normal(size=(5, 4))
    check_grad(
        lambda x: ad.sum_(ad.scaled_dot_attention(x, Tensor(k), Tensor(v), heads=2)),
        rng.normal(size=(2, 4)),
    )


def test_two_layer_mlp_grad_all_parameters(rng):
    """Random 2-layer MLP: every parameter gradient vs finite differences."""
    x = rng.normal(size=(6, 5))
    w1_0 = rng.normal(size=(5, 8)) * 0.5
    b1_0 = rng.normal(size=(8,)) * 0.1
    w2_0 = rng.normal(size=(8, 1)) * 0.5

    def loss_np(w1d, b1d, w2d):
        h = np.maximum(x @ w1d + b1d, 0.0)
        return float(np.sum(1.0 / (1.0 + np.exp(-(h @ w2d)))))

    w1 = Tensor(w1_0, requires_grad=True)
    b1 = Tensor(b1_0, requires_grad=True)
    w2 = Tensor(w2_0, requires_grad=True)
    out = ad.sum_(ad.sigmoid(ad.matmul(ad.relu(ad.matmul(Tensor(x), w1) + b1), w2)))
    out.backward()

    num_w1 = ad.gradients_finite(lambda a: loss_np(a, b1_0, w2_0), w1_0.copy())
    num_b1 = ad.gradients_finite(lambda a: loss_np(w1_0, a, w2_0), b1_0.copy())
    num_w2 = ad.gradients_finite(lambda a: loss_np(w1_0, b1_0, a), w2_0.copy())
    assert rel_err(w1.grad, num_w1) <= 1e-4
    assert rel_err(b1.grad, num_b1) <= 1e-4
    assert rel_err(w2.grad, num_w2) <= 1e-4


def test_scalar_examples():
    # f(x) = x^2 at x=3 -> 6
    x = Tensor([3.0], requires_grad=True)
    (x**2).backward()
    assert np.allclose(x.grad, [6.0])
    # sigmoid'(0) = 1/4
    x = Tensor([0.0], requires_grad=True)
    ad.sigmoid(x).backward()
    assert np.allclose(x.grad, [0.25])


def test_forward_examples():
    w = Tensor([[2.0]])
    out = ad.matmul(Tensor([[3.0]]), w) + Tensor([0.0])
    assert np.allclose(out.data, [[6.0]])
    assert np.allclose(ad.relu(Tensor([-1.0, 2.0])).data, [0.0, 2.0])
    assert np.allclose(ad.softmax(Tensor([[0.0, 0.0]])).data, [[0.5, 0.5]])


def test_reused_node_accumulates():
    x = Tensor([2.0], requires_grad=True)
    y = x * x + x * 3.0  # dy/dx = 2x + 3 = 7
    y.backward()
    assert np.allclose(x.grad, [7.0])


def test_shape_mismatch_named():
    with pytest.raises(ad.ShapeError, match="matmul"):
        ad.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))
    with pytest.raises(ad.ShapeError, match="add"):
        Tensor(np.zeros((2, 3))) + Tensor(np.zeros((4, 5)))


def test_backward_gradient_shape_check():
    x = Tensor(np.zeros((2, 2)), requires_grad=True)
    with pytest.raises(ad.ShapeError, match="backward"):
        (x * 2.0).backward(np.zeros((3, 3)))


def test_no_grad_blocks_graph():
    x = Tensor([1.0], requires_grad=True)
    with ad.no_grad():
        y = x * 2.0
    y.backward()
    assert x.grad is None


def test_dropout_expectation():
    """Inverted dropout: mean over many masks matches identity within 2%."""
    rng = np.random.default_rng(0)
    x = Tensor(rng.uniform(1.0, 2.0, size=(4, 8)))
    acc = np.zeros((4, 8))
    n = 20000
    for _ in range(n):
        acc += ad.dropout(x, 0.5, rng, training=True).data
    assert np.max(np.abs(acc / n - x.data) / x.data) < 0.02


def test_dropout_eval_identity_and_seed_determinism():
    x = Tensor(np.ones((3, 3)))
    assert ad.dropout(x, 0.5, np.random.default_rng(1), training=False) is x
    a = ad.dropout(x, 0.5, np.random.default_rng(5), training=True).data
    b = ad.dropout(x, 0.5, np.random.default_rng(5), training=True).data
    assert np.array_equal(a, b)


def test_attention_trivial_cases():
    q = Tensor([[1.0, 2.0]])
    v = Tensor([[5.0, -3.0]])
    out = ad.scaled_dot_attention(q, q, v, heads=1)
    assert np.allclose(out.data, v.data)

    keys = Tensor([[1.0, 2.0], [1.0, 2.0]])
    values = Tensor([[2.0, 0.0], [0.0, 4.0]])
    out = ad.scaled_dot_attention(q, keys, values, heads=1)
    assert np.allclose(out.data, [[1.0, 2.0]])


def test_attention_rows_sum_to_one():
    rng = np.random.default_rng(3)
    q = Tensor(rng.normal(size=(4, 8)))
    k = Tensor(rng.normal(size=(6, 8)))
    v = Tensor(rng.normal(size=(6, 8)))
    _, weights = ad.scaled_dot_attention(q, k, v, heads=4, return_weights=True)
    for w in weights:
        assert np.allclose(w.data.sum(axis=-1), 1.0, atol=1e-12)


def test_attention_head_divisibility_error():
    q = Tensor(np.zeros((1, 6)))
    with pytest.raises(ad.ConfigError):
        ad.scaled_dot_attention(q, q, q, heads=4)
