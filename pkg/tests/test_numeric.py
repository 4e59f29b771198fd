import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pdn.numeric import (AdamState, Tape, TapeError, Tensor, adam_step, finite_difference_grad,
                         glorot_init, ops, relative_error, zeros_init)
from pdn.numeric.ops import SELU_ALPHA, SELU_SCALE, ShapeError


def param(data, name="x"):
    return Tensor(np.array(data, dtype=np.float64), name=name, requires_grad=True)


def tape_grad(f, *tensors):
    """Gradient of scalar f(*tensors) w.r.t. every tensor via the tape."""
    with Tape() as tape:
        loss = f(*tensors)
    grads = tape.backward(loss, {str(i): t for i, t in enumerate(tensors)})
    return [grads[str(i)] for i in range(len(tensors))]


def fd_grad(f, tensors, which, h=1e-6):
    def g(_):
        return float(f(*tensors).data)
    return finite_difference_grad(g, tensors[which].data, h)


# -- affine -------------------------------------------------------------------

def test_affine_identity():
    out = ops.affine(Tensor([1.0, 0.0]), Tensor([[1.0, 0.0], [0.0, 1.0]]), Tensor([0.0, 0.0]))
    np.testing.assert_array_equal(out.data, [1.0, 0.0])


def test_affine_by_hand():
    out = ops.affine(Tensor([1.0, 2.0]), Tensor([[3.0, 4.0]]), Tensor([5.0]))
    np.testing.assert_array_equal(out.data, [16.0])


def test_affine_shape_error_reports_both_shapes():
    with pytest.raises(ShapeError, match=r"x\(3,\).*W\(2, 2\)"):
        ops.affine(Tensor([1.0, 2.0, 3.0]), Tensor(np.eye(2)), Tensor([0.0, 0.0]))


def test_affine_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    x, W, b = param(rng.normal(size=4)), param(rng.normal(size=(3, 4))), param(rng.normal(size=3))
    f = lambda x, W, b: ops.sum_all(ops.affine(x, W, b))  # noqa: E731
    grads = tape_grad(f, x, W, b)
    for i, g in enumerate(grads):
        num = fd_grad(f, [x, W, b], i)
        assert np.max(np.abs(g - num) / np.maximum(np.abs(num), 1e-12)) < 1e-6


# -- activations --------------------------------------------------------------

def test_selu_values():
    assert ops.selu(Tensor([0.0])).data[0] == 0.0
    assert ops.selu(Tensor([1.0])).data[0] == SELU_SCALE
    assert ops.selu(Tensor([-20.0])).data[0] == pytest.approx(-1.7580993408473766, abs=1e-7)
    assert -SELU_SCALE * SELU_ALPHA == pytest.approx(-1.7580993408473766, abs=1e-15)


def test_elementwise_activations():
    np.testing.assert_array_equal(ops.relu(Tensor([-3.0, 3.0])).data, [0.0, 3.0])
    assert ops.tanh_act(Tensor([0.0])).data[0] == 0.0
    assert ops.sigmoid(Tensor([0.0])).data[0] == 0.5


@pytest.mark.parametrize("act", [ops.selu, ops.relu, ops.tanh_act, ops.sigmoid])
def test_activation_gradients(act):
    rng = np.random.default_rng(1)
    # keep away from the kinks at zero
    data = rng.uniform(0.1, 2.0, size=7) * rng.choice([-1.0, 1.0], size=7)
    x = param(data)
    f = lambda x: ops.sum_all(ops.mul(act(x), act(x)))  # noqa: E731
    (g,) = tape_grad(f, x)
    assert relative_error(g, fd_grad(f, [x], 0)) < 1e-7


def test_sigmoid_saturates_without_overflow():
    with np.errstate(all="raise"):
        out = ops.sigmoid(Tensor([-1000.0, 1000.0])).data
    np.testing.assert_array_equal(out, [0.0, 1.0])


# -- masked softmax -----------------------------------------------------------

@pytest.mark.parametrize("c", [-50.0, 0.0, 3.7, 800.0])
def test_masked_softmax_uniform(c):
    out = ops.masked_softmax(Tensor([c, c, c]), [1, 1, 1]).data
    np.testing.assert_allclose(out, [1 / 3] * 3, rtol=0, atol=1e-15)


def test_masked_softmax_single_support():
    out = ops.masked_softmax(Tensor([5.0, 1000.0]), [1, 0]).data
    np.testing.assert_array_equal(out, [1.0, 0.0])


def test_masked_softmax_by_hand():
    out = ops.masked_softmax(Tensor([0.0, math.log(3.0)]), [1, 1]).data
    np.testing.assert_allclose(out, [0.25, 0.75], atol=1e-15)


def test_masked_softmax_empty_support():
    with pytest.raises(ValueError, match="empty attention support"):
        ops.masked_softmax(Tensor([1.0, 2.0]), [0, 0])


masks = arrays(np.bool_, st.integers(1, 12)).filter(lambda m: m.any())


@settings(max_examples=200, deadline=None)
@given(mask=masks, seed=st.integers(0, 2**31 - 1), shift=st.floats(-100, 100))
def test_masked_softmax_properties(mask, seed, shift):
    logits = np.random.default_rng(seed).normal(scale=5.0, size=mask.shape)
    out = ops.masked_softmax(Tensor(logits), mask).data
    assert abs(out[mask].sum() - 1.0) < 1e-6
    assert (out[~mask] == 0.0).all()
    assert (out >= 0).all()
    shifted = ops.masked_softmax(Tensor(np.where(mask, logits + shift, logits)), mask).data
    np.testing.assert_allclose(shifted, out, atol=1e-6)


def test_masked_softmax_gradient():
    rng = np.random.default_rng(2)
    x = param(rng.normal(size=(3, 5)))
    mask = np.array([[1, 1, 0, 1, 0], [1, 0, 0, 0, 0], [1, 1, 1, 1, 1]], dtype=bool)
    w = Tensor(rng.normal(size=(3, 5)))
    f = lambda x: ops.sum_all(ops.mul(ops.masked_softmax(x, mask), w))  # noqa: E731
    (g,) = tape_grad(f, x)
    assert relative_error(g, fd_grad(f, [x], 0)) < 1e-8
    assert (g[~mask] == 0).all()


# -- dropout ------------------------------------------------------------------

def test_dropout_inference_is_identity():
    x = Tensor(np.arange(6.0))
    assert ops.dropout(x, 0.5, training=False) is x


def test_dropout_p_zero_is_identity():
    x = Tensor(np.arange(6.0))
    out = ops.dropout(x, 0.0, training=True, rng=np.random.default_rng(0))
    np.testing.assert_array_equal(out.data, x.data)


def test_dropout_preserves_expectation():
    out = ops.dropout(Tensor(np.ones(10_000)), 0.5, True, np.random.default_rng(0)).data
    assert 0.97 <= out.mean() <= 1.03
    assert set(np.unique(out)) <= {0.0, 2.0}


@pytest.mark.parametrize("p", [-0.1, 1.0, 1.5])
def test_dropout_rejects_bad_probability(p):
    with pytest.raises(ValueError):
        ops.dropout(Tensor([1.0]), p, True, np.random.default_rng(0))


def test_dropout_same_seed_same_mask():
    a = ops.dropout(Tensor(np.ones(100)), 0.3, True, np.random.default_rng(7)).data
    b = ops.dropout(Tensor(np.ones(100)), 0.3, True, np.random.default_rng(7)).data
    assert a.tobytes() == b.tobytes()


# -- cross entropy ------------------------------------------------------------

def test_cross_entropy_values():
    assert float(ops.cross_entropy(Tensor([1.0, 0.0, 0.0]), 0).data) == pytest.approx(0.0, abs=1e-11)
    for label in range(3):
        assert float(ops.cross_entropy(Tensor([1 / 3] * 3), label).data) == pytest.approx(
            1.0986123, abs=1e-7)
    assert float(ops.cross_entropy(Tensor([0.25, 0.75]), 1).data) == pytest.approx(0.2876821, abs=1e-7)


def test_cross_entropy_label_out_of_range():
    with pytest.raises(ValueError, match="out of range"):
        ops.cross_entropy(Tensor([0.5, 0.5]), 2)


def test_cross_entropy_through_softmax_gradient():
    rng = np.random.default_rng(3)
    z = param(rng.normal(size=(4, 3)))
    labels = np.array([0, 2, 1, 2])
    f = lambda z: ops.cross_entropy(ops.softmax(z), labels)  # noqa: E731
    (g,) = tape_grad(f, z)
    # closed form for mean softmax cross-entropy
    p = np.exp(z.data) / np.exp(z.data).sum(axis=1, keepdims=True)
    onehot = np.eye(3)[labels]
    np.testing.assert_allclose(g, (p - onehot) / 4, atol=1e-10)


# -- tape / backward ----------------------------------------------------------

def test_backward_sum_gives_ones():
    x = param(np.random.default_rng(4).normal(size=(2, 3)))
    (g,) = tape_grad(ops.sum_all, x)
    np.testing.assert_array_equal(g, np.ones((2, 3)))


def test_backward_square():
    x = param([1.0, 2.0, 3.0])
    (g,) = tape_grad(lambda x: ops.sum_all(ops.mul(x, x)), x)
    np.testing.assert_array_equal(g, [2.0, 4.0, 6.0])


def test_untouched_parameter_gets_zero_gradient():
    x, unused = param([1.0, 2.0]), param(np.ones((2, 2)), "unused")
    with Tape() as tape:
        loss = ops.sum_all(x)
    grads = tape.backward(loss, {"x": x, "unused": unused})
    np.testing.assert_array_equal(grads["unused"], np.zeros((2, 2)))


def test_tape_consumed_twice_fails():
    x = param([1.0])
    with Tape() as tape:
        loss = ops.sum_all(x)
    tape.backward(loss, {"x": x})
    with pytest.raises(TapeError):
        tape.backward(loss, {"x": x})


def test_tape_replays_in_reverse_order():
    x = param([0.5, -0.2])
    with Tape() as tape:
        loss = ops.sum_all(ops.tanh_act(ops.selu(ops.mul(x, x))))
    n = len(tape)
    order = []
    tape.backward(loss, {"x": x}, trace=order)
    assert order == list(range(n - 1, -1, -1))


def test_gradient_accumulates_over_multiple_uses():
    x = param([1.5, -2.0])
    # x used three times: x*x + x
    (g,) = tape_grad(lambda x: ops.sum_all(ops.add(ops.mul(x, x), x)), x)
    np.testing.assert_array_equal(g, 2 * x.data + 1)


def test_no_tape_means_no_recording():
    x = param([1.0])
    out = ops.selu(x)
    assert out.requires_grad and out.data[0] == SELU_SCALE


# -- finite differences -------------------------------------------------------

def test_finite_difference_of_sum():
    x = np.random.default_rng(5).normal(size=(3, 2))
    np.testing.assert_allclose(finite_difference_grad(lambda a: a.sum(), x, 1e-5), 1.0, atol=1e-9)


def test_finite_difference_of_square():
    g = finite_difference_grad(lambda a: float(a[0] ** 2), np.array([3.0]), 1e-5)
    assert g[0] == pytest.approx(6.0, abs=1e-8)


def test_finite_difference_agrees_with_tape_on_affine_selu():
    rng = np.random.default_rng(6)
    x, W, b = param(rng.normal(size=(2, 5))), param(rng.normal(size=(4, 5))), param(rng.normal(size=4))
    f = lambda x, W, b: ops.sum_all(ops.selu(ops.affine(x, W, b)))  # noqa: E731
    for i, g in enumerate(tape_grad(f, x, W, b)):
        assert relative_error(g, fd_grad(f, [x, W, b], i)) < 1e-6


def test_finite_difference_requires_positive_step():
    with pytest.raises(ValueError):
        finite_difference_grad(lambda a: a.sum(), np.ones(2), 0.0)


# -- sequence ops -------------------------------------------------------------

def _lstm_setup(seed, B=2, n=4, D=3, H=5):
    rng = np.random.default_rng(seed)
    return (param(rng.normal(size=(B, n, D))), param(rng.normal(size=(4 * H, D)) * 0.5),
            param(rng.normal(size=(4 * H, H)) * 0.5), param(rng.normal(size=4 * H) * 0.5))


def test_lstm_gradient_all_inputs():
    tensors = _lstm_setup(7)
    w = Tensor(np.random.default_rng(8).normal(size=(2, 4, 5)))
    f = lambda *t: ops.sum_all(ops.mul(ops.lstm(*t), w))  # noqa: E731
    for i, g in enumerate(tape_grad(f, *tensors)):
        assert relative_error(g, fd_grad(f, list(tensors), i)) < 1e-7


def test_lstm_matches_stepwise_reference():
    x, W_ih, W_hh, b = _lstm_setup(9)
    H = W_hh.data.shape[1]
    out = ops.lstm(x, W_ih, W_hh, b).data
    sig = lambda z: 1 / (1 + np.exp(-z))  # noqa: E731
    h = np.zeros((2, H))
    c = np.zeros((2, H))
    for t in range(x.data.shape[1]):
        a = x.data[:, t] @ W_ih.data.T + h @ W_hh.data.T + b.data
        i, f, g, o = sig(a[:, :H]), sig(a[:, H:2 * H]), np.tanh(a[:, 2 * H:3 * H]), sig(a[:, 3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        np.testing.assert_allclose(out[:, t], h, atol=1e-12)


def test_weighted_sum_and_scale_steps_gradients():
    rng = np.random.default_rng(10)
    h, alpha = param(rng.normal(size=(2, 4, 3))), param(rng.normal(size=(2, 4)))
    d = rng.uniform(0.1, 1.0, size=(2, 4))
    f = lambda h, a: ops.sum_all(ops.weighted_sum(a, ops.scale_steps(h, d)))  # noqa: E731
    for i, g in enumerate(tape_grad(f, h, alpha)):
        assert relative_error(g, fd_grad(f, [h, alpha], i)) < 1e-8


def test_embedding_gradient_accumulates_repeated_ids():
    table = param(np.zeros((4, 2)))
    ids = np.array([[1, 1, 3]])
    (g,) = tape_grad(lambda t: ops.sum_all(ops.embedding(t, ids)), table)
    np.testing.assert_array_equal(g, [[0, 0], [2, 2], [0, 0], [1, 1]])


# -- Adam ---------------------------------------------------------------------

def test_adam_zero_gradient_leaves_params():
    p = {"w": param([1.0, -2.0])}
    before = p["w"].data.copy()
    state = adam_step(p, {"w": np.zeros(2)}, AdamState())
    np.testing.assert_array_equal(p["w"].data, before)
    assert state.t == 1


def test_adam_first_step_by_hand():
    p = {"w": param([0.0])}
    adam_step(p, {"w": np.array([1.0])}, AdamState())
    assert p["w"].data[0] == pytest.approx(-0.001 / (1 + 1e-8), abs=1e-15)
    assert p["w"].data[0] == pytest.approx(-0.000999999990, abs=1e-14)


def test_adam_symmetric_params_stay_identical():
    rng = np.random.default_rng(11)
    p = {"a": param([0.3]), "b": param([0.3])}
    state = AdamState()
    for _ in range(25):
        g = rng.normal(size=1)
        adam_step(p, {"a": g, "b": g.copy()}, state)
        assert p["a"].data.tobytes() == p["b"].data.tobytes()
    assert state.t == 25


def test_adam_shape_mismatch():
    with pytest.raises(ValueError, match="dims"):
        adam_step({"w": param([1.0, 2.0])}, {"w": np.zeros(3)}, AdamState())


def test_adam_state_shapes_follow_params():
    p = {"w": param(np.ones((2, 3)))}
    state = adam_step(p, {"w": np.ones((2, 3))}, AdamState())
    assert state.m["w"].shape == state.v["w"].shape == (2, 3)


# -- init ---------------------------------------------------------------------

def test_zeros_init():
    np.testing.assert_array_equal(zeros_init([2, 3]).data, np.zeros((2, 3)))


def test_glorot_bound():
    t = glorot_init([100, 100], np.random.default_rng(0))
    assert np.abs(t.data).max() <= math.sqrt(6 / 200)
    assert math.sqrt(6 / 200) == pytest.approx(0.17321, abs=1e-5)


def test_glorot_deterministic():
    a = glorot_init([5, 7], np.random.default_rng(42)).data
    b = glorot_init([5, 7], np.random.default_rng(42)).data
    assert a.tobytes() == b.tobytes()


# -- gradient soundness property ----------------------------------------------

@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), rows=st.integers(1, 4), d_in=st.integers(1, 5),
       d_out=st.integers(1, 5))
def test_random_composite_gradient_soundness(seed, rows, d_in, d_out):
    rng = np.random.default_rng(seed)
    x = param(rng.normal(size=(rows, d_in)))
    W = param(rng.normal(size=(d_out, d_in)))
    b = param(rng.normal(size=d_out))
    v = param(rng.normal(size=d_out))
    mask = np.ones(rows, dtype=bool)

    def f(x, W, b, v):
        hidden = ops.tanh_act(ops.selu(ops.affine(x, W, b)))
        alpha = ops.masked_softmax(ops.matvec(hidden, v), mask)
        pooled = ops.weighted_sum(alpha, ops.sigmoid(hidden))
        return ops.cross_entropy(ops.softmax(pooled), 0)

    tensors = [x, W, b, v]
    for i, g in enumerate(tape_grad(f, *tensors)):
        num = fd_grad(f, tensors, i, h=1e-5)
        assert relative_error(g, num) < 1e-4
        assert np.isfinite(g).all()
