import zlib

import numpy as np
import pytest

from autosmote import gradcore as gc

from gradcheck import numeric_grad, rel_error


def test_relu_value_and_grad():
    x = gc.parameter([[-1.0, 2.0]])
    y = gc.relu(x)
    assert y.value.tolist() == [[0.0, 2.0]]
    gc.backward(gc.total(y))
    assert x.grad.tolist() == [[0.0, 1.0]]


def test_softmax_symmetric():
    assert gc.softmax_rows([[0.0, 0.0]]).value.tolist() == [[0.5, 0.5]]


def test_sum_of_parameters_gives_ones():
    p = gc.parameter(np.arange(6.0).reshape(2, 3))
    gc.backward(gc.total(p))
    np.testing.assert_array_equal(p.grad, np.ones((2, 3)))


def test_diamond_accumulates():
    p = gc.parameter([[3.0]])
    loss = gc.add(gc.scalar_mul(p, 2.0), gc.hadamard(p, p))  # 2p + p^2
    gc.backward(loss)
    assert p.grad[0, 0] == 2.0 + 2 * 3.0


def test_backward_twice_doubles():
    p = gc.parameter([[1.0, -2.0]])
    loss = gc.total(gc.hadamard(p, p))
    gc.backward(loss)
    first = p.grad.copy()
    gc.backward(loss)
    np.testing.assert_array_equal(p.grad, 2 * first)


def test_non_scalar_loss_rejected():
    with pytest.raises(gc.ShapeError):
        gc.backward(gc.parameter(np.ones((2, 2))))


def test_shape_mismatch():
    with pytest.raises(gc.ShapeError):
        gc.matmul(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(gc.ShapeError):
        gc.add(np.ones((2, 3)), np.ones((3, 2)))
    with pytest.raises(gc.ShapeError):
        gc.concat_rows(np.ones((1, 2)), np.ones((1, 3)))


def test_log_of_non_positive():
    with pytest.raises(FloatingPointError):
        gc.log([[0.0, 1.0]])


def test_detach_and_straight_through():
    p = gc.parameter([[1.0, 2.0]])
    d = gc.detach(p)
    assert not d.requires_grad
    st_node = gc.straight_through(gc.constant([[5.0, 6.0]]), gc.scalar_mul(p, 3.0))
    assert st_node.value.tolist() == [[5.0, 6.0]]
    gc.backward(gc.total(st_node))
    assert p.grad.tolist() == [[3.0, 3.0]]


def _random_case(op, rng):
    """Returns (parameters, builder) where builder() -> scalar Node."""
    n, m, f = rng.integers(1, 5, size=3)
    r = lambda *s: rng.normal(size=s)  # noqa: E731
    proj = r(n, m)  # random projection makes the scalar loss sensitive to every entry
    if op == "matmul":
        a, b = gc.parameter(r(n, f)), gc.parameter(r(f, m))
        return [a, b], lambda: gc.total(gc.hadamard(gc.matmul(a, b), proj))
    if op in ("add", "sub", "hadamard", "divide"):
        a = gc.parameter(r(n, m))
        shape = [(n, m), (1, m), (n, 1)][rng.integers(3)]
        b = gc.parameter(r(*shape) if op != "divide" else rng.uniform(0.5, 2.0, size=shape))
        fn = getattr(gc, op)
        return [a, b], lambda: gc.total(gc.hadamard(fn(a, b), proj))
    if op == "scalar_mul":
        a = gc.parameter(r(n, m))
        return [a], lambda: gc.total(gc.hadamard(gc.scalar_mul(a, 1.7), proj))
    if op == "relu":
        # keep entries away from the kink
        v = r(n, m)
        v = np.where(np.abs(v) < 0.05, 0.3, v)
        a = gc.parameter(v)
        return [a], lambda: gc.total(gc.hadamard(gc.relu(a), proj))
    if op == "softmax_rows":
        a = gc.parameter(r(n, m))
        return [a], lambda: gc.total(gc.hadamard(gc.softmax_rows(a), proj))
    if op == "log":
        a = gc.parameter(rng.uniform(0.5, 3.0, size=(n, m)))
        return [a], lambda: gc.total(gc.hadamard(gc.log(a), proj))
    if op == "exp":
        a = gc.parameter(r(n, m))
        return [a], lambda: gc.total(gc.hadamard(gc.exp(a), proj))
    if op == "concat_rows":
        a, b = gc.parameter(r(n, m)), gc.parameter(r(f, m))
        p2 = r(n + f, m)
        return [a, b], lambda: gc.total(gc.hadamard(gc.concat_rows(a, b), p2))
    if op == "take_cols":
        a = gc.parameter(r(n, m))
        cols = rng.integers(m, size=3)
        p2 = r(n, 3)
        return [a], lambda: gc.total(gc.hadamard(gc.take_cols(a, cols), p2))
    if op == "pick":
        a = gc.parameter(r(n, m))
        idx = rng.integers(m, size=n)
        p2 = r(n, 1)
        return [a], lambda: gc.total(gc.hadamard(gc.pick(a, idx), p2))
    if op == "mix":
        w = gc.parameter(r(n, m))
        cand = r(n, m, f)
        p2 = r(n, f)
        return [w], lambda: gc.total(gc.hadamard(gc.mix(w, cand), p2))
    if op == "mean":
        a = gc.parameter(r(n, m))
        return [a], lambda: gc.mean(gc.hadamard(a, a))
    raise AssertionError(op)


OPS = ["matmul", "add", "sub", "hadamard", "divide", "scalar_mul", "relu", "softmax_rows",
       "log", "exp", "concat_rows", "take_cols", "pick", "mix", "mean"]


@pytest.mark.parametrize("op", OPS)
def test_op_gradients_match_finite_differences(op):
    rng = np.random.default_rng(zlib.crc32(op.encode()))
    for _ in range(8):
        params, build = _random_case(op, rng)
        loss = build()
        gc.backward(loss)
        for p in params:
            num = numeric_grad(lambda: float(build().value[0, 0]), p.value)
            assert rel_error(p.grad, num) < 1e-3, op


def test_matmul_specific_instance():
    rng = np.random.default_rng(0)
    a, b = gc.parameter(rng.normal(size=(3, 4))), gc.parameter(rng.normal(size=(4, 2)))
    proj = rng.normal(size=(3, 2))
    build = lambda: gc.total(gc.hadamard(gc.matmul(a, b), proj))  # noqa: E731
    gc.backward(build())
    for p in (a, b):
        assert rel_error(p.grad, numeric_grad(lambda: float(build().value[0, 0]), p.value)) < 1e-4


def test_adam_zero_gradient_is_fixed_point():
    p = gc.parameter([[1.0, -2.0]])
    opt = gc.Adam([p], lr=0.05)
    opt.step()
    assert p.value.tolist() == [[1.0, -2.0]]


def test_adam_first_step_magnitude():
    # step 1: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps)
    p = gc.parameter([[0.0, 0.0]])
    opt = gc.Adam([p], lr=0.05)
    p.grad = np.array([[3.0, -0.2]])
    opt.step()
    expected = -0.05 * np.array([3.0, -0.2]) / (np.abs([3.0, -0.2]) + 1e-8)
    np.testing.assert_allclose(p.value[0], expected, rtol=1e-12)
    assert np.all(p.grad == 0)


def test_adam_quadratic_bowl():
    w = gc.parameter([[1.0]])
    opt = gc.Adam([w], lr=0.05)
    for _ in range(500):
        gc.backward(gc.hadamard(w, w))
        opt.step()
    assert abs(w.value[0, 0]) < 1e-2


def test_adam_step_counter_increases():
    p = gc.parameter([[1.0]])
    opt = gc.Adam([p])
    for t in range(1, 4):
        opt.step()
        assert opt.t == t
        assert opt.m[0].shape == p.value.shape


def test_finite_inputs_never_produce_nan():
    rng = np.random.default_rng(1)
    for _ in range(100):
        x = gc.parameter(rng.normal(scale=50, size=(4, 5)))
        out = gc.softmax_rows(gc.relu(gc.matmul(x, rng.normal(size=(5, 3)))))
        assert np.all(np.isfinite(out.value))
