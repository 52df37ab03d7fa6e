import numpy as np
import pytest

from _cases import LOSS_CASES, op_cases
from eeg_affect import autodiff as ad
from eeg_affect.autodiff import Parameter, Tensor, backward, grad_check
from eeg_affect.errors import NonScalarLoss, ShapeMismatch

CASES = op_cases()


@pytest.mark.parametrize("name", sorted(CASES))
def test_op_gradients(name):
    f, params, exclude = CASES[name](np.random.default_rng(abs(hash(name)) % 2**32))
    tol = 1e-5 if name in LOSS_CASES else 1e-4
    assert grad_check(f, params, exclude=exclude) < tol


def test_forward_examples(rng):
    np.testing.assert_allclose(ad.softmax(Tensor(np.zeros(3))).data, [1 / 3] * 3)
    a = Tensor(rng.normal(size=(3, 4)))
    assert ad.dropout(a, 0.0, True) is a
    assert ad.dropout(a, 0.3, False) is a
    A = rng.normal(size=(3, 5))
    np.testing.assert_array_equal((Tensor(np.eye(3)) @ Tensor(A)).data, A)


def test_dropout_statistics():
    a = Tensor(np.ones((200, 200)))
    out = ad.dropout(a, 0.3, True, np.random.default_rng(0)).data
    assert set(np.unique(out)) <= {0.0, 1 / 0.7}
    assert abs((out == 0).mean() - 0.3) < 0.01
    with pytest.raises(ValueError):
        ad.dropout(a, 1.0, True)


def test_backward_examples():
    x = Parameter(np.array([1.0, 2.0, 3.0]))
    backward((x * x).sum())
    np.testing.assert_array_equal(x.grad, [2, 4, 6])

    w = Parameter(np.array([0.3, -0.2]))
    v = np.array([1.5, 2.0])
    backward((ad.sigmoid(w) * v).sum())
    once = w.grad.copy()
    w.zero_grad()
    s = ad.sigmoid(w) * v
    backward((s + s).sum())
    np.testing.assert_allclose(w.grad, 2 * once)


def test_gradients_accumulate_until_zeroed():
    x = Parameter(np.array([1.0, -1.0]))
    backward((x * 3.0).sum())
    backward((x * 3.0).sum())
    np.testing.assert_array_equal(x.grad, [6.0, 6.0])
    ad.zero_grad([x])
    np.testing.assert_array_equal(x.grad, [0.0, 0.0])


def test_errors():
    x = Parameter(np.ones(3))
    with pytest.raises(NonScalarLoss):
        backward(x * 2.0)
    with pytest.raises(ShapeMismatch, match=r"\(2, 3\).*\(4,\)"):
        ad.add(Tensor(np.ones((2, 3))), Tensor(np.ones(4)))
    with pytest.raises(ShapeMismatch):
        ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeMismatch):
        ad.cross_entropy(Tensor(np.ones((2, 3))), [0])


def test_stable_losses():
    ce = ad.cross_entropy(Tensor(np.array([[1000.0, 0.0]])), [0])
    assert np.isfinite(ce.data) and abs(float(ce.data)) < 1e-12
    bce = ad.bce_with_logits(Tensor(np.array([[0.0]])), [[1]])
    assert np.isclose(float(bce.data), np.log(2))
    big = ad.bce_with_logits(Tensor(np.array([[800.0, -800.0]])), [[1, 0]])
    assert float(big.data) == 0.0


def test_replay_and_determinism(rng):
    w = Parameter(rng.normal(size=(4, 3)))
    x = rng.normal(size=(2, 4))

    def f():
        return ad.log_softmax(Tensor(x) @ w).sum()

    a, b = f(), f()
    assert float(a.data) == float(b.data)
    backward(a)
    g1 = w.grad.copy()
    w.zero_grad()
    backward(b)
    np.testing.assert_array_equal(g1, w.grad)


def test_debug_mode_catches_non_finite():
    ad.set_debug(True)
    try:
        with np.errstate(invalid="ignore"), pytest.raises(FloatingPointError):
            ad.log(Tensor(np.array([-1.0])))
    finally:
        ad.set_debug(False)


def test_grad_check_reports_wrong_gradient():
    a = Parameter(np.array([0.5, 1.5]))

    def bad():
        out = a * a
        # wrong backward: claims d/da = 1
        return Tensor(out.data.sum(), (a,), lambda g: (g * np.ones_like(a.data),))

    assert grad_check(bad, [a]) > 0.1
