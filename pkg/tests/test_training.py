import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from eeg_affect import autodiff as ad
from eeg_affect.autodiff import Parameter, Tensor, grad_check
from eeg_affect.errors import ConfigError, DivergedLoss
from eeg_affect.models import SequenceModel, SequenceModelConfig
from eeg_affect.training import (
    EpochLog,
    OptimizerState,
    TrainConfig,
    adamw_step,
    adamw_update,
    clip_gradients,
    cosine_warmup_lr,
    fit,
    global_norm,
    head_dim,
    loss_bce,
    loss_ce,
    predict_from_logits,
    task_loss,
    write_epoch_csv,
)


def adam_oracle(theta, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Plain scalar-loop Adam."""
    theta = list(theta)
    m = [0.0] * len(theta)
    v = [0.0] * len(theta)
    for t, g in enumerate(grads, start=1):
        for i in range(len(theta)):
            m[i] = b1 * m[i] + (1 - b1) * g[i]
            v[i] = b2 * v[i] + (1 - b2) * g[i] ** 2
            mh = m[i] / (1 - b1 ** t)
            vh = v[i] / (1 - b2 ** t)
            theta[i] -= lr * mh / (math.sqrt(vh) + eps)
    return theta


def test_losses():
    assert abs(float(loss_ce(Tensor(np.array([[1000.0, 0.0]])), [0]).data)) < 1e-12
    assert np.isclose(float(loss_bce(Tensor(np.array([[0.0]])), [[1]]).data), math.log(2))


def test_binary_loss_is_sigmoid_ce(rng):
    z = rng.normal(size=(6, 1))
    y = rng.integers(0, 2, size=6)
    got = float(task_loss(Tensor(z), y, "binary").data)
    p = 1 / (1 + np.exp(-z[:, 0]))
    assert np.isclose(got, -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


@pytest.mark.parametrize("task, mode", [("binary", "bce"), ("categorical", "bce"), ("multilabel", "bce"),
                                        ("multilabel", "group_ce")])
def test_task_loss_gradients(rng, task, mode):
    B = 3
    z = Parameter(rng.normal(size=(5, head_dim(task, B))))
    if task == "multilabel":
        y = rng.integers(0, B, size=(5, 4))
    else:
        y = rng.integers(0, 2 if task == "binary" else 4, size=5)
    assert grad_check(lambda: task_loss(z, y, task, B, mode), [z]) < 1e-5


def test_predict_from_logits():
    assert predict_from_logits(np.array([[0.3], [-0.1], [0.0]]), "binary").tolist() == [1, 0, 0]
    z = np.zeros((1, 8))
    z[0, [1, 2, 4, 7]] = 1
    assert predict_from_logits(z, "multilabel", 2).tolist() == [[1, 0, 0, 1]]


def test_adamw_first_step():
    theta, m, v = adamw_update(np.array([0.0]), np.array([1.0]), np.zeros(1), np.zeros(1), 1, 0.005,
                               weight_decay=1e-4)
    assert np.isclose(theta[0], -0.005, rtol=1e-7)


def test_adamw_without_decay_is_adam(rng):
    grads = rng.normal(size=(100, 3))
    theta = rng.normal(size=3)
    p = Parameter(theta.copy())
    cfg = TrainConfig(weight_decay=0.0, dtype="float64")
    state = OptimizerState.for_params([p])
    for g in grads:
        p.grad = g.copy()
        adamw_step([p], state, 0.01, cfg)
    np.testing.assert_allclose(p.data, adam_oracle(theta, grads, 0.01), rtol=1e-12, atol=1e-14)


def test_pure_decay_never_crosses_zero():
    cfg = TrainConfig(weight_decay=0.5, dtype="float64")
    p = Parameter(np.array([2.0, -3.0]))
    state = OptimizerState.for_params([p])
    prev = np.abs(p.data)
    for _ in range(50):
        p.grad = np.zeros(2)
        adamw_step([p], state, 0.1, cfg)
        assert (np.sign(p.data) == [1, -1]).all()
        assert (np.abs(p.data) < prev).all()
        prev = np.abs(p.data)
    np.testing.assert_allclose(p.data, [2.0 * 0.95 ** 50, -3.0 * 0.95 ** 50])


def test_bias_skips_decay():
    cfg = TrainConfig(weight_decay=0.5, dtype="float64")
    b = Parameter(np.array([1.0]), decay=False)
    state = OptimizerState.for_params([b])
    b.grad = np.zeros(1)
    adamw_step([b], state, 0.1, cfg)
    assert b.data[0] == 1.0


def test_schedule_examples():
    cfg = TrainConfig()
    assert cosine_warmup_lr(cfg.warmup_epochs, cfg) == 0.005
    lrs = [cosine_warmup_lr(e, cfg) for e in range(cfg.epochs)]
    assert all(a < b for a, b in zip(lrs[:6], lrs[1:6]))
    step = max(abs(a - b) for a, b in zip(lrs[5:], lrs[6:]))
    assert lrs[-1] - cfg.eta_min <= step


@given(st.integers(1, 200).flatmap(lambda E: st.tuples(st.just(E), st.integers(0, E - 1))),
       st.floats(1e-4, 1.0), st.floats(0, 1e-4))
def test_schedule_monotone_after_warmup(EW, eta, eta_min):
    E, W = EW
    cfg = TrainConfig(lr=eta, eta_min=eta_min, epochs=E, warmup_epochs=W)
    lrs = [cosine_warmup_lr(e, cfg) for e in range(W, E)]
    assert lrs[0] == pytest.approx(eta)
    assert all(b <= a + 1e-15 for a, b in zip(lrs, lrs[1:]))
    assert all(eta_min - 1e-15 <= lr <= eta + 1e-15 for lr in lrs)


def test_clip_examples(rng):
    small = [np.array([0.3, 0.4])]  # norm 0.5
    out = clip_gradients(small, 1.0)
    np.testing.assert_array_equal(out[0], small[0])
    big = [rng.normal(size=(3, 4)), rng.normal(size=5)]
    scale = 10.0 / global_norm(big)
    big = [x * scale for x in big]
    out = clip_gradients(big, 1.0)
    assert abs(global_norm(out) - 1.0) < 1e-9
    flat_in = np.concatenate([x.ravel() for x in big])
    flat_out = np.concatenate([x.ravel() for x in out])
    assert np.isclose(flat_in @ flat_out / np.linalg.norm(flat_in) / np.linalg.norm(flat_out), 1.0)
    zero = clip_gradients([np.zeros(3)], 1.0)
    assert not zero[0].any()


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(warmup_epochs=100)
    with pytest.raises(ConfigError):
        TrainConfig(multilabel_loss="focal")


def _toy(rng, n=24, seq=4, d=3):
    X = rng.normal(size=(n, seq, d))
    y = (X[:, -1, 0] > 0).astype(int)
    return X, y


def _model(arch="LSTM_GRU", head=1, seed=0):
    return SequenceModel(SequenceModelConfig(architecture=arch, input_dim=3, hidden1=8, hidden2=6,
                                             head_dim=head, dropout_p=0.0, seed=seed))


def test_memorises_small_set(rng):
    X, y = _toy(rng)
    cfg = TrainConfig(epochs=60, warmup_epochs=2, lr=0.02, batch_size=8, dropout_p=0.0)
    _, logs = fit(_model(), (X, y), (X, y), cfg, "binary")
    assert logs[-1].acc == 1.0
    assert logs[-1].train_loss < logs[0].train_loss


def test_fit_is_deterministic(rng, tmp_path):
    X, y = _toy(rng)
    cfg = TrainConfig(epochs=4, warmup_epochs=1, seed=9, dropout_p=0.3)
    paths = []
    for k in range(2):
        m = SequenceModel(SequenceModelConfig(input_dim=3, hidden1=5, hidden2=4, dropout_p=0.3, seed=1))
        _, logs = fit(m, (X, y), (X, y), cfg, "binary")
        paths.append(tmp_path / f"{k}.csv")
        write_epoch_csv(paths[-1], logs)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    header = paths[0].read_text().splitlines()[0]
    assert header == ",".join(EpochLog.CSV_HEADER)


def test_fit_categorical_and_multilabel_run(rng):
    X = rng.normal(size=(16, 4, 3))
    yc = rng.integers(0, 4, size=16)
    ym = rng.integers(0, 3, size=(16, 4))
    cfg = TrainConfig(epochs=2, warmup_epochs=0)
    _, logs = fit(_model(head=4), (X, yc), (X, yc), cfg, "categorical")
    assert len(logs) == 2 and len(logs[0].confusion) == 4
    for mode in ("bce", "group_ce"):
        cfg = TrainConfig(epochs=2, warmup_epochs=0, multilabel_loss=mode)
        _, logs = fit(_model(head=12), (X, ym), (X, ym), cfg, "multilabel", n_bins=3)
        assert 0 <= logs[-1].acc <= 1


def test_divergence_is_reported(rng):
    X, y = _toy(rng)
    X[0, 0, 0] = np.nan
    with pytest.raises(DivergedLoss) as info:
        fit(_model(), (X, y), (X, y), TrainConfig(epochs=2, warmup_epochs=0, batch_size=64), "binary")
    assert info.value.epoch == 0


def test_empty_sets_rejected(rng):
    X, y = _toy(rng)
    with pytest.raises(ConfigError):
        fit(_model(), (X[:0], y[:0]), (X, y), TrainConfig(epochs=1, warmup_epochs=0), "binary")
