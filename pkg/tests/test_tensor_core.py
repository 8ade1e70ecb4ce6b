import numpy as np
import pytest

from nie_nav_pipeline.tensor_core import (
    CheckpointMismatchError,
    Conv2d,
    GruCell,
    Linear,
    LrSchedule,
    MissingGradientError,
    Mlp,
    ParameterStore,
    SelfAttention,
    ShapeError,
    Tensor,
    adam_step,
    clip_gradients,
    evaluate_graph,
    global_norm,
    load_checkpoint,
    ops,
    save_checkpoint,
)
from nie_nav_pipeline.tensor_core.optim import ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON


def weighted_sum(out: Tensor, seed: int = 0) -> Tensor:
    """Scalar that depends on every output entry with a different weight."""
    return ops.sum(ops.mul(out, np.random.default_rng(seed).normal(size=out.shape)))


def signed_away_from_zero(rng, shape):
    return rng.uniform(0.2, 1.0, size=shape) * rng.choice([-1.0, 1.0], size=shape)


UNARY_OPS = {
    "neg": (ops.neg, lambda rng: rng.normal(size=(3, 4))),
    "relu": (ops.relu, lambda rng: signed_away_from_zero(rng, (3, 4))),
    "tanh": (ops.tanh, lambda rng: rng.normal(size=(3, 4))),
    "sigmoid": (ops.sigmoid, lambda rng: rng.normal(size=(3, 4))),
    "exp": (ops.exp, lambda rng: rng.normal(size=(3, 4))),
    "log": (ops.log, lambda rng: rng.uniform(0.5, 2.0, size=(3, 4))),
    "abs": (ops.abs, lambda rng: signed_away_from_zero(rng, (3, 4))),
    "square": (ops.square, lambda rng: rng.normal(size=(3, 4))),
    "clip": (lambda x: ops.clip(x, -0.5, 0.5), lambda rng: rng.normal(size=(3, 4))),
    "softmax": (lambda x: ops.softmax(x, axis=-1), lambda rng: rng.normal(size=(3, 4))),
    "log_softmax": (lambda x: ops.log_softmax(x, axis=0), lambda rng: rng.normal(size=(3, 4))),
    "sum_axis": (lambda x: ops.sum(x, axis=0), lambda rng: rng.normal(size=(3, 4))),
    "mean_keepdims": (lambda x: ops.mean(x, axis=1, keepdims=True), lambda rng: rng.normal(size=(3, 4))),
    "reshape": (lambda x: ops.reshape(x, (4, 3)), lambda rng: rng.normal(size=(3, 4))),
    "transpose": (ops.transpose, lambda rng: rng.normal(size=(2, 3, 4))),
    "broadcast_to": (lambda x: ops.broadcast_to(ops.reshape(x, (1, 3, 4)), (2, 3, 4)),
                     lambda rng: rng.normal(size=(3, 4))),
    "narrow": (lambda x: ops.narrow(x, 1, 1, 2), lambda rng: rng.normal(size=(3, 4))),
    "select": (lambda x: ops.select(x, [2, 0, 3], axis=1), lambda rng: rng.normal(size=(3, 4))),
}


@pytest.mark.parametrize("name", sorted(UNARY_OPS))
def test_unary_op_gradients(name, gradient_check):
    op, sample = UNARY_OPS[name]
    x = sample(np.random.default_rng(1))
    gradient_check(lambda inputs, _: weighted_sum(op(inputs["x"])), {"x": x})


BINARY_OPS = {
    "add_broadcast": (ops.add, (3, 4), (4,)),
    "sub": (ops.sub, (3, 4), (3, 4)),
    "mul_broadcast": (ops.mul, (3, 1), (1, 4)),
    "minimum": (ops.minimum, (3, 4), (3, 4)),
    "matmul": (ops.matmul, (2, 3, 4), (4, 5)),
    "matmul_batched": (ops.matmul, (2, 3, 4), (2, 4, 2)),
}


@pytest.mark.parametrize("name", sorted(BINARY_OPS))
def test_binary_op_gradients(name, gradient_check):
    op, shape_a, shape_b = BINARY_OPS[name]
    rng = np.random.default_rng(2)
    gradient_check(lambda inputs, _: weighted_sum(op(inputs["a"], inputs["b"])),
                   {"a": rng.normal(size=shape_a), "b": rng.normal(size=shape_b)})


@pytest.mark.parametrize("stride, padding", [(1, 0), (2, 1)])
def test_conv2d_gradients(stride, padding, gradient_check):
    rng = np.random.default_rng(3)
    inputs = {"x": rng.normal(size=(2, 2, 5, 5)), "w": rng.normal(size=(3, 2, 3, 3)), "b": rng.normal(size=3)}
    gradient_check(lambda t, _: weighted_sum(ops.conv2d(t["x"], t["w"], t["b"], stride=stride, padding=padding)),
                   inputs)


def test_conv2d_matches_direct_correlation():
    rng = np.random.default_rng(4)
    x, w = rng.normal(size=(1, 1, 4, 4)), rng.normal(size=(1, 1, 3, 3))
    out = ops.conv2d(Tensor(x), Tensor(w)).data
    expected = np.array([[np.sum(x[0, 0, i:i + 3, j:j + 3] * w[0, 0]) for j in range(2)] for i in range(2)])
    np.testing.assert_allclose(out[0, 0], expected, atol=1e-12)


def test_concat_gradients(gradient_check):
    rng = np.random.default_rng(5)
    gradient_check(lambda t, _: weighted_sum(ops.concat([t["a"], t["b"]], axis=-1)),
                   {"a": rng.normal(size=(2, 3)), "b": rng.normal(size=(2, 2))})


def test_embedding_gradients_accumulate_repeated_rows(gradient_check):
    rng = np.random.default_rng(6)
    indices = np.array([[0, 4], [4, 1]])
    gradient_check(lambda t, _: weighted_sum(ops.embedding(t["table"], indices)), {"table": rng.normal(size=(5, 3))})


def test_gru_cell_gradients(gradient_check):
    rng = np.random.default_rng(7)
    inputs = {"x": rng.normal(size=(2, 3)), "h": rng.normal(size=(2, 4)), "w_ih": rng.normal(size=(3, 12)),
              "w_hh": rng.normal(size=(4, 12)), "b_ih": rng.normal(size=12), "b_hh": rng.normal(size=12)}
    gradient_check(lambda t, _: weighted_sum(ops.gru_cell(t["x"], t["h"], t["w_ih"], t["w_hh"], t["b_ih"],
                                                          t["b_hh"])), inputs)


def test_masked_attention_gradients(gradient_check):
    rng = np.random.default_rng(8)
    mask = np.array([[1, 1, 0, 1, 0], [0, 1, 1, 1, 1]])
    inputs = {"q": rng.normal(size=(2, 3, 4)), "k": rng.normal(size=(2, 5, 4)), "v": rng.normal(size=(2, 5, 2))}
    gradient_check(lambda t, _: weighted_sum(ops.attention(t["q"], t["k"], t["v"], key_mask=mask)), inputs)


def test_masked_keys_get_no_attention():
    rng = np.random.default_rng(9)
    q, k, v = rng.normal(size=(1, 2, 3)), rng.normal(size=(1, 4, 3)), rng.normal(size=(1, 4, 2))
    mask = np.array([[1, 0, 1, 0]])
    v_changed = v.copy()
    v_changed[:, [1, 3]] += 100.0
    out = ops.attention(Tensor(q), Tensor(k), Tensor(v), key_mask=mask).data
    out_changed = ops.attention(Tensor(q), Tensor(k), Tensor(v_changed), key_mask=mask).data
    np.testing.assert_allclose(out, out_changed, atol=1e-12)


@pytest.mark.parametrize("layer", ["linear", "mlp", "conv2d", "gru", "attention"])
def test_layer_gradients(layer, gradient_check):
    rng = np.random.default_rng(10)
    store = ParameterStore()
    if layer == "linear":
        module, x = Linear(store, "fc", 3, 2, rng), rng.normal(size=(4, 3))
        forward = lambda params, t: module(params, t)  # noqa: E731
    elif layer == "mlp":
        module, x = Mlp(store, "mlp", [3, 5, 2], rng), rng.normal(size=(4, 3))
        forward = lambda params, t: module(params, t)  # noqa: E731
    elif layer == "conv2d":
        module, x = Conv2d(store, "conv", 2, 2, 3, rng, stride=2, padding=1), rng.normal(size=(1, 2, 4, 4))
        forward = lambda params, t: module(params, t)  # noqa: E731
    elif layer == "gru":
        module, x = GruCell(store, "gru", 3, 2, rng), rng.normal(size=(2, 3))
        h = rng.normal(size=(2, 2))
        forward = lambda params, t: module(params, t, Tensor(h))  # noqa: E731
    else:
        module, x = SelfAttention(store, "attn", 3, rng), rng.normal(size=(2, 4, 3))
        mask = np.array([[1, 1, 1, 0], [1, 0, 1, 1]])
        forward = lambda params, t: module(params, t, mask)  # noqa: E731
    gradient_check(lambda inputs, params: weighted_sum(forward(params, inputs["x"])), {"x": x}, store.params)


def test_matmul_rejects_mismatched_inner_dimensions():
    with pytest.raises(ShapeError):
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


def test_select_rejects_misshaped_indices():
    with pytest.raises(ShapeError):
        ops.select(Tensor(np.ones((3, 4))), [0, 1], axis=1)


def test_linear_rejects_wrong_input_width():
    store = ParameterStore()
    layer = Linear(store, "fc", 3, 2, np.random.default_rng(0))
    with pytest.raises(ShapeError):
        layer(store.leaves(), Tensor(np.ones((1, 4))))


def test_backward_without_seed_needs_a_scalar():
    y = ops.mul(Tensor(np.ones(3), requires_grad=True), 2.0)
    with pytest.raises(ShapeError):
        y.backward()


def test_shared_subexpressions_accumulate_gradients():
    x = Tensor(np.array([1.5, -2.0]), requires_grad=True)
    ops.sum(ops.add(ops.mul(x, x), x)).backward()
    np.testing.assert_allclose(x.grad, 2 * x.data + 1)


def test_unused_parameters_get_zero_gradients():
    params = {"used": np.array([1.0, 2.0]), "unused": np.array([3.0])}
    result = evaluate_graph(lambda _, p: ops.sum(ops.square(p["used"])), {}, params)
    grads = result.backward()
    np.testing.assert_array_equal(grads.params["used"], [2.0, 4.0])
    np.testing.assert_array_equal(grads.params["unused"], [0.0])


def test_graphs_can_return_several_named_outputs():
    result = evaluate_graph(lambda t, _: {"double": ops.mul(t["x"], 2.0), "loss": ops.sum(t["x"])},
                            {"x": np.array([1.0, 2.0])})
    np.testing.assert_array_equal(result.outputs["double"].data, [2.0, 4.0])
    np.testing.assert_array_equal(result.backward("loss").inputs["x"], [1.0, 1.0])


def test_first_two_optimizer_steps_by_hand():
    store = ParameterStore()
    store.add("w", np.array([1.0, -1.0]))
    schedule = LrSchedule(initial_rate=0.1, total_steps=10)
    g1, g2 = np.array([0.5, -2.0]), np.array([1.0, 1.0])

    adam_step(store, {"w": g1}, schedule)
    # first bias-corrected step moves every coordinate by the learning rate against the gradient sign
    expected = np.array([1.0, -1.0]) - 0.1 * g1 / (np.abs(g1) + ADAM_EPSILON)
    np.testing.assert_allclose(store["w"], expected, rtol=1e-10)

    adam_step(store, {"w": g2}, schedule)
    m = ADAM_BETA1 * (1 - ADAM_BETA1) * g1 + (1 - ADAM_BETA1) * g2
    v = ADAM_BETA2 * (1 - ADAM_BETA2) * g1 ** 2 + (1 - ADAM_BETA2) * g2 ** 2
    m_hat, v_hat = m / (1 - ADAM_BETA1 ** 2), v / (1 - ADAM_BETA2 ** 2)
    expected = expected - 0.09 * m_hat / (np.sqrt(v_hat) + ADAM_EPSILON)
    np.testing.assert_allclose(store["w"], expected, rtol=1e-10)
    assert store.step == 2
    assert schedule.current_step == 2


def test_optimizer_step_needs_every_gradient():
    store = ParameterStore()
    store.add("a", np.zeros(2))
    store.add("b", np.zeros(2))
    with pytest.raises(MissingGradientError):
        adam_step(store, {"a": np.ones(2)}, LrSchedule())


def test_schedule_decays_linearly_to_zero():
    schedule = LrSchedule(initial_rate=1e-3, total_steps=4)
    rates = []
    for _ in range(6):
        rates.append(schedule.rate)
        schedule.advance()
    np.testing.assert_allclose(rates, [1e-3, 7.5e-4, 5e-4, 2.5e-4, 0.0, 0.0])


def test_clip_gradients_rescales_by_the_global_norm():
    grads = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert global_norm(grads) == 5.0
    clipped = clip_gradients(grads, 1.0)
    np.testing.assert_allclose(clipped["a"], [0.6])
    np.testing.assert_allclose(clipped["b"], [0.8])
    untouched = clip_gradients(grads, 10.0)
    np.testing.assert_array_equal(untouched["a"], grads["a"])


def test_snapshots_are_frozen_copies():
    store = ParameterStore()
    store.add("w", np.ones(3))
    snapshot = store.snapshot()
    adam_step(store, {"w": np.ones(3)}, LrSchedule(initial_rate=0.1, total_steps=5))
    np.testing.assert_array_equal(snapshot.arrays["w"], np.ones(3))
    with pytest.raises(ValueError):
        snapshot.arrays["w"][0] = 2.0


def test_duplicate_parameter_names_are_rejected():
    store = ParameterStore()
    store.add("w", np.ones(1))
    with pytest.raises(ValueError):
        store.add("w", np.ones(1))


def _trained_store(seed: int, out_features: int = 2, dtype=np.float64) -> ParameterStore:
    rng = np.random.default_rng(seed)
    store = ParameterStore(dtype=np.dtype(dtype))
    Linear(store, "fc", 3, out_features, rng)
    return store


def test_checkpoint_round_trip(tmp_path):
    store = _trained_store(0)
    schedule = LrSchedule(initial_rate=0.01, total_steps=8)
    adam_step(store, {name: np.ones_like(value) for name, value in store.params.items()}, schedule)
    save_checkpoint(tmp_path / "ckpt.npz", store, schedule)

    restored = _trained_store(1)
    restored_schedule = LrSchedule()
    load_checkpoint(tmp_path / "ckpt.npz", restored, restored_schedule)
    for name in store:
        np.testing.assert_array_equal(restored[name], store[name])
        np.testing.assert_array_equal(restored.adam_m[name], store.adam_m[name])
        np.testing.assert_array_equal(restored.adam_v[name], store.adam_v[name])
    assert restored.step == 1
    assert restored_schedule == schedule


def test_single_precision_store_survives_a_checkpoint(tmp_path):
    store = _trained_store(0, dtype=np.float32)
    save_checkpoint(tmp_path / "ckpt.npz", store)
    restored = load_checkpoint(tmp_path / "ckpt.npz", _trained_store(5, dtype=np.float32))
    for name in store:
        assert restored[name].dtype == np.float32
        np.testing.assert_array_equal(restored[name], store[name])


def test_checkpoint_shape_mismatch(tmp_path):
    save_checkpoint(tmp_path / "ckpt.npz", _trained_store(0, out_features=2))
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(tmp_path / "ckpt.npz", _trained_store(0, out_features=3))


def test_checkpoint_name_mismatch(tmp_path):
    save_checkpoint(tmp_path / "ckpt.npz", _trained_store(0))
    other = ParameterStore()
    Linear(other, "head", 3, 2, np.random.default_rng(0))
    with pytest.raises(CheckpointMismatchError, match="missing"):
        load_checkpoint(tmp_path / "ckpt.npz", other)


def test_hundred_optimizer_steps_follow_the_moment_recursion():
    rng = np.random.default_rng(12)
    start = rng.normal(size=(3, 2))
    gradients = rng.normal(size=(100, 3, 2))
    store = ParameterStore()
    store.add("w", start.copy())
    schedule = LrSchedule(initial_rate=0.05, total_steps=120)

    w, m, v = start.copy(), np.zeros_like(start), np.zeros_like(start)
    for t, g in enumerate(gradients, start=1):
        rate = 0.05 * (1.0 - (t - 1) / 120)
        m = ADAM_BETA1 * m + (1 - ADAM_BETA1) * g
        v = ADAM_BETA2 * v + (1 - ADAM_BETA2) * g * g
        w = w - rate * (m / (1 - ADAM_BETA1 ** t)) / (np.sqrt(v / (1 - ADAM_BETA2 ** t)) + ADAM_EPSILON)
        adam_step(store, {"w": g}, schedule)
        np.testing.assert_allclose(store["w"], w, rtol=1e-10, atol=1e-12)
    assert store.step == 100
    assert schedule.current_step == 100


@pytest.mark.parametrize("logits", [
    [[1e3, -1e3, 0.0, 999.0], [-1e3, -1e3, -1e3, -1e3]],
    [[2.0, -1e9, 1.0, -1e9], [-1e9, -1e9, 5.0, -1e9]],
    [[0.5, -np.inf, -np.inf, 3.0], [1e4, -np.inf, 1e4, 0.0]],
])
def test_softmax_rows_sum_to_one_for_extreme_and_masked_logits(logits):
    logits = np.array(logits)
    probs = ops.softmax(Tensor(logits)).data
    assert np.all(np.isfinite(probs))
    np.testing.assert_allclose(probs.sum(axis=-1), 1.0, atol=1e-12)
    assert np.all(probs[logits <= -1e9] < 1e-300)
    log_probs = ops.log_softmax(Tensor(logits)).data
    np.testing.assert_allclose(np.exp(log_probs), probs, atol=1e-12)
