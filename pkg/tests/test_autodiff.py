"""Tape, MLP, encoding, and optimizer tests with finite-difference oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confield.autodiff import (
    AdamState,
    DecaySchedule,
    Tensor,
    adam_step,
    backward,
    concat,
    gather_rows,
    init_mlp,
    mlp,
    mlp_forward,
    no_grad,
    positional_encode,
    precision,
)
from confield.errors import ContractError, DimensionError, GradientNanError

from .oracles import assert_grads_close, finite_difference_grads


def test_scalar_square_gradient():
    p = Tensor(3.0, requires_grad=True)
    loss = p * p
    grads = backward(loss, {"p": p})
    assert grads["p"] == pytest.approx(6.0)


def test_tanh_gradient_at_zero():
    p = Tensor(0.0, requires_grad=True)
    grads = backward(p.tanh(), {"p": p})
    assert grads["p"] == pytest.approx(1.0)


def test_untouched_parameter_gets_exact_zero():
    p = Tensor(2.0, requires_grad=True)
    q = Tensor(5.0, requires_grad=True)
    grads = backward(p * p, {"p": p, "q": q})
    assert grads["q"] == 0.0


def test_non_scalar_loss_rejected():
    p = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ContractError):
        backward(p * p, {"p": p})


def test_detach_blocks_gradient():
    p = Tensor(2.0, requires_grad=True)
    loss = p.detach() * p
    grads = backward(loss, {"p": p})
    assert grads["p"] == pytest.approx(2.0)  # only the live factor


def test_broadcast_add_reduces_gradient():
    w = Tensor(np.ones((1, 3)), requires_grad=True)
    x = Tensor(np.ones((4, 3)))
    grads = backward((x + w).sum(), {"w": w})
    np.testing.assert_array_equal(grads["w"], np.full((1, 3), 4.0))


def test_gather_rows_scatter_adds():
    table = Tensor(np.arange(6, dtype=np.float32).reshape(3, 2), requires_grad=True)
    picked = gather_rows(table, np.array([0, 2, 0]))
    grads = backward(picked.sum(), {"t": table})
    np.testing.assert_array_equal(grads["t"], [[2, 2], [0, 0], [1, 1]])


def test_cumsum_gradient_matches_fd():
    with precision(np.float64):
        p = Tensor(np.random.default_rng(0).normal(size=(3, 4)), requires_grad=True)

        def loss_fn():
            return ((p.cumsum(axis=1) * p).sum()).data

        analytic = backward((p.cumsum(axis=1) * p).sum(), {"p": p})
        numeric = finite_difference_grads(loss_fn, {"p": p})
        assert_grads_close(analytic, numeric)


def test_two_layer_relu_forward_by_hand():
    # weights chosen so the hidden pre-activations are [x1-x2, -x1] and the
    # output is hidden @ [1, 2] + 0.5
    spec = mlp("toy", 2, (2,), 1)
    params = {
        "toy.W0": Tensor(np.array([[1.0, -1.0], [-1.0, 0.0]]), requires_grad=True),
        "toy.b0": Tensor(np.zeros(2), requires_grad=True),
        "toy.W1": Tensor(np.array([[1.0], [2.0]]), requires_grad=True),
        "toy.b1": Tensor(np.array([0.5]), requires_grad=True),
    }
    out = mlp_forward(spec, params, Tensor(np.array([[1.0, -1.0]])))
    # hidden = relu([1*1 + (-1)*(-1), -1*1 + 0]) = [2, 0]; out = 2*1 + 0*2 + 0.5
    assert out.data[0, 0] == pytest.approx(2.5)


def test_mlp_zero_weights_outputs_zero():
    spec = mlp("z", 3, (4,), 2)
    params = {k: Tensor(np.zeros_like(v.data)) for k, v in
              init_mlp(spec, np.random.default_rng(0)).items()}
    out = mlp_forward(spec, params, Tensor(np.zeros((5, 3))))
    np.testing.assert_array_equal(out.data, np.zeros((5, 2)))


def test_mlp_identity_single_layer():
    spec = mlp("id", 1, (), 1)
    params = {"id.W0": Tensor([[1.0]]), "id.b0": Tensor([0.0])}
    out = mlp_forward(spec, params, Tensor([[0.3]]))
    assert out.data[0, 0] == pytest.approx(0.3)


def test_mlp_input_dim_mismatch_raises():
    spec = mlp("m", 3, (4,), 1)
    params = init_mlp(spec, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        mlp_forward(spec, params, Tensor(np.zeros((2, 2))))


def test_mlp_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    with precision(np.float64):
        spec = mlp("net", 4, (8, 8), 2, skip_at=1)
        params = init_mlp(spec, rng)
        x = Tensor(rng.normal(size=(5, 4)))

        def loss_fn():
            return mlp_forward(spec, params, x).tanh().sum().data

        analytic = backward(mlp_forward(spec, params, x).tanh().sum(), params)
        numeric = finite_difference_grads(loss_fn, params)
        assert_grads_close(analytic, numeric)


def test_tape_determinism_bit_identical():
    rng = np.random.default_rng(3)
    spec = mlp("net", 3, (16,), 1)
    params = init_mlp(spec, rng)
    x = Tensor(rng.normal(size=(6, 3)).astype(np.float32))

    def run():
        return backward(mlp_forward(spec, params, x).sum(), params)

    g1, g2 = run(), run()
    for k in g1:
        assert np.array_equal(g1[k], g2[k])


def test_no_grad_skips_tape():
    p = Tensor(2.0, requires_grad=True)
    with no_grad():
        out = p * p
    assert out._vjp is None


def test_positional_encode_zero_frequencies_identity():
    x = Tensor(np.array([[0.1, 0.2]]))
    out = positional_encode(x, 0, include_input=True)
    np.testing.assert_array_equal(out.data, x.data)


def test_positional_encode_zero_input():
    out = positional_encode(Tensor(np.zeros((1, 3))), 4, include_input=False)
    sin_cos = out.data.reshape(-1, 2, 3)
    np.testing.assert_array_equal(sin_cos[:, 0, :], 0.0)  # all sin terms
    np.testing.assert_array_equal(sin_cos[:, 1, :], 1.0)  # all cos terms


def test_positional_encode_half_pi():
    out = positional_encode(Tensor(np.array([[np.pi / 2]])), 1, include_input=True)
    np.testing.assert_allclose(out.data, [[np.pi / 2, 1.0, 0.0]], atol=1e-7)


def test_adam_zero_gradient_is_noop():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    params = {"p": p}
    state = AdamState(params, DecaySchedule(1e-2, 1e-2, 10))
    before = p.data.copy()
    for step in range(5):
        adam_step(state, params, {"p": np.zeros(2)}, step)
    np.testing.assert_array_equal(p.data, before)
    assert state.step_count == 5


def test_adam_first_step_moves_by_lr():
    p = Tensor(np.array([1.0]), requires_grad=True)
    params = {"p": p}
    state = AdamState(params, DecaySchedule(0.1, 0.1, 10))
    adam_step(state, params, {"p": np.array([1.0])}, 0)
    # bias-corrected first step is lr * g / (|g| + eps') ~= lr
    assert p.data[0] == pytest.approx(1.0 - 0.1, abs=1e-6)


def test_adam_nan_gradient_names_block():
    p = Tensor(np.array([1.0]), requires_grad=True)
    params = {"density.W0": p}
    state = AdamState(params, DecaySchedule(0.1, 0.1, 10))
    with pytest.raises(GradientNanError, match="density.W0"):
        adam_step(state, params, {"density.W0": np.array([np.nan])}, 0)


def test_decay_schedule_endpoints_paper_values():
    sched = DecaySchedule(1e-4, 1e-5, 250_000)
    assert sched.value(0) == pytest.approx(1e-4, rel=1e-9)
    assert sched.value(250_000) == pytest.approx(1e-5, rel=1e-9)


def test_decay_schedule_to_zero():
    sched = DecaySchedule(0.1, 0.0, 1000)
    assert sched.value(1000) == 0.0
    assert 0.0 < sched.value(999) < sched.value(1)


@given(st.integers(min_value=1, max_value=999))
@settings(max_examples=50, deadline=None)
def test_decay_schedule_strictly_monotone(step):
    sched = DecaySchedule(1e-2, 1e-4, 1000)
    assert sched.value(step - 1) > sched.value(step) > sched.value(1000)


def test_concat_backward_slices():
    a = Tensor(np.ones((2, 2)), requires_grad=True)
    b = Tensor(np.ones((2, 3)), requires_grad=True)
    out = concat([a, b], axis=1)
    grads = backward((out * out).sum(), {"a": a, "b": b})
    assert grads["a"].shape == (2, 2)
    assert grads["b"].shape == (2, 3)
    np.testing.assert_array_equal(grads["a"], 2 * np.ones((2, 2)))


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=6))
@settings(max_examples=30, deadline=None)
def test_elementwise_chain_matches_fd(values):
    with precision(np.float64):
        p = Tensor(np.asarray(values), requires_grad=True)

        def make_loss():
            return ((p.sin() * p.cos() + p.sigmoid()).softplus()).sum()

        analytic = backward(make_loss(), {"p": p})
        numeric = finite_difference_grads(lambda: make_loss().data, {"p": p}, h=1e-5)
        assert_grads_close(analytic, numeric, rel_tol=1e-5, abs_tol=1e-7)
