import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmsd.autodiff import (
    AdamState,
    DEFAULT_LR,
    Parameter,
    Tensor,
    activation,
    adam_step,
    causal_mask,
    conv2d,
    conv2d_transpose,
    dump_checkpoint,
    fnv1a64,
    load_checkpoint,
    masked_conv2d,
    no_grad,
)
from gmsd.autodiff import functional as F
from gmsd.autodiff.gradcheck import check_gradients
from gmsd.errors import ConfigurationError, FormatError, UsageError


def loop_conv(x, k, stride, padding):
    """Direct nested-loop cross-correlation."""
    b, c, h, w = x.shape
    o, _, kh, kw = k.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((b, o, ho, wo))
    for n in range(b):
        for oc in range(o):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for ic in range(c):
                        for u in range(kh):
                            for v in range(kw):
                                acc += xp[n, ic, i * stride + u, j * stride + v] * k[oc, ic, u, v]
                    out[n, oc, i, j] = acc
    return out


def test_conv_identity_kernel():
    x = np.random.default_rng(0).normal(size=(2, 3, 5, 5))
    k = np.eye(3).reshape(3, 3, 1, 1)
    out = conv2d(Tensor(x), Tensor(k), 1, 0)
    np.testing.assert_array_equal(out.data, x)


@pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 1), (2, 2)])
def test_conv_matches_loop_oracle(stride, padding):
    rng = np.random.default_rng(1)
    x = rng.normal(size=(1, 1, 5, 5))
    k = rng.normal(size=(1, 1, 3, 3))
    out = conv2d(Tensor(x), Tensor(k), stride, padding)
    np.testing.assert_allclose(out.data, loop_conv(x, k, stride, padding), rtol=1e-12, atol=1e-12)


def test_conv_multichannel_matches_loop_oracle():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(2, 3, 7, 6))
    k = rng.normal(size=(4, 3, 5, 5))
    out = conv2d(Tensor(x), Tensor(k), 2, 2)
    np.testing.assert_allclose(out.data, loop_conv(x, k, 2, 2), rtol=1e-12, atol=1e-12)


def test_conv_output_extent_and_zero_kernel():
    x = Tensor(np.ones((1, 2, 9, 9)))
    out = conv2d(x, Tensor(np.zeros((3, 2, 3, 3))), stride=2, padding=1)
    assert out.shape == (1, 3, (9 + 2 - 3) // 2 + 1, (9 + 2 - 3) // 2 + 1)
    assert not out.data.any()


def test_conv_channel_mismatch_is_configuration_error():
    with pytest.raises(ConfigurationError):
        conv2d(Tensor(np.ones((1, 2, 4, 4))), Tensor(np.ones((1, 3, 3, 3))))


GEOMETRIES = [
    # (kernel, stride, padding, output_padding) as used by the codec
    (5, 2, 2, 1),
    (3, 2, 1, 1),
    (3, 1, 1, 0),
    (5, 1, 2, 0),
    (1, 1, 0, 0),
    (2, 2, 0, 0),
]


@pytest.mark.parametrize("k,stride,padding,out_pad", GEOMETRIES)
@pytest.mark.parametrize("seed", range(3))
def test_transpose_is_adjoint(k, stride, padding, out_pad, seed):
    rng = np.random.default_rng(seed)
    y_hw = 4
    x_hw = stride * (y_hw - 1) + k - 2 * padding + out_pad
    kernel = rng.normal(size=(3, 2, k, k))
    x = rng.normal(size=(2, 2, x_hw, x_hw))
    y = rng.normal(size=(2, 3, y_hw, y_hw))
    cx = conv2d(Tensor(x), Tensor(kernel), stride, padding).data
    assert cx.shape == y.shape
    ty = conv2d_transpose(Tensor(y), Tensor(kernel), stride, padding, out_pad).data
    assert ty.shape == x.shape
    lhs = np.sum(cx * y)
    rhs = np.sum(x * ty)
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


def test_transpose_stride2_block():
    out = conv2d_transpose(Tensor(np.full((1, 1, 1, 1), 3.5)), Tensor(np.ones((1, 1, 2, 2))), stride=2)
    np.testing.assert_array_equal(out.data, np.full((1, 1, 2, 2), 3.5))


def test_transpose_zero_input():
    out = conv2d_transpose(Tensor(np.zeros((1, 4, 3, 3))), Tensor(np.ones((4, 2, 5, 5))), 2, 2, 1)
    assert out.shape == (1, 2, 6, 6)
    assert not out.data.any()


def test_mask_counts_strictly_prior_taps():
    assert causal_mask(5, 5).sum() == 12
    assert causal_mask(3, 3).sum() == 4
    with pytest.raises(ConfigurationError):
        causal_mask(4, 4)


def test_masked_conv_causality_perturbation():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(1, 2, 6, 6))
    k = Tensor(rng.normal(size=(3, 2, 5, 5)))
    bias = Tensor(rng.normal(size=3))
    base = masked_conv2d(Tensor(x), k, bias=bias).data
    for j in range(36):
        xp = x.copy()
        xp[0, :, j // 6, j % 6] += rng.normal(size=2) * 10
        out = masked_conv2d(Tensor(xp), k, bias=bias).data.reshape(1, 3, 36)
        np.testing.assert_array_equal(out[..., :j], base.reshape(1, 3, 36)[..., :j])
        # the perturbed position itself must not see its own value either
        np.testing.assert_array_equal(out[..., j], base.reshape(1, 3, 36)[..., j])


def test_masked_conv_zero_input_is_bias():
    bias = Tensor(np.array([0.5, -1.0]))
    out = masked_conv2d(Tensor(np.zeros((1, 3, 6, 6))), Tensor(np.ones((2, 3, 5, 5))), bias=bias)
    np.testing.assert_array_equal(out.data[0, 0], 0.5)
    np.testing.assert_array_equal(out.data[0, 1], -1.0)


def test_masked_conv_even_kernel_rejected():
    with pytest.raises(ConfigurationError):
        masked_conv2d(Tensor(np.zeros((1, 1, 6, 6))), Tensor(np.ones((1, 1, 4, 4))))


def test_backward_of_sum_is_ones():
    x = Parameter(np.random.default_rng(0).normal(size=(2, 3)))
    x.sum().backward()
    np.testing.assert_array_equal(x.grad, np.ones((2, 3)))


def test_unused_parameter_gets_zero_grad():
    a = Parameter(np.ones(3))
    b = Parameter(np.ones(3))
    loss = (a * a).sum() + (b * 0.0).sum()
    loss.backward()
    np.testing.assert_array_equal(b.grad, 0.0)


def test_backward_on_detached_tensor_raises():
    with pytest.raises(UsageError):
        Tensor(np.ones(3)).sum().backward()
    p = Parameter(np.ones(3))
    with pytest.raises(UsageError):
        (p * 2).backward()  # not scalar
    with no_grad():
        out = (p * 2).sum()
    with pytest.raises(UsageError):
        out.backward()


def test_tape_ids_increase():
    p = Parameter(np.ones(2))
    a = p * 2
    b = a + 1
    assert a.tape_id is not None and b.tape_id > a.tape_id
    assert p.tape_id is None


@pytest.mark.parametrize("seed", range(20))
def test_composite_net_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    x = Parameter(rng.normal(size=(1, 2, 8, 8)))
    k1 = Parameter(rng.normal(size=(3, 2, 3, 3)) * 0.5)
    b1 = Parameter(rng.normal(size=3))
    k2 = Parameter(rng.normal(size=(3, 2, 5, 5)) * 0.3)
    km = Parameter(rng.normal(size=(2, 3, 5, 5)) * 0.3)

    def fn():
        h = F.leaky_relu(conv2d(x, k1, 2, 1, bias=b1))
        h = F.tanh(conv2d_transpose(h, k2, 2, 2, 1))
        h = F.softplus(masked_conv2d(conv2d(h, Tensor(np.ones((3, 2, 1, 1))) * 0.1, 1, 0), km))
        return (h * h).sum()

    err = check_gradients(fn, [x, k1, b1, k2, km], eps=1e-5, max_entries=12, rng=rng)
    assert err < 1e-5


UNARY = {
    "exp": F.exp,
    "log": lambda t: F.log(F.exp(t) + 1.0),
    "log2": lambda t: F.log2(F.softplus(t) + 0.1),
    "sqrt": lambda t: F.sqrt(t * t + 1.0),
    "abs": F.abs,
    "tanh": F.tanh,
    "sigmoid": F.sigmoid,
    "softplus": F.softplus,
    "relu": F.relu,
    "leaky_relu": F.leaky_relu,
    "ndtr": F.ndtr,
    "softmax": lambda t: F.softmax(t, axis=-1) * Tensor(np.arange(5.0)),
    "power": lambda t: F.power(F.softplus(t) + 0.5, 1.7),
    "clamp": lambda t: F.clamp(t, -0.8, 0.9),
    "maximum": lambda t: F.maximum(t, 0.1),
    "avg_pool2": lambda t: F.avg_pool2(t.reshape(1, 1, 5, 4)) * 1.3,
    "mean": lambda t: F.mean(t * t, axis=0, keepdims=True),
    "getitem": lambda t: t[1:3, ::2],
    "transpose": lambda t: t.transpose(1, 0) * Tensor(np.arange(20.0).reshape(5, 4)),
    "concat_split": lambda t: F.split(F.concat([t, t * 2.0], axis=1), 2, axis=1)[1] ** 2,
}


@pytest.mark.parametrize("name", sorted(UNARY))
@pytest.mark.parametrize("seed", range(20))
def test_op_gradient_fidelity(name, seed):
    rng = np.random.default_rng(seed)
    x = Parameter(rng.normal(size=(4, 5)))
    # keep kinked ops away from their kinks so central differences are valid
    if name in {"abs", "relu", "leaky_relu"}:
        x.data[np.abs(x.data) < 1e-3] = 0.5
    if name == "clamp":
        x.data[np.abs(np.abs(x.data + 0.8) * np.abs(x.data - 0.9)) < 1e-3] = 0.0
    if name == "maximum":
        x.data[np.abs(x.data - 0.1) < 1e-3] = 0.5
    weights = Tensor(rng.normal(size=UNARY[name](Tensor(x.data)).shape))
    err = check_gradients(lambda: (UNARY[name](x) * weights).sum(), [x], eps=1e-5)
    assert err < 1e-5


@pytest.mark.parametrize("seed", range(20))
def test_binary_op_gradient_fidelity(seed):
    rng = np.random.default_rng(seed)
    a = Parameter(rng.normal(size=(3, 4)))
    b = Parameter(rng.normal(size=(1, 4)) + 3.0)
    m = Parameter(rng.normal(size=(2, 4, 3)))

    def fn():
        h = (a + b) * (a - b) / b
        h = F.matmul(m, h) - 2.0
        return (h * h).mean()

    assert check_gradients(fn, [a, b, m]) < 1e-5


def test_activation_cases():
    assert activation(Tensor(np.zeros(1)), "leaky_relu").data[0] == 0.0
    np.testing.assert_allclose(activation(Tensor(np.array([-2.0, 3.0])), "leaky_relu").data, [-0.4, 3.0])
    xs = Tensor(np.array([-700.0, -30.0, 0.0, 30.0, 700.0]))
    assert (activation(xs, "softplus").data > 0).all()
    with pytest.raises(ConfigurationError):
        activation(xs, "gelu")


def test_exp_gradient_equals_output():
    x = Parameter(np.linspace(-2, 2, 7))
    out = activation(x, "exp")
    out.sum().backward()
    np.testing.assert_allclose(x.grad, out.data)
    assert check_gradients(lambda: activation(x, "exp").sum(), [x]) < 1e-5


@given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=30))
@settings(max_examples=50, deadline=None)
def test_forward_ops_finite_on_finite_inputs(values):
    x = Tensor(np.array(values))
    for kind in ("leaky_relu", "relu", "tanh", "softplus", "exp", "sigmoid"):
        assert np.isfinite(activation(x, kind).data).all()
    assert np.isfinite(F.softmax(x).data).all()
    assert np.isfinite(F.ndtr(x).data).all()


# -- Adam ------------------------------------------------------------------

def test_adam_zero_gradient_leaves_params_unchanged():
    p = Parameter(np.array([1.0, -2.0, 3.0]), name="p")
    state = AdamState()
    adam_step([p], state, lr=1e-3, grads=[np.zeros(3)])
    np.testing.assert_array_equal(p.data, [1.0, -2.0, 3.0])
    assert state.step == 1


def test_adam_single_step_closed_form():
    p = Parameter(np.array([0.0, 0.0]), name="p")
    g = np.array([0.37, -5.0])
    state = AdamState()
    adam_step([p], state, lr=1e-3, grads=[g])
    # bias-corrected first step: m_hat = g, v_hat = g^2 -> lr * g / (|g| + eps)
    expected = -1e-3 * g / (np.abs(g) + state.eps)
    np.testing.assert_allclose(p.data, expected, rtol=1e-12)
    np.testing.assert_allclose(np.abs(p.data), 1e-3, rtol=1e-6)
    assert np.all(np.sign(p.data) == -np.sign(g))


def test_adam_step_counter_and_shapes():
    p = Parameter(np.ones((2, 2)), name="w")
    state = AdamState()
    for i in range(3):
        adam_step([p], state, grads=[np.ones((2, 2))])
        assert state.step == i + 1
        assert state.m["w"].shape == p.shape == state.v["w"].shape
    with pytest.raises(ConfigurationError):
        adam_step([p], state, grads=[np.ones(3)])
    with pytest.raises(ConfigurationError):
        adam_step([p], state, lr=0.0)


def test_default_learning_rate():
    assert DEFAULT_LR == 1e-4


# -- checkpoint ----------------------------------------------------------------

def test_checkpoint_round_trip_and_layout():
    rng = np.random.default_rng(0)
    params = [("g_a.0.weight", rng.normal(size=(4, 3, 5, 5)).astype(np.float32)), ("bias", np.zeros(4, np.float32))]
    blob = dump_checkpoint(params, "mode=separate\n")
    assert blob[:8] == b"GMSDCKPT"
    assert int.from_bytes(blob[8:12], "little") == 1
    assert int.from_bytes(blob[12:16], "little") == 2
    name_len = int.from_bytes(blob[16:18], "little")
    assert blob[18:18 + name_len] == b"g_a.0.weight"
    assert blob[18 + name_len] == 4
    loaded, cfg = load_checkpoint(blob)
    assert cfg == "mode=separate\n"
    for name, arr in params:
        np.testing.assert_array_equal(loaded[name], arr)


def test_checkpoint_rejects_garbage():
    blob = dump_checkpoint([("a", np.ones(3, np.float32))])
    with pytest.raises(FormatError):
        load_checkpoint(b"XXXXXXXX" + blob[8:])
    with pytest.raises(FormatError):
        load_checkpoint(blob[:20])
    with pytest.raises(FormatError):
        dump_checkpoint([("a", np.ones(1)), ("a", np.ones(1))])


def test_fnv1a_reference_vectors():
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_serial_determinism():
    rng = np.random.default_rng(5)
    x, k = rng.normal(size=(2, 3, 16, 16)), rng.normal(size=(4, 3, 5, 5))
    a = conv2d(Tensor(x), Tensor(k), 2, 2).data
    b = conv2d(Tensor(x), Tensor(k), 2, 2).data
    assert a.tobytes() == b.tobytes()


def test_piecewise_differences_avoid_kinks():
    from gmsd.autodiff.branches import record_branches
    from gmsd.autodiff.gradcheck import numeric_grad, piecewise_numeric_grad

    x = Tensor(np.array([3e-6, -2e-6, 0.7]), requires_grad=True)

    def fn():
        return F.sum(F.leaky_relu(x))

    plain = numeric_grad(fn, x, eps=1e-5)
    assert abs(plain[(0,)] - 1.0) > 0.1  # the stencil straddles the kink
    smooth = piecewise_numeric_grad(fn, x, eps=1e-5)
    np.testing.assert_allclose([smooth[(0,)], smooth[(1,)], smooth[(2,)]], [1.0, 0.2, 1.0], rtol=1e-9)
    assert check_gradients(fn, [x], piecewise=True) < 1e-9
    with record_branches() as trace:
        fn()
    assert len(trace) == 1


def test_piecewise_differences_skip_points_on_a_kink():
    from gmsd.autodiff.gradcheck import piecewise_numeric_grad

    x = Tensor(np.array([0.0, 1.0]), requires_grad=True)
    got = piecewise_numeric_grad(lambda: F.sum(F.abs(x)), x, eps=1e-3)
    assert np.isnan(got[(0,)]) and got[(1,)] == pytest.approx(1.0)
