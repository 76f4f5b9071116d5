import numpy as np
import pytest

from gmsd.autodiff import Tensor, dump_checkpoint, no_grad
from gmsd.errors import ConfigurationError, FormatError, PreconditionError, UsageError
from gmsd.network import (
    FAMILIES,
    CodecModel,
    ModelConfig,
    hyper_decoder_channel_plan,
    inference,
)

MIXED = ModelConfig()
SEPARATE = ModelConfig(mode="separate")
WIDENED = ModelConfig(widened=True)


@pytest.fixture(scope="module")
def models():
    return {cfg.arm: CodecModel(cfg, seed=1, dtype=np.float64) for cfg in (MIXED, SEPARATE, WIDENED)}


def test_channel_plan_full_width():
    sep = hyper_decoder_channel_plan(ModelConfig(mode="separate", width_scale=1.0))
    assert sep.hyper_decoder == (128, 128, 192, 192, 256)
    assert sep.entropy_params == (640, 640, 384) and sep.branches == 3
    mixed = hyper_decoder_channel_plan(ModelConfig(width_scale=1.0))
    assert mixed.entropy_params[-1] == 1152 and mixed.branches == 1


def test_channel_plan_desk_scale():
    assert hyper_decoder_channel_plan(SEPARATE).hyper_decoder == (16, 16, 24, 24, 32)
    assert hyper_decoder_channel_plan(SEPARATE).entropy_params == (80, 80, 48)
    assert hyper_decoder_channel_plan(MIXED).entropy_params == (80, 80, 144)


def test_parameter_counts(models):
    counts = {arm: m.num_parameters() for arm, m in models.items()}
    assert counts == {"mixed": 137_491, "separate": 201_395, "widened": 202_635}
    assert counts["widened"] >= counts["separate"] > counts["mixed"]


def test_parameter_names_unique(models):
    for m in models.values():
        names = [n for n, _ in m.named_parameters()]
        assert len(names) == len(set(names))
    assert len(models["separate"].h_s) == 3 and len(models["mixed"].h_s) == 1


def test_shapes(models):
    x = Tensor(np.random.default_rng(0).uniform(size=(2, 3, 64, 128)))
    for m in models.values():
        with no_grad():
            y = m.analysis(x)
            z = m.hyper_analysis(y)
            x_hat = m.synthesis(y)
            params = m.gmm_params(y, z)
        assert y.shape == (2, 16, 4, 8)
        assert z.shape == (2, 16, 1, 2)
        assert x_hat.shape == x.shape
        for t in (params.weights, params.means, params.scales):
            assert t.shape == (2, 16, 4, 8, 3)
        np.testing.assert_allclose(params.weights.data.sum(-1), 1.0, atol=1e-12)
        assert np.isfinite(x_hat.data).all()


def test_unpadded_input_rejected(models):
    with pytest.raises(PreconditionError):
        models["mixed"].analysis(Tensor(np.zeros((1, 3, 48, 64))))


def test_synthesis_clamps_only_on_request(models):
    m = models["mixed"]
    y = Tensor(np.full((1, 16, 4, 4), 200.0))
    with no_grad():
        raw = m.synthesis(y).data
        clamped = m.synthesis(y, clamp=True).data
    assert raw.min() < 0 or raw.max() > 1
    assert clamped.min() >= 0 and clamped.max() <= 1
    np.testing.assert_array_equal(np.clip(clamped, 0, 1), clamped)


def test_mode_specific_entry_points(models):
    ctx = Tensor(np.zeros((1, 32, 4, 4)))
    z = Tensor(np.zeros((1, 16, 1, 1)))
    with pytest.raises(UsageError):
        models["mixed"].entropy_params_separate(ctx, z)
    with pytest.raises(UsageError):
        models["separate"].entropy_params_mixed(ctx, Tensor(np.zeros((1, 32, 4, 4))))
    with pytest.raises(UsageError):
        models["separate"].hyper_synthesis_mixed(z)
    with pytest.raises(UsageError):
        models["mixed"].family_parameter_names("means")


def test_branch_isolation():
    model = CodecModel(SEPARATE, seed=2, dtype=np.float64)
    rng = np.random.default_rng(3)
    y_hat = Tensor(np.round(rng.normal(0, 2, (1, 16, 4, 4))))
    z_hat = Tensor(np.round(rng.normal(0, 2, (1, 16, 1, 1))))
    with no_grad():
        before = model.gmm_params(y_hat, z_hat)
    named = dict(model.named_parameters())
    for name in model.family_parameter_names("means"):
        if name.startswith("h_s."):
            named[name].data = np.zeros_like(named[name].data)
    with no_grad():
        after = model.gmm_params(y_hat, z_hat)
    assert not np.array_equal(before.means.data, after.means.data)
    np.testing.assert_array_equal(before.weights.data, after.weights.data)
    np.testing.assert_array_equal(before.scales.data, after.scales.data)


@pytest.mark.parametrize("arm", ["mixed", "separate"])
def test_future_symbols_do_not_leak(models, arm):
    model = models[arm]
    rng = np.random.default_rng(4)
    y_hat = np.round(rng.normal(0, 3, (1, 16, 8, 8)))
    z_hat = Tensor(np.round(rng.normal(0, 2, (1, 16, 2, 2))))
    h, w = 8, 8
    with no_grad():
        ref = model.gmm_params(Tensor(y_hat), z_hat)
    for pos in range(h * w):
        r, c = divmod(pos, w)
        bumped = y_hat.copy()
        flat = bumped.reshape(1, 16, -1)
        flat[:, :, pos:] += rng.integers(-5, 6, flat[:, :, pos:].shape)
        with no_grad():
            got = model.gmm_params(Tensor(bumped), z_hat)
        for fam in FAMILIES:
            a, b = getattr(ref, fam).data, getattr(got, fam).data
            np.testing.assert_array_equal(a[:, :, r, c], b[:, :, r, c])


def test_context_zero_prefix_gives_bias(models):
    m = models["mixed"]
    with no_grad():
        out = m.context_forward(Tensor(np.zeros((1, 16, 4, 4)))).data
    np.testing.assert_array_equal(out, np.broadcast_to(m.context.bias.data[None, :, None, None], out.shape))


def test_deterministic_construction_and_inference():
    a, b = CodecModel(MIXED, seed=5), CodecModel(MIXED, seed=5)
    assert a.to_bytes() == b.to_bytes()
    assert CodecModel(MIXED, seed=6).to_bytes() != a.to_bytes()
    x = np.random.default_rng(0).uniform(size=(1, 3, 64, 64))
    ra, rb = inference(a, x), inference(b, x)
    for key in ra:
        np.testing.assert_array_equal(ra[key], rb[key])


def test_checkpoint_round_trip(tmp_path, models):
    for m in models.values():
        path = tmp_path / f"{m.config.arm}.ckpt"
        m.save(path)
        back = CodecModel.load(path)
        assert back.config == m.config
        # parameters are stored as little-endian float32
        for (n1, p1), (n2, p2) in zip(m.named_parameters(), back.named_parameters()):
            assert n1 == n2
            np.testing.assert_array_equal(p1.data.astype(np.float32), p2.data)
        assert back.fingerprint() == m.fingerprint()
        assert back.to_bytes() == path.read_bytes()


def test_checkpoint_mismatch_rejected(models):
    m = models["mixed"]
    with pytest.raises(FormatError):
        CodecModel.from_bytes(m.to_bytes()[:20])
    wrong_cfg = dump_checkpoint(((p.name, p.data) for p in m.parameters()), SEPARATE.to_text())
    with pytest.raises(FormatError):
        CodecModel.from_bytes(wrong_cfg)
    no_cfg = dump_checkpoint(((p.name, p.data) for p in m.parameters()), "")
    with pytest.raises(FormatError):
        CodecModel.from_bytes(no_cfg)


def test_config_text_round_trip_and_errors():
    cfg = ModelConfig(mode="separate", N=64, M=96, width_scale=0.25, lmbda=0.0032, distortion="mse")
    assert ModelConfig.from_text(cfg.to_text()) == cfg
    assert ModelConfig.from_text("# c\n\nlambda = 40\ndecoder_mode=separate\n") == ModelConfig(mode="separate", lmbda=40.0)
    for bad in ("mode=triple", "K=0", "N=2", "lambda=0", "bogus=1", "N=x", "just text", "widened=maybe",
                "context_kernel=4"):
        with pytest.raises(ConfigurationError):
            ModelConfig.from_text(bad)
    with pytest.raises(ConfigurationError):
        ModelConfig(mode="separate", widened=True)
