"""The codec graph: transforms, hyperprior, context model and entropy parameters.

Mixed mode feeds one hyper-decoder output and the context features to a
single entropy-parameter network emitting weights, means and scales together.
Separate mode gives each parameter family its own hyper decoder and its own
entropy-parameter network; only the context features are shared.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import (
    Conv2d,
    ConvTranspose2d,
    MaskedConv2d,
    Module,
    ModuleList,
    ResidualBlock,
    Sequential,
    Tensor,
    dump_checkpoint,
    fnv1a64,
    load_checkpoint,
    no_grad,
)
from ..autodiff import functional as F
from ..entropy import FactorizedDensity, GmmParams, params_from_raw
from ..errors import FormatError, PreconditionError, UsageError
from .config import ModelConfig
from .plan import HYPER_DECODER_STRIDES, hyper_decoder_channel_plan

LATENT_STRIDE = 16
HYPER_STRIDE = 64
FAMILIES = ("weights", "means", "scales")
# fixed (not learned) centring: an untrained decoder then outputs mid-grey
# instead of values near zero, which keeps MS-SSIM's luminance term positive
PIXEL_OFFSET = 0.5


def _lrelu(x: Tensor) -> Tensor:
    return F.leaky_relu(x)


def _stage(blocks, ch, depth, rng, dtype):
    for _ in range(depth):
        blocks.append(ResidualBlock(ch, rng=rng, dtype=dtype))


def _hyper_decoder(n_in: int, widths, rng, dtype) -> Sequential:
    steps = []
    cin = n_in
    for i, (cout, stride) in enumerate(zip(widths, HYPER_DECODER_STRIDES)):
        if stride == 1:
            steps.append(Conv2d(cin, cout, 3, rng=rng, dtype=dtype))
        else:
            steps.append(ConvTranspose2d(cin, cout, 3, stride, rng=rng, dtype=dtype))
        if i < len(widths) - 1:
            steps.append(_lrelu)
        cin = cout
    return Sequential(*steps)


def _entropy_network(cin: int, widths, rng, dtype) -> Sequential:
    steps = []
    for i, cout in enumerate(widths):
        steps.append(Conv2d(cin, cout, 1, rng=rng, dtype=dtype))
        if i < len(widths) - 1:
            steps.append(_lrelu)
        cin = cout
    return Sequential(*steps)


class CodecModel(Module):
    def __init__(self, config: ModelConfig, seed: int = 0, dtype=np.float32):
        super().__init__()
        self.config = config
        self.plan = hyper_decoder_channel_plan(config)
        rng = np.random.default_rng(seed)
        n, m, depth = config.n_eff, config.m_eff, config.depth

        ga = [Conv2d(3, n, 5, 2, rng=rng, dtype=dtype), _lrelu]
        _stage(ga, n, depth, rng, dtype)
        ga += [Conv2d(n, n, 5, 2, rng=rng, dtype=dtype), _lrelu]
        _stage(ga, n, depth, rng, dtype)
        ga += [Conv2d(n, n, 5, 2, rng=rng, dtype=dtype), _lrelu]
        _stage(ga, n, depth, rng, dtype)
        ga += [Conv2d(n, m, 5, 2, rng=rng, dtype=dtype)]
        self.g_a = Sequential(*ga)

        gs = [ConvTranspose2d(m, n, 5, 2, rng=rng, dtype=dtype), _lrelu]
        _stage(gs, n, depth, rng, dtype)
        gs += [ConvTranspose2d(n, n, 5, 2, rng=rng, dtype=dtype), _lrelu]
        _stage(gs, n, depth, rng, dtype)
        gs += [ConvTranspose2d(n, n, 5, 2, rng=rng, dtype=dtype), _lrelu]
        _stage(gs, n, depth, rng, dtype)
        gs += [ConvTranspose2d(n, 3, 5, 2, rng=rng, dtype=dtype)]
        self.g_s = Sequential(*gs)

        self.h_a = Sequential(
            Conv2d(m, n, 3, rng=rng, dtype=dtype), _lrelu,
            Conv2d(n, n, 3, rng=rng, dtype=dtype), _lrelu,
            Conv2d(n, n, 3, 2, rng=rng, dtype=dtype), _lrelu,
            Conv2d(n, n, 3, rng=rng, dtype=dtype), _lrelu,
            Conv2d(n, n, 3, 2, rng=rng, dtype=dtype),
        )

        self.context = MaskedConv2d(m, 2 * m, config.context_kernel, rng=rng, dtype=dtype)
        ep_in = 2 * m + self.plan.hyper_out
        self.h_s = ModuleList(
            _hyper_decoder(n, self.plan.hyper_decoder, rng, dtype) for _ in range(self.plan.branches)
        )
        self.entropy_params = ModuleList(
            _entropy_network(ep_in, self.plan.entropy_params, rng, dtype) for _ in range(self.plan.branches)
        )
        self.factorized = FactorizedDensity(n, rng=rng, dtype=dtype)
        self.assign_names()
        self._fingerprint: int | None = None

    # -- shapes --------------------------------------------------------------
    @property
    def dtype(self):
        return self.context.weight.dtype

    @property
    def separate(self) -> bool:
        return self.config.mode == "separate"

    # -- transforms ------------------------------------------------------------
    def analysis(self, x: Tensor) -> Tensor:
        h, w = x.shape[-2:]
        if h % HYPER_STRIDE or w % HYPER_STRIDE:
            raise PreconditionError(f"image extent {h}x{w} is not a multiple of {HYPER_STRIDE}; pad it first")
        return self.g_a(x - PIXEL_OFFSET)

    def synthesis(self, y_hat: Tensor, clamp: bool = False) -> Tensor:
        x_hat = self.g_s(y_hat) + PIXEL_OFFSET
        return F.clamp(x_hat, 0.0, 1.0) if clamp else x_hat

    def hyper_analysis(self, y: Tensor) -> Tensor:
        return self.h_a(y)

    def hyper_synthesis(self, z_hat: Tensor) -> list[Tensor]:
        """One feature map per hyper decoder (one in mixed mode, three in separate mode)."""
        return [branch(z_hat) for branch in self.h_s]

    def hyper_synthesis_mixed(self, z_hat: Tensor) -> Tensor:
        if self.separate:
            raise UsageError("hyper_synthesis_mixed called on a separate-mode model")
        return self.h_s[0](z_hat)

    def context_forward(self, y_hat: Tensor) -> Tensor:
        return self.context(y_hat)

    def _split_family(self, raw: Tensor) -> Tensor:
        # (B, K*m, H, W) -> (B, m, H, W, K)
        b, _, h, w = raw.shape
        k, m = self.config.K, self.config.m_eff
        return F.transpose(F.reshape(raw, (b, k, m, h, w)), (0, 2, 3, 4, 1))

    def entropy_params_mixed(self, ctx: Tensor, hyper: Tensor) -> GmmParams:
        if self.separate:
            raise UsageError("entropy_params_mixed called on a separate-mode model")
        raw = self.entropy_params[0](F.concat([ctx, hyper], axis=1))
        w_raw, mu, s_raw = F.split(raw, 3, axis=1)
        return params_from_raw(self._split_family(w_raw), self._split_family(mu), self._split_family(s_raw))

    def entropy_params_separate(self, ctx: Tensor, z_hat: Tensor) -> GmmParams:
        if not self.separate:
            raise UsageError("entropy_params_separate called on a mixed-mode model")
        hyper = self.hyper_synthesis(z_hat)
        return self.entropy_params_from_features(ctx, hyper)

    def entropy_params_from_features(self, ctx: Tensor, hyper: list[Tensor]) -> GmmParams:
        if not self.separate:
            return self.entropy_params_mixed(ctx, hyper[0])
        fams = [self._split_family(net(F.concat([ctx, feat], axis=1)))
                for net, feat in zip(self.entropy_params, hyper)]
        return params_from_raw(*fams)

    def gmm_params(self, y_hat: Tensor, z_hat: Tensor) -> GmmParams:
        """Parameters for every latent position at once (context sees ``y_hat`` causally)."""
        return self.entropy_params_from_features(self.context_forward(y_hat), self.hyper_synthesis(z_hat))

    # -- serialization ---------------------------------------------------------
    def to_bytes(self) -> bytes:
        return dump_checkpoint(((p.name, p.data) for p in self.parameters()), self.config.to_text())

    def fingerprint(self) -> int:
        """FNV-1a of the checkpoint bytes; cached, call :meth:`invalidate` after training."""
        if self._fingerprint is None:
            self._fingerprint = fnv1a64(self.to_bytes())
        return self._fingerprint

    def invalidate(self) -> None:
        self._fingerprint = None

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, blob: bytes, dtype=np.float32) -> "CodecModel":
        params, config_text = load_checkpoint(blob)
        if not config_text:
            raise FormatError("checkpoint carries no model config")
        model = cls(ModelConfig.from_text(config_text), seed=0, dtype=dtype)
        named = dict(model.named_parameters())
        if set(named) != set(params):
            missing = sorted(set(named) - set(params))[:3]
            extra = sorted(set(params) - set(named))[:3]
            raise FormatError(f"checkpoint does not match config (missing {missing}, unexpected {extra})")
        for name, p in named.items():
            if params[name].shape != p.shape:
                raise FormatError(f"parameter {name}: shape {params[name].shape} != {p.shape}")
            p.data = params[name].astype(dtype)
        model._fingerprint = fnv1a64(blob)
        return model

    @classmethod
    def load(cls, path, dtype=np.float32) -> "CodecModel":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read(), dtype=dtype)

    def copy(self, dtype=None) -> "CodecModel":
        clone = CodecModel(self.config, seed=0, dtype=dtype or self.dtype)
        for (_, src), (_, dst) in zip(self.named_parameters(), clone.named_parameters()):
            dst.data = src.data.astype(dst.dtype, copy=True)
        clone._fingerprint = self._fingerprint
        return clone

    def family_parameter_names(self, family: str) -> list[str]:
        """Names of the hyper-decoder + entropy-parameter weights owned by one family (separate mode)."""
        if not self.separate:
            raise UsageError("parameter families exist only in separate mode")
        i = FAMILIES.index(family)
        return [n for n, _ in self.named_parameters() if n.startswith((f"h_s.{i}.", f"entropy_params.{i}."))]


def check_padded(shape: tuple[int, ...]) -> None:
    h, w = shape[-2:]
    if h % HYPER_STRIDE or w % HYPER_STRIDE:
        raise PreconditionError(f"image extent {h}x{w} is not a multiple of {HYPER_STRIDE}")


def inference(model: CodecModel, x: np.ndarray) -> dict[str, np.ndarray]:
    """Quantized forward pass (no tape): latents, symbols, params and reconstruction."""
    from ..entropy import quantize_round

    with no_grad():
        xt = Tensor(np.asarray(x, dtype=model.dtype))
        y = model.analysis(xt)
        z = model.hyper_analysis(y)
        z_hat = quantize_round(z)
        y_hat = quantize_round(y)
        params = model.gmm_params(Tensor(y_hat.astype(model.dtype)), Tensor(z_hat.astype(model.dtype)))
        x_hat = model.synthesis(Tensor(y_hat.astype(model.dtype)), clamp=True)
    return {
        "y": y.data,
        "z": z.data,
        "y_hat": y_hat,
        "z_hat": z_hat,
        "weights": params.weights.data,
        "means": params.means.data,
        "scales": params.scales.data,
        "x_hat": x_hat.data,
    }
