"""Per-layer channel widths of the hyper decoder and entropy-parameter networks.

Base widths are the full-size layouts for N = 128: the single decoder, its
widened control, and one branch of the three-way split. They are scaled by
``N / 128 * width_scale`` and rounded to a multiple of 4. The last
entropy-parameter layer is always sized to the mixture it must emit.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import ModelConfig, round4

HYPER_DECODER_BASE = {
    "mixed": (128, 128, 192, 192, 256),
    "widened": (192, 256, 256, 384, 512),
    "separate": (128, 128, 192, 192, 256),
}
ENTROPY_PARAMS_BASE = {
    "mixed": (640, 640, 1152),
    "widened": (1024, 1024, 1152),
    "separate": (640, 640, 384),
}
HYPER_DECODER_STRIDES = (1, 2, 1, 2, 1)


@dataclass(frozen=True)
class ChannelPlan:
    hyper_decoder: tuple[int, ...]
    entropy_params: tuple[int, ...]
    branches: int

    @property
    def hyper_out(self) -> int:
        return self.hyper_decoder[-1]


def hyper_decoder_channel_plan(config: ModelConfig) -> ChannelPlan:
    arm = config.arm
    factor = config.N / 128.0 * config.width_scale
    hyper = tuple(round4(c * factor) for c in HYPER_DECODER_BASE[arm])
    hidden = tuple(round4(c * factor) for c in ENTROPY_PARAMS_BASE[arm][:-1])
    per_family = config.K * config.m_eff
    final = per_family if config.mode == "separate" else 3 * per_family
    branches = 3 if config.mode == "separate" else 1
    return ChannelPlan(hyper, hidden + (final,), branches)
