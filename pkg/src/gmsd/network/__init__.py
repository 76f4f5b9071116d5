from .codec import FAMILIES, HYPER_STRIDE, LATENT_STRIDE, CodecModel, check_padded, inference
from .config import DECODER_MODES, MS_SSIM_LAMBDAS, MSE_LAMBDAS, ModelConfig, parse_config_text
from .plan import ChannelPlan, hyper_decoder_channel_plan

__all__ = [
    "ChannelPlan",
    "CodecModel",
    "DECODER_MODES",
    "FAMILIES",
    "HYPER_STRIDE",
    "LATENT_STRIDE",
    "MSE_LAMBDAS",
    "MS_SSIM_LAMBDAS",
    "ModelConfig",
    "check_padded",
    "hyper_decoder_channel_plan",
    "inference",
    "parse_config_text",
]
