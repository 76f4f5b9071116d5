from .bitstream import HEADER_SIZE, MAGIC, MODE_CODES, VERSION, Bitstream, Header, parse_bitstream
from .codec import (
    CoderContext,
    DecodeResult,
    EncodeResult,
    compress,
    decode_image,
    encode_image,
    estimate_bits,
    quantized_latents,
    reconstruct,
)
from .rangecoder import RangeDecoder, RangeEncoder, decode_symbols, encode_symbols

__all__ = [
    "Bitstream",
    "CoderContext",
    "DecodeResult",
    "EncodeResult",
    "HEADER_SIZE",
    "Header",
    "MAGIC",
    "MODE_CODES",
    "RangeDecoder",
    "RangeEncoder",
    "VERSION",
    "compress",
    "decode_image",
    "decode_symbols",
    "encode_image",
    "encode_symbols",
    "estimate_bits",
    "parse_bitstream",
    "quantized_latents",
    "reconstruct",
]
