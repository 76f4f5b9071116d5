import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmsd.coder import (
    HEADER_SIZE,
    CoderContext,
    RangeDecoder,
    RangeEncoder,
    compress,
    decode_image,
    decode_symbols,
    encode_symbols,
    estimate_bits,
    parse_bitstream,
)
from gmsd.coder.codec import MAX_SYMBOLS_PER_BYTE
from gmsd.entropy import quantize_pmf
from gmsd.errors import DecodeError, GmsdError, ModelMismatchError
from gmsd.network import CodecModel, ModelConfig
from gmsd.train import synthetic_corpus


def random_cdfs(rng, n, size, alpha=0.3):
    return quantize_pmf(rng.dirichlet(np.full(size, alpha), size=n))


def test_round_trip_10k_symbols():
    rng = np.random.default_rng(0)
    cdfs = random_cdfs(rng, 10_000, 20)
    symbols = [int(rng.choice(20, p=np.diff(c) / 65536.0)) - 5 for c in cdfs]
    blob = encode_symbols(symbols, cdfs, -5)
    assert decode_symbols(blob, len(symbols), cdfs, -5) == symbols


def ideal_bits(symbols, cdfs, s_min):
    return sum(-np.log2((int(c[s - s_min + 1]) - int(c[s - s_min])) / 65536.0) for s, c in zip(symbols, cdfs))


def test_skewed_binary_source_near_entropy():
    rng = np.random.default_rng(1)
    cdf = np.array([0, 49152, 65536])
    symbols = (rng.uniform(size=20_000) < 0.25).astype(int).tolist()
    blob = encode_symbols(symbols, cdf, 0)
    ideal = ideal_bits(symbols, [cdf] * len(symbols), 0)
    assert 8 * len(blob) <= ideal * 1.01 + 32
    assert decode_symbols(blob, len(symbols), cdf, 0) == symbols


def test_certain_symbol_costs_nothing():
    cdf = np.array([0, 65536])
    blob = encode_symbols([7] * 1000, cdf, 7)
    assert len(blob) == 4
    assert decode_symbols(blob, 1000, cdf, 7) == [7] * 1000


def test_empty_message():
    blob = encode_symbols([], np.array([0, 65536]), 0)
    assert decode_symbols(blob, 0, np.array([0, 65536]), 0) == []


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 400), st.integers(2, 256))
def test_overhead_bounded(seed, n, size):
    rng = np.random.default_rng(seed)
    cdfs = random_cdfs(rng, n, size, alpha=rng.choice([0.05, 1.0]))
    symbols = [int(rng.choice(size, p=np.diff(c) / 65536.0)) for c in cdfs]
    blob = encode_symbols(symbols, cdfs, 0)
    assert 8 * len(blob) <= ideal_bits(symbols, cdfs, 0) + 0.01 * n + 32
    assert decode_symbols(blob, n, cdfs, 0) == symbols


@pytest.mark.parametrize("seed", range(20))
def test_truncation_and_trailing_bytes_detected(seed):
    rng = np.random.default_rng(seed)
    cdfs = random_cdfs(rng, 300, 16)
    symbols = [int(rng.choice(16, p=np.diff(c) / 65536.0)) for c in cdfs]
    blob = encode_symbols(symbols, cdfs, 0)
    with pytest.raises(DecodeError):
        decode_symbols(blob[:-1], len(symbols), cdfs, 0)
    with pytest.raises(DecodeError):
        decode_symbols(blob + b"\x00", len(symbols), cdfs, 0)


def test_empty_input_reports_offset():
    with pytest.raises(DecodeError) as err:
        RangeDecoder(b"", base_offset=40)
    assert err.value.offset == 40


def test_encoder_rejects_out_of_table_symbol():
    enc = RangeEncoder()
    with pytest.raises(GmsdError):
        enc.encode_symbol(5, np.array([0, 30000, 65536]), 0)
    with pytest.raises(GmsdError):
        enc.encode(0, 0)


# -- image codec -------------------------------------------------------------

@pytest.fixture(scope="module")
def codecs():
    out = {}
    for cfg in (ModelConfig(), ModelConfig(mode="separate"), ModelConfig(widened=True)):
        model = CodecModel(cfg, seed=3)
        out[cfg.arm] = (model, CoderContext(model))
    return out


@pytest.fixture(scope="module")
def images():
    return list(synthetic_corpus(4, 64, 64, seed=11))


@pytest.mark.parametrize("arm", ["mixed", "separate", "widened"])
def test_image_round_trip_and_parity(codecs, images, arm):
    model, ctx = codecs[arm]
    for img in images:
        enc = compress(img, model, ctx)
        dec = decode_image(enc.to_bytes(), model, ctx)
        np.testing.assert_array_equal(dec.y_hat, enc.y_hat)
        np.testing.assert_array_equal(dec.z_hat, enc.z_hat)
        np.testing.assert_array_equal(dec.image, enc.reconstruction)
        assert dec.header.mode == arm


def test_decode_is_deterministic(codecs, images):
    model, ctx = codecs["separate"]
    blob = compress(images[0], model, ctx).to_bytes()
    assert compress(images[0], model, ctx).to_bytes() == blob
    a, b = decode_image(blob, model, ctx), decode_image(blob, model)
    np.testing.assert_array_equal(a.image, b.image)


def test_non_multiple_extent_is_padded_and_cropped(codecs):
    model, ctx = codecs["mixed"]
    img = np.random.default_rng(0).uniform(size=(3, 50, 70))
    enc = compress(img, model, ctx)
    assert enc.y_hat.shape == (16, 4, 8)
    dec = decode_image(enc.to_bytes(), model, ctx)
    assert dec.image.shape == (3, 50, 70) and dec.image.dtype == np.uint8
    assert (dec.header.width, dec.header.height) == (70, 50)
    assert enc.bitstream.bpp == pytest.approx(enc.bitstream.num_bits / (50 * 70))


def test_segment_lengths_track_estimates(codecs, images):
    for arm in ("mixed", "separate"):
        model, ctx = codecs[arm]
        for img in images:
            enc = compress(img, model, ctx)
            y_bits, z_bits = estimate_bits(model, enc.y_hat, enc.z_hat)
            assert abs(8 * len(enc.bitstream.y_segment) - y_bits) <= 0.02 * y_bits + 64
            assert abs(8 * len(enc.bitstream.z_segment) - z_bits) <= 0.02 * z_bits + 64


def test_model_mismatch(codecs, images):
    model, ctx = codecs["mixed"]
    blob = compress(images[0], model, ctx).to_bytes()
    with pytest.raises(ModelMismatchError):
        decode_image(blob, CodecModel(ModelConfig(), seed=4))
    with pytest.raises(ModelMismatchError):
        decode_image(blob, codecs["separate"][0])


def patched(blob, offset, fmt, value):
    b = bytearray(blob)
    struct.pack_into(fmt, b, offset, value)
    return bytes(b)


@pytest.mark.parametrize("offset,fmt,value", [
    (0, "<4s", b"GMSX"),
    (4, "<B", 9),
    (5, "<B", 7),
    (7, "<B", 1),
    (12, "<I", 0),
    (16, "<I", 1 << 20),
    (28, "<I", 1 << 30),
])
def test_header_errors_carry_offsets(codecs, images, offset, fmt, value):
    model, ctx = codecs["mixed"]
    blob = compress(images[0], model, ctx).to_bytes()
    with pytest.raises(DecodeError) as err:
        decode_image(patched(blob, offset, fmt, value), model, ctx)
    expected = 12 if offset == 16 else offset
    assert err.value.offset == expected


def test_short_stream_and_capacity_guard(codecs, images):
    model, ctx = codecs["mixed"]
    blob = compress(images[0], model, ctx).to_bytes()
    with pytest.raises(DecodeError):
        parse_bitstream(blob[:HEADER_SIZE - 1])
    # claim a 32768 x 32768 image: far more symbols than the bytes could hold
    huge = patched(patched(blob, 12, "<I", 1 << 15), 16, "<I", 1 << 15)
    with pytest.raises(DecodeError):
        decode_image(huge, model, ctx)
    # the guard must never reject a valid stream: it allows at least as many
    # symbols per byte as the cheapest possible symbol permits
    assert MAX_SYMBOLS_PER_BYTE >= 8 / np.log2(65536 / 65281)


def test_truncated_image_stream(codecs, images):
    model, ctx = codecs["separate"]
    blob = compress(images[1], model, ctx).to_bytes()
    with pytest.raises(DecodeError):
        decode_image(blob[:-1], model, ctx)
    with pytest.raises(DecodeError):
        decode_image(blob + b"\x00", model, ctx)


def test_random_mutations_raise_only_codec_errors(codecs, images):
    model, ctx = codecs["mixed"]
    blob = compress(images[2], model, ctx).to_bytes()
    rng = np.random.default_rng(9)
    for _ in range(60):
        b = bytearray(blob)
        for pos in rng.integers(0, len(b), rng.integers(1, 4)):
            b[pos] = rng.integers(0, 256)
        try:
            decode_image(bytes(b), model, ctx)
        except GmsdError:
            pass
