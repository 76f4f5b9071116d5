"""Degeneracy diagnosis and corpus evaluation on real bitstreams."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..autodiff import Tensor, no_grad
from ..coder import CoderContext, compress, decode_image, quantized_latents
from ..entropy import COLLAPSE_THRESHOLD, min_weight_channel_average, summarize, weights_bhwck
from ..entropy.degeneracy import write_degeneracy
from ..errors import ConfigurationError, GmsdError
from ..imageio import list_images, pad_to_multiple, read_image, to_float
from ..network import CodecModel
from ..network.codec import HYPER_STRIDE
from .metrics import ms_ssim_uint8, psnr


def latent_weights(model: CodecModel, img: np.ndarray) -> np.ndarray:
    """Mixture weights ``(C, H, W, K)`` over the quantized latent grid of one float image."""
    x = pad_to_multiple(np.asarray(img, dtype=np.float64), HYPER_STRIDE)
    y_hat, z_hat = quantized_latents(model, x)
    with no_grad():
        params = model.gmm_params(Tensor(y_hat[None].astype(model.dtype)), Tensor(z_hat[None].astype(model.dtype)))
    return params.weights.data[0].astype(np.float64)


@dataclass
class DegeneracyReport:
    map: np.ndarray  # (H, W) over the latent grid
    K: int
    summary: dict

    def write(self, prefix) -> tuple[Path, Path]:
        return write_degeneracy(prefix, self.map, self.K)


def diagnose_degeneracy(model: CodecModel, img: np.ndarray, threshold: float = COLLAPSE_THRESHOLD) -> DegeneracyReport:
    """Channel-averaged minimum mixture weight at every latent position of ``img`` ``(3, H, W)``."""
    w = latent_weights(model, img)
    dmap = min_weight_channel_average(weights_bhwck(w[None]))[0]
    return DegeneracyReport(dmap, model.config.K, summarize(dmap, threshold))


def corpus_degeneracy(model: CodecModel, images, threshold: float = COLLAPSE_THRESHOLD) -> dict:
    """Summary statistics over the pooled maps of every image in ``images``."""
    maps = [diagnose_degeneracy(model, img, threshold).map.ravel() for img in images]
    if not maps:
        raise ConfigurationError("degeneracy corpus is empty")
    return summarize(np.concatenate(maps), threshold)


EVAL_FIELDS = ("image", "width", "height", "bytes", "bpp", "psnr", "ms_ssim")


@dataclass
class ImageEval:
    image: str
    width: int
    height: int
    bytes: int
    bpp: float
    psnr: float
    ms_ssim: float


@dataclass
class CorpusEval:
    rows: list[ImageEval]

    def mean(self, key: str) -> float:
        vals = np.array([getattr(r, key) for r in self.rows], dtype=np.float64)
        return float(np.mean(vals))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(EVAL_FIELDS)
        for r in self.rows:
            w.writerow([r.image, r.width, r.height, r.bytes, repr(r.bpp), repr(r.psnr), repr(r.ms_ssim)])
        w.writerow(["mean", "", "", repr(self.mean("bytes")), repr(self.mean("bpp")),
                    repr(self.mean("psnr")), repr(self.mean("ms_ssim"))])
        return buf.getvalue()


def evaluate_image(model: CodecModel, name: str, img_u8: np.ndarray, context: CoderContext | None = None) -> ImageEval:
    """Encode, decode from the bytes, and score the decoded 8-bit image against the original."""
    enc = compress(to_float(img_u8), model, context)
    blob = enc.to_bytes()
    dec = decode_image(blob, model, context)
    if not np.array_equal(dec.image, enc.reconstruction):
        raise GmsdError(f"{name}: decoder output differs from the encoder-side reconstruction")
    h, w = img_u8.shape[-2:]
    return ImageEval(name, w, h, len(blob), 8.0 * len(blob) / (w * h),
                     psnr(img_u8, dec.image), ms_ssim_uint8(img_u8, dec.image))


def evaluate_corpus(model: CodecModel, image_dir) -> CorpusEval:
    paths = list_images(image_dir)
    if not paths:
        raise ConfigurationError(f"no PPM/PGM images in {image_dir}")
    ctx = CoderContext(model)
    return CorpusEval([evaluate_image(model, p.name, read_image(p), ctx) for p in paths])


def rd_point(corpus: CorpusEval, metric: str = "psnr") -> tuple[float, float]:
    """``(bpp, quality)`` corpus means; infinite PSNRs (lossless images) make the point unusable."""
    q = corpus.mean(metric)
    if not math.isfinite(q):
        raise ConfigurationError(f"corpus mean {metric} is not finite")
    return corpus.mean("bpp"), q
