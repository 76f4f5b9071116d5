from .bdrate import MIN_POINTS, RdCurve, RdPoint, bd_rate, format_percent, rd_curves_csv, read_rd_curves
from .metrics import PSNR_IDENTICAL, ms_ssim_uint8, psnr
from .report import (
    CorpusEval,
    DegeneracyReport,
    ImageEval,
    corpus_degeneracy,
    diagnose_degeneracy,
    evaluate_corpus,
    evaluate_image,
    latent_weights,
    rd_point,
)

__all__ = [
    "CorpusEval",
    "DegeneracyReport",
    "ImageEval",
    "MIN_POINTS",
    "PSNR_IDENTICAL",
    "RdCurve",
    "RdPoint",
    "bd_rate",
    "corpus_degeneracy",
    "diagnose_degeneracy",
    "evaluate_corpus",
    "evaluate_image",
    "format_percent",
    "latent_weights",
    "ms_ssim_uint8",
    "psnr",
    "rd_curves_csv",
    "rd_point",
    "read_rd_curves",
]
