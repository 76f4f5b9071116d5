from .data import Dataset, dataset_from_dir, load_image_dir, synthetic_corpus, synthetic_dataset, synthetic_image, write_synthetic_dir
from .losses import MS_SSIM_WEIGHTS, RdTerms, distortion, ms_ssim, ms_ssim_levels, mse, rd_loss
from .trainer import (
    ARMS,
    ArmRun,
    CompareResult,
    HistoryRow,
    TrainConfig,
    TrainResult,
    arm_config,
    compare_modes,
    history_csv,
    read_history_csv,
    split_config_text,
    train,
    validate,
)

__all__ = [
    "ARMS",
    "ArmRun",
    "CompareResult",
    "Dataset",
    "HistoryRow",
    "MS_SSIM_WEIGHTS",
    "RdTerms",
    "TrainConfig",
    "TrainResult",
    "arm_config",
    "compare_modes",
    "dataset_from_dir",
    "distortion",
    "history_csv",
    "load_image_dir",
    "ms_ssim",
    "ms_ssim_levels",
    "mse",
    "rd_loss",
    "read_history_csv",
    "split_config_text",
    "synthetic_corpus",
    "synthetic_dataset",
    "synthetic_image",
    "train",
    "validate",
    "write_synthetic_dir",
]
