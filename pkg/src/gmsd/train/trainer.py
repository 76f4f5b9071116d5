"""Rate-distortion training loop and the decoder-mode comparison."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable

import numpy as np

from ..autodiff import AdamState, Tensor, adam_step, fnv1a64, no_grad
from ..errors import ConfigurationError, NumericalError
from ..network import CodecModel, ModelConfig
from ..network.config import DISTORTIONS, _fmt, parse_config_text
from .data import Dataset
from .losses import rd_loss

log = logging.getLogger(__name__)

# the reference schedule spends its last 80k of 1.08M iterations at lr / 10
FINAL_PHASE_FRACTION = 80_000 / 1_080_000
VALIDATION_SEED = 20_240_601
MAX_NAN_STREAK = 3
HISTORY_FIELDS = ("iteration", "train_loss", "val_loss", "rate_bpp", "distortion")


@dataclass(frozen=True)
class TrainConfig:
    lmbda: float = 12.0
    distortion: str = "ms_ssim"
    batch_size: int = 4
    crop_size: int = 64
    iterations: int = 2000
    base_lr: float = 1e-4
    final_lr: float = 1e-5
    final_phase: int = -1  # -1: derive from FINAL_PHASE_FRACTION
    seed: int = 0
    val_interval: int = 250
    checkpoint_interval: int = 0

    def __post_init__(self):
        if self.distortion not in DISTORTIONS:
            raise ConfigurationError(f"distortion must be one of {DISTORTIONS}, got {self.distortion!r}")
        if not self.lmbda > 0:
            raise ConfigurationError(f"lambda must be positive, got {self.lmbda}")
        if self.crop_size < 64 or self.crop_size % 64:
            raise ConfigurationError(f"crop_size must be a positive multiple of 64, got {self.crop_size}")
        if self.batch_size < 1 or self.val_interval < 1:
            raise ConfigurationError("batch_size and val_interval must be >= 1")
        if self.iterations < 0 or self.checkpoint_interval < 0:
            raise ConfigurationError("iterations and checkpoint_interval must be >= 0")
        if not (self.base_lr > 0 and self.final_lr > 0):
            raise ConfigurationError("learning rates must be positive")

    @property
    def final_phase_length(self) -> int:
        if self.final_phase >= 0:
            return min(self.final_phase, self.iterations)
        return int(round(self.iterations * FINAL_PHASE_FRACTION))

    def lr_at(self, iteration: int) -> float:
        """Learning rate for 1-based ``iteration``."""
        return self.final_lr if iteration > self.iterations - self.final_phase_length else self.base_lr

    def with_(self, **changes) -> "TrainConfig":
        return replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{k}={_fmt(v)}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> "TrainConfig":
        return cls(**parse_config_text(text, {f.name: f.type for f in fields(cls)}))


def split_config_text(text: str) -> tuple[ModelConfig, TrainConfig]:
    """One ``key=value`` file configures both the model and the training run.

    ``lambda`` and ``distortion`` are shared by both halves.
    """
    model_schema = {f.name: f.type for f in fields(ModelConfig)}
    train_schema = {f.name: f.type for f in fields(TrainConfig)}
    values = parse_config_text(text, {**model_schema, **train_schema})
    model_cfg = ModelConfig(**{k: v for k, v in values.items() if k in model_schema})
    shared = {"lmbda": model_cfg.lmbda, "distortion": model_cfg.distortion}
    train_vals = {**shared, **{k: v for k, v in values.items() if k in train_schema}}
    return model_cfg, TrainConfig(**train_vals)


@dataclass
class HistoryRow:
    iteration: int
    train_loss: float
    val_loss: float
    rate_bpp: float
    distortion: float


@dataclass
class TrainResult:
    model: CodecModel
    history: list[HistoryRow] = field(default_factory=list)
    skipped_steps: int = 0

    @property
    def final_val_loss(self) -> float:
        return self.history[-1].val_loss


def history_csv(rows: list[HistoryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HISTORY_FIELDS)
    for r in rows:
        w.writerow([r.iteration] + [repr(float(getattr(r, k))) for k in HISTORY_FIELDS[1:]])
    return buf.getvalue()


def read_history_csv(text: str) -> list[HistoryRow]:
    rows = list(csv.DictReader(io.StringIO(text)))
    try:
        return [HistoryRow(int(r["iteration"]), *(float(r[k]) for k in HISTORY_FIELDS[1:])) for r in rows]
    except (KeyError, ValueError) as exc:
        raise ConfigurationError(f"malformed history CSV: {exc}") from None


def sample_batch(images: np.ndarray, batch_size: int, crop: int, rng: np.random.Generator) -> np.ndarray:
    n, _, h, w = images.shape
    if h < crop or w < crop:
        raise ConfigurationError(f"training images ({h}x{w}) are smaller than crop_size {crop}")
    idx = rng.integers(0, n, size=batch_size)
    ys = rng.integers(0, h - crop + 1, size=batch_size)
    xs = rng.integers(0, w - crop + 1, size=batch_size)
    flips = rng.random(batch_size) < 0.5
    out = np.empty((batch_size, 3, crop, crop))
    for b in range(batch_size):
        patch = images[idx[b], :, ys[b]:ys[b] + crop, xs[b]:xs[b] + crop]
        out[b] = patch[:, :, ::-1] if flips[b] else patch
    return out


def validate(model: CodecModel, images: np.ndarray, cfg: TrainConfig) -> tuple[float, float, float]:
    """Mean (loss, bpp, distortion) on the validation set.

    The noise proxy is drawn from a fixed stream so repeated validations, and
    different models, see the same perturbation.
    """
    rng = np.random.default_rng(VALIDATION_SEED)
    n, _, h, w = images.shape
    crop = min(h, w) // 64 * 64
    if crop == 0:
        raise ConfigurationError(f"validation images ({h}x{w}) are smaller than 64 pixels")
    total_bits = total_d = 0.0
    with no_grad():
        for start in range(0, n, cfg.batch_size):
            chunk = images[start:start + cfg.batch_size, :, :crop, :crop]
            terms = rd_loss(Tensor(chunk.astype(model.dtype)), model, cfg.lmbda, cfg.distortion, rng)
            total_bits += float(terms.rate_bits.data)
            total_d += float(terms.distortion.data) * len(chunk)
    bpp = total_bits / (n * crop * crop)
    d = total_d / n
    scale = 255.0**2 if cfg.distortion == "mse" else 1.0
    return bpp + cfg.lmbda * scale * d, bpp, d


def _grads_finite(params) -> bool:
    return all(p.grad is None or np.isfinite(p.grad).all() for p in params)


def train(
    model: CodecModel,
    dataset: Dataset,
    cfg: TrainConfig,
    checkpoint_dir: str | Path | None = None,
    progress: Callable[[HistoryRow], None] | None = None,
) -> TrainResult:
    """Adam on the noisy-latent RD loss; validation every ``val_interval`` steps and at the end.

    Data order, noise and crops come from streams derived from ``cfg.seed``,
    so two runs with the same seed (and architectures with the same data
    needs) see identical batches.
    """
    if not isinstance(dataset, Dataset):
        raise ConfigurationError("train() needs a Dataset with a validation split")
    data_rng = np.random.default_rng([cfg.seed, 1])
    noise_rng = np.random.default_rng([cfg.seed, 2])
    params = [p for p in model.parameters() if p.trainable]
    state = AdamState()
    result = TrainResult(model)

    def record(it: int, train_loss: float) -> None:
        val_loss, bpp, d = validate(model, dataset.val, cfg)
        row = HistoryRow(it, train_loss, val_loss, bpp, d)
        result.history.append(row)
        if progress is not None:
            progress(row)

    record(0, math.nan)
    running, count, streak = 0.0, 0, 0
    for it in range(1, cfg.iterations + 1):
        batch = sample_batch(dataset.train, cfg.batch_size, cfg.crop_size, data_rng)
        model.zero_grad()
        terms = rd_loss(Tensor(batch.astype(model.dtype)), model, cfg.lmbda, cfg.distortion, noise_rng)
        loss = float(terms.loss.data)
        if math.isfinite(loss):
            terms.loss.backward()
        if not math.isfinite(loss) or not _grads_finite(params):
            streak += 1
            result.skipped_steps += 1
            log.warning("iteration %d: non-finite loss or gradient, step skipped", it)
            if streak >= MAX_NAN_STREAK:
                raise NumericalError(f"{MAX_NAN_STREAK} consecutive non-finite steps ending at iteration {it}")
            continue
        streak = 0
        adam_step(params, state, cfg.lr_at(it))
        running += loss
        count += 1
        if checkpoint_dir is not None and cfg.checkpoint_interval and it % cfg.checkpoint_interval == 0:
            model.save(Path(checkpoint_dir) / f"iter_{it:07d}.ckpt")
        if it % cfg.val_interval == 0 or it == cfg.iterations:
            record(it, running / count if count else math.nan)
            running, count = 0.0, 0
    model.zero_grad()
    model.invalidate()
    return result


# -- decoder-mode comparison ---------------------------------------------------

ARMS = ("mixed", "separate", "widened")


def arm_config(base: ModelConfig, arm: str) -> ModelConfig:
    if arm == "widened":
        return base.with_(mode="mixed", widened=True)
    if arm in ("mixed", "separate"):
        return base.with_(mode=arm, widened=False)
    raise ConfigurationError(f"unknown arm {arm!r}; expected one of {ARMS}")


@dataclass
class ArmRun:
    arm: str
    seed: int
    num_parameters: int
    history: list[HistoryRow]
    checkpoint: Path | None = None

    @property
    def final_val_loss(self) -> float:
        return self.history[-1].val_loss


@dataclass
class CompareResult:
    runs: list[ArmRun]
    arms: tuple[str, ...]
    seeds: tuple[int, ...]

    def run(self, arm: str, seed: int) -> ArmRun:
        for r in self.runs:
            if r.arm == arm and r.seed == seed:
                return r
        raise KeyError((arm, seed))

    def final_losses(self, arm: str) -> np.ndarray:
        return np.array([self.run(arm, s).final_val_loss for s in self.seeds])

    def median_final(self, arm: str) -> float:
        return float(np.median(self.final_losses(arm)))

    def deltas(self, arm: str, baseline: str = "mixed") -> np.ndarray:
        """Per-seed final-loss difference ``arm - baseline`` (negative: arm is better)."""
        return self.final_losses(arm) - self.final_losses(baseline)

    def parameter_counts(self) -> dict[str, int]:
        return {arm: self.run(arm, self.seeds[0]).num_parameters for arm in self.arms}

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["arm", "seed", "parameters", "final_val_loss", "delta_vs_mixed"])
        for seed in self.seeds:
            base = self.run("mixed", seed).final_val_loss if "mixed" in self.arms else math.nan
            for arm in self.arms:
                r = self.run(arm, seed)
                w.writerow([arm, seed, r.num_parameters, repr(r.final_val_loss), repr(r.final_val_loss - base)])
        for arm in self.arms:
            delta = float(np.median(self.deltas(arm))) if "mixed" in self.arms else math.nan
            w.writerow([arm, "median", self.parameter_counts()[arm], repr(self.median_final(arm)), repr(delta)])
        return buf.getvalue()

    def curves_csv(self) -> str:
        """Aligned validation curves, one column per (arm, seed)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = [(a, s) for s in self.seeds for a in self.arms]
        w.writerow(["iteration"] + [f"{a}_seed{s}" for a, s in cols])
        base = self.run(*cols[0]).history
        for i, row in enumerate(base):
            w.writerow([row.iteration] + [repr(self.run(a, s).history[i].val_loss) for a, s in cols])
        return buf.getvalue()


def _manifest(model_cfg: ModelConfig, cfg: TrainConfig, dataset: Dataset) -> str:
    digest = fnv1a64(dataset.train.tobytes() + dataset.val.tobytes())
    train_text = cfg.with_(seed=0).to_text()
    return f"# model\n{model_cfg.to_text()}# train (seed varies per run)\n{train_text}dataset_fnv={digest:016x}\n"


def compare_modes(
    dataset: Dataset,
    cfg: TrainConfig,
    seeds,
    model_cfg: ModelConfig | None = None,
    arms=("mixed", "separate"),
    out_dir: str | Path | None = None,
    resume: bool = True,
    progress: Callable[[str, int, HistoryRow], None] | None = None,
) -> CompareResult:
    """Train every arm for every seed under identical data order and budget.

    With ``out_dir`` each run leaves ``<arm>_seed<s>.ckpt`` and
    ``<arm>_seed<s>_history.csv``; with ``resume`` finished runs are read back
    instead of retrained, provided the directory's manifest matches.
    """
    model_cfg = model_cfg or ModelConfig(lmbda=cfg.lmbda, distortion=cfg.distortion)
    seeds = tuple(int(s) for s in seeds)
    arms = tuple(arms)
    if not seeds:
        raise ConfigurationError("compare_modes needs at least one seed")
    for arm in arms:
        arm_config(model_cfg, arm)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        manifest = _manifest(model_cfg, cfg, dataset)
        mpath = out / "manifest.txt"
        if mpath.exists() and resume and mpath.read_text() != manifest:
            raise ConfigurationError(f"{out} holds results for a different configuration; use a fresh directory")
        mpath.write_text(manifest)

    runs = []
    for seed in seeds:
        for arm in arms:
            acfg = arm_config(model_cfg, arm)
            stem = f"{arm}_seed{seed}"
            ckpt = out / f"{stem}.ckpt" if out is not None else None
            hist = out / f"{stem}_history.csv" if out is not None else None
            if resume and ckpt is not None and ckpt.exists() and hist.exists():
                model = CodecModel.load(ckpt)
                runs.append(ArmRun(arm, seed, model.num_parameters(), read_history_csv(hist.read_text()), ckpt))
                log.info("%s: reusing finished run", stem)
                continue
            model = CodecModel(acfg, seed=seed)
            cb = (lambda row, a=arm, s=seed: progress(a, s, row)) if progress else None
            res = train(model, dataset, cfg.with_(seed=seed), progress=cb)
            if out is not None:
                # history last, so a crash mid-save never leaves a run that looks finished
                model.save(ckpt)
                hist.write_text(history_csv(res.history))
            runs.append(ArmRun(arm, seed, model.num_parameters(), res.history, ckpt))
    return CompareResult(runs, arms, seeds)
