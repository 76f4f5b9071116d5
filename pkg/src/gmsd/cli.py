"""Command-line interface: ``gmsd <subcommand> [flags]``.

Exit codes: 0 success, 2 usage or configuration error, 3 data or format
error, 4 numerical failure. Errors are reported as one line on stderr:
``gmsd: error[<code>]: <message>``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FormatError, GmsdError, UsageError

log = logging.getLogger("gmsd")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _read_config(path: str | None):
    from .train import TrainConfig, split_config_text
    from .network import ModelConfig

    if path is None:
        return ModelConfig(), TrainConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file {path} not found")
    return split_config_text(p.read_text())


def _load_dataset(source: str, seed: int):
    """``synthetic`` / ``synthetic:<n>`` builds the bundled generator's corpus; anything else is a directory."""
    from .train import dataset_from_dir, synthetic_dataset

    if source.startswith("synthetic"):
        _, _, count = source.partition(":")
        try:
            n = int(count) if count else 256
        except ValueError:
            raise ConfigurationError(f"bad synthetic dataset size in {source!r}") from None
        if n < 1:
            raise ConfigurationError("synthetic dataset needs at least one image")
        return synthetic_dataset(n_train=n, n_val=max(2, min(16, n // 4)), seed=seed)
    if not Path(source).is_dir():
        raise ConfigurationError(f"--data {source}: not a directory")
    return dataset_from_dir(source)


def _load_model(path: str):
    from .network import CodecModel

    if not Path(path).is_file():
        raise ConfigurationError(f"model checkpoint {path} not found")
    return CodecModel.load(path)


def _progress(row) -> None:
    log.info("iter %d  train %.5f  val %.5f  bpp %.4f  D %.5f",
             row.iteration, row.train_loss, row.val_loss, row.rate_bpp, row.distortion)


def cmd_train(args) -> int:
    from .evalkit.plots import plot_loss_curves
    from .network import CodecModel
    from .train import CompareResult, ArmRun, history_csv, train

    model_cfg, cfg = _read_config(args.config)
    if args.iterations is not None:
        cfg = cfg.with_(iterations=args.iterations)
    cfg = cfg.with_(seed=args.seed)
    dataset = _load_dataset(args.data, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = CodecModel(model_cfg, seed=args.seed)
    result = train(model, dataset, cfg, checkpoint_dir=out, progress=_progress)
    model.save(out / "model.ckpt")
    (out / "history.csv").write_text(history_csv(result.history))
    arm = model_cfg.arm
    plot_loss_curves(CompareResult([ArmRun(arm, args.seed, model.num_parameters(), result.history)], (arm,),
                                   (args.seed,)), out / "history.png")
    print(f"trained {arm} model ({model.num_parameters()} parameters): final validation loss "
          f"{result.final_val_loss:.6f} -> {out / 'model.ckpt'}")
    return 0


def cmd_encode(args) -> int:
    from .coder import compress
    from .imageio import read_image, to_float

    model = _load_model(args.model)
    img = read_image(args.input)
    enc = compress(to_float(img), model)
    blob = enc.to_bytes()
    Path(args.output).write_bytes(blob)
    h, w = img.shape[-2:]
    print(f"{args.output}: {len(blob)} bytes, {8 * len(blob) / (w * h):.4f} bpp")
    return 0


def cmd_decode(args) -> int:
    from .coder import decode_image
    from .imageio import write_image

    model = _load_model(args.model)
    p = Path(args.input)
    if not p.is_file():
        raise ConfigurationError(f"bitstream {args.input} not found")
    dec = decode_image(p.read_bytes(), model)
    write_image(args.output, dec.image)
    print(f"{args.output}: {dec.header.width}x{dec.header.height}")
    return 0


def cmd_eval(args) -> int:
    from .evalkit import evaluate_corpus
    from .evalkit.plots import plot_eval_points

    model = _load_model(args.model)
    report = evaluate_corpus(model, args.data)
    out = Path(args.out)
    out.write_text(report.to_csv())
    png = plot_eval_points(report, out.with_suffix(".png"))
    print(f"{len(report.rows)} images: mean bpp {report.mean('bpp'):.4f}, "
          f"PSNR {report.mean('psnr'):.3f} dB, MS-SSIM {report.mean('ms_ssim'):.5f} -> {out}, {png}")
    return 0


def _parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigurationError(f"--seeds expects comma-separated integers, got {text!r}") from None
    if not seeds or len(set(seeds)) != len(seeds):
        raise ConfigurationError("--seeds must list at least one seed, without repeats")
    return seeds


def cmd_compare(args) -> int:
    from .evalkit.plots import plot_loss_curves
    from .train import compare_modes

    model_cfg, cfg = _read_config(args.config)
    if args.iterations is not None:
        cfg = cfg.with_(iterations=args.iterations)
    seeds = _parse_seeds(args.seeds)
    dataset = _load_dataset(args.data, 0)
    arms = ("mixed", "separate", "widened") if args.widened else ("mixed", "separate")
    out = Path(args.out)
    result = compare_modes(dataset, cfg, seeds, model_cfg, arms=arms, out_dir=out, resume=args.resume,
                           progress=lambda arm, seed, row: _progress(row))
    (out / "summary.csv").write_text(result.summary_csv())
    (out / "curves.csv").write_text(result.curves_csv())
    plot_loss_curves(result, out / "loss_curves.png")
    counts = result.parameter_counts()
    for arm in arms:
        delta = float(np.median(result.deltas(arm)))
        print(f"{arm:9s} params {counts[arm]:8d}  median final val loss {result.median_final(arm):.6f}  "
              f"median delta vs mixed {delta:+.6f}")
    return 0


def cmd_diagnose(args) -> int:
    from .evalkit import diagnose_degeneracy
    from .evalkit.plots import plot_degeneracy_map
    from .imageio import read_image, to_float

    model = _load_model(args.model)
    report = diagnose_degeneracy(model, to_float(read_image(args.input)))
    prefix = Path(args.out_prefix)
    if prefix.parent and not prefix.parent.exists():
        prefix.parent.mkdir(parents=True)
    csv_path, pgm_path = report.write(prefix)
    png = prefix.with_name(prefix.name + "_degeneracy.png")
    plot_degeneracy_map(report.map, report.K, png, title=model.config.arm)
    s = report.summary
    print(f"mean {s['mean']:.5f}  median {s['median']:.5f}  fraction below {s['threshold']} "
          f"{s['frac_below_threshold']:.4f} -> {csv_path}, {pgm_path}, {png}")
    return 0


def _single_curve(path: str):
    from .evalkit import read_rd_curves

    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"RD curve file {path} not found")
    curves = read_rd_curves(p.read_text())
    if len(curves) != 1:
        raise FormatError(f"{path} holds {len(curves)} curves; expected exactly one")
    return curves[0]


def cmd_bdrate(args) -> int:
    from .evalkit import bd_rate, format_percent
    from .evalkit.plots import plot_rd_curves

    anchor, test = _single_curve(args.anchor), _single_curve(args.test)
    value = bd_rate(anchor, test)
    if args.plot:
        plot_rd_curves([anchor, test], args.plot)
    print(f"BD-rate {test.label} vs {anchor.label} ({anchor.metric}): {format_percent(value)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gmsd", description="Learned image codec with mixed or separate hyperprior decoders.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    s = sub.add_parser("train", help="train one model and write checkpoint + history CSV")
    s.add_argument("--config", help="key=value config file (model and training keys)")
    s.add_argument("--data", required=True, help="image directory, or synthetic[:N] for the bundled generator")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--iterations", type=int, help="override the configured iteration budget")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("encode", help="compress a PPM/PGM image to a bitstream")
    s.add_argument("--model", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("decode", help="decode a bitstream to a PPM image")
    s.add_argument("--model", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("eval", help="encode/decode every image in a directory and report bpp, PSNR, MS-SSIM")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True, help="per-image CSV; a scatter plot is written next to it as .png")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("compare", help="train mixed vs separate (and widened) arms over several seeds")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--seeds", default="0,1,2", help="comma-separated seeds")
    s.add_argument("--out", required=True, help="output directory (reused runs are picked up)")
    s.add_argument("--iterations", type=int)
    s.add_argument("--widened", action=argparse.BooleanOptionalAction, default=True,
                   help="include the parameter-matched single-decoder arm")
    s.add_argument("--resume", action=argparse.BooleanOptionalAction, default=True,
                   help="reuse finished runs found in --out")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("diagnose", help="mixture-weight degeneracy map for one image")
    s.add_argument("--model", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("bdrate", help="BD-rate between two RD-curve CSVs")
    s.add_argument("--anchor", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--plot", help="also render both curves to this image file")
    s.set_defaults(func=cmd_bdrate)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except GmsdError as exc:
        print(f"gmsd: error[{exc.exit_code}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"gmsd: error[3]: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
