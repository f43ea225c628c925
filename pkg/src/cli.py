"""Command-line interface: train, encode, decode, eval, bdrate, erf and attn-dump subcommands."""

import argparse
import logging
import os
import sys
from typing import List, Optional, Sequence

import numpy as np
import torch
from dotenv import load_dotenv

from src.models.bitstream import Bitstream
from src.models.config import ModelConfig
from src.models.errors import InputError, SchError
from src.models.rd_curve import RDCurve
from src.network.sch_model import SchCompressionModel, count_parameters
from src.services import analyzer
from src.services.checkpoint_store import default_model_path, load_model
from src.services.codec_service import ImageCodec
from src.services.trainer import Trainer
from src.utils.config_file import log_resolved, resolve_configs
from src.utils.dataset import center_crops, crop_pipeline, list_images
from src.utils.image_io import load_image, save_png

logger = logging.getLogger(__name__)

PRESETS = {"default": ModelConfig, "toy": ModelConfig.toy, "tiny": ModelConfig.tiny}


def _device() -> str:
    return os.getenv("SCH_DEVICE", "cpu")


def _model_dir() -> str:
    return os.getenv("SCH_MODEL_DIR", "checkpoints")


def _load(path: Optional[str]) -> SchCompressionModel:
    model, checkpoint = load_model(path or default_model_path(), _device())
    log_resolved(model.config, checkpoint.train_config)
    return model


def _point(text: Optional[str]):
    if text is None:
        return None
    try:
        row, col = (int(part) for part in text.split(","))
    except ValueError as e:
        raise InputError(f"--point expects row,col, got {text!r}") from e
    return row, col


def cmd_train(args) -> int:
    model_config, train_config = resolve_configs(
        args.config,
        args.set,
        flags={"max_steps": args.max_steps, "seed": args.seed, "lmbda": args.lmbda},
        base=PRESETS[args.preset](),
    )
    torch.manual_seed(train_config.seed)
    np.random.seed(train_config.seed)
    model = SchCompressionModel(model_config)
    logger.info(f"Parameters: {count_parameters(model)}")

    paths = list_images(args.train_dir, train_config.extensions)
    batches = crop_pipeline(
        paths, train_config.crop_size, train_config.seed, train_config.batch_size, train_config.num_workers
    )
    eval_batches = None
    if args.eval_dir:
        eval_paths = list_images(args.eval_dir, train_config.extensions)
        eval_batches = center_crops(eval_paths, train_config.crop_size, train_config.batch_size)

    trainer = Trainer(model, train_config, output_dir=args.output_dir or _model_dir(), device=_device())
    history = trainer.fit(batches, eval_batches)
    if history:
        print(f"steps={len(history)} initial_loss={history[0].loss:.4f} final_loss={history[-1].loss:.4f}")
    return 0


def cmd_encode(args) -> int:
    codec = ImageCodec(_load(args.model), _device())
    encoded = codec.encode(load_image(args.input))
    payload = encoded.bitstream.to_bytes()
    os.makedirs(os.path.dirname(os.path.abspath(args.output)), exist_ok=True)
    with open(args.output, "wb") as f:
        f.write(payload)
    if args.reconstruction:
        save_png(encoded.reconstruction, args.reconstruction)
    print(f"bytes={len(payload)} bpp={encoded.bpp:.4f} estimated_bpp={encoded.estimated_bpp:.4f}")
    return 0


def cmd_decode(args) -> int:
    if not os.path.isfile(args.input):
        raise InputError(f"bitstream not found: {args.input}")
    with open(args.input, "rb") as f:
        bitstream = Bitstream.from_bytes(f.read())
    image = ImageCodec(_load(args.model), _device()).decode(bitstream)
    save_png(image, args.output)
    print(f"size={image.shape[1]}x{image.shape[0]}")
    return 0


def cmd_eval(args) -> int:
    models = args.model or [None]
    curve_path = args.curve or os.path.join(args.output_dir, "rd_curve.csv")
    for index, path in enumerate(models):
        label = os.path.splitext(os.path.basename(path))[0] if path else "default"
        if len(models) > 1:
            label = f"{index}_{label}"
        model = _load(path)
        logger.info(f"Evaluating {label}: {count_parameters(model)['total']} parameters")
        report = analyzer.eval_dataset(
            model,
            args.input,
            output_dir=os.path.join(args.output_dir, label),
            curve_path=curve_path,
            label=label,
            device=_device(),
        )
        print(
            f"model={label} bpp={report.point.bpp:.4f} psnr={report.point.psnr:.2f} "
            f"estimate_gap={report.estimate_gap:.2f}%"
        )
    if args.plot:
        analyzer.plot_rd_curves([RDCurve.from_csv(curve_path)], args.plot)
    return 0


def cmd_bdrate(args) -> int:
    anchor = RDCurve.from_csv(args.anchor)
    test = RDCurve.from_csv(args.test)
    value = analyzer.bd_rate(anchor, test, piecewise=args.piecewise)
    if abs(value) < 0.005:
        value = 0.0
    print(f"{value:.2f}%")
    return 0


def cmd_erf(args) -> int:
    model = _load(args.model)
    result = analyzer.erf_map(model, load_image(args.input), args.tap, _point(args.point), args.threshold)
    if args.output:
        save_png(result.to_image(), args.output)
    print(f"tap={args.tap} point={result.point[0]},{result.point[1]} area={result.area()}")
    return 0


def cmd_attn_dump(args) -> int:
    model = _load(args.model)
    maps = analyzer.dump_channel_attention(model, load_image(args.input), args.block)
    maps.save_pngs(args.output_dir)
    print(f"module={maps.module_name} maps={len(maps)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sch", description="Space-channel hybrid learned image codec")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="Train a model for one lambda")
    train.add_argument("--config", help="key=value config file")
    train.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override a config key")
    train.add_argument("--preset", choices=sorted(PRESETS), default="default")
    train.add_argument("--train-dir", required=True)
    train.add_argument("--eval-dir")
    train.add_argument("-o", "--output-dir", help="Checkpoint directory (default: $SCH_MODEL_DIR)")
    train.add_argument("--max-steps", type=int)
    train.add_argument("--seed", type=int)
    train.add_argument("--lmbda", type=float)
    train.set_defaults(func=cmd_train)

    encode = sub.add_parser("encode", help="Encode an image into a bitstream")
    encode.add_argument("input")
    encode.add_argument("-m", "--model")
    encode.add_argument("-o", "--output", required=True)
    encode.add_argument("--reconstruction", help="Also write the encoder-side reconstruction")
    encode.set_defaults(func=cmd_encode)

    decode = sub.add_parser("decode", help="Decode a bitstream into a PNG")
    decode.add_argument("input")
    decode.add_argument("-m", "--model")
    decode.add_argument("-o", "--output", required=True)
    decode.set_defaults(func=cmd_decode)

    evaluate = sub.add_parser("eval", help="Measure bpp and PSNR on an image directory")
    evaluate.add_argument("input")
    evaluate.add_argument("-m", "--model", action="append", help="Checkpoint; repeat for one RD point per model")
    evaluate.add_argument("-o", "--output-dir", required=True)
    evaluate.add_argument("--curve", help="RD curve CSV to create or extend")
    evaluate.add_argument("--plot", help="Write an RD plot of the curve")
    evaluate.set_defaults(func=cmd_eval)

    bdrate = sub.add_parser("bdrate", help="BD-rate of a test curve against an anchor curve")
    bdrate.add_argument("anchor")
    bdrate.add_argument("test")
    bdrate.add_argument("--piecewise", action="store_true", help="Monotone piecewise cubic instead of cubic fit")
    bdrate.set_defaults(func=cmd_bdrate)

    erf = sub.add_parser("erf", help="Effective receptive field of one feature point")
    erf.add_argument("input")
    erf.add_argument("-m", "--model")
    erf.add_argument("--tap", default="channel_attention")
    erf.add_argument("--point", help="row,col in the tapped feature map (default: center)")
    erf.add_argument("--threshold", type=float, default=0.3)
    erf.add_argument("-o", "--output")
    erf.set_defaults(func=cmd_erf)

    attn = sub.add_parser("attn-dump", help="Export per-window channel attention maps")
    attn.add_argument("input")
    attn.add_argument("-m", "--model")
    attn.add_argument("--block", type=int, default=0)
    attn.add_argument("-o", "--output-dir", required=True)
    attn.set_defaults(func=cmd_attn_dump)
    return parser


def format_error(error: SchError) -> str:
    message = error.message.replace('"', "'")
    return f'error={type(error).__name__} code={error.exit_code} message="{message}"'


def run(argv: Sequence[str]) -> int:
    """Run one subcommand.

    Returns:
        0 on success, the error's exit code for codec errors, 1 for anything unexpected.
    """
    args = build_parser().parse_args(list(argv))
    try:
        return args.func(args)
    except SchError as e:
        logger.debug(f"{args.command} failed", exc_info=True)
        print(format_error(e), file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception(f"Error running {args.command}: {e}")
        print(f'error={type(e).__name__} code=1 message="{e}"', file=sys.stderr)
        return 1


def configure():
    """Load .env and set up logging from LOG_LEVEL."""
    load_dotenv()
    logging.basicConfig(
        level=os.getenv("LOG_LEVEL", "INFO"),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


def main(argv: Optional[List[str]] = None) -> int:
    """Console entry point: configure the environment, then run one subcommand."""
    configure()
    try:
        return run(sys.argv[1:] if argv is None else argv)
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return 130
