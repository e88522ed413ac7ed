"""``lhic`` command line: train | encode | decode | eval | bench | ablate.

Exit codes: 0 success, 1 usage, 2 I/O, 3 codec or bitstream, 4 model mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import container
from .bench import BenchConfig, read_csv, run_ablation, run_bench, write_dat
from .errors import CheckpointError, CodecError, ContainerError, LHICError, ModelMismatchError
from .imageio import read_image, write_image
from .metrics import quality_report
from .models import Autoencoder, ModelConfig, load_model, save_model
from .pipeline import EncodeOptions, HybridCodec
from .training import TrainConfig, extract_patches, train

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_CODEC, EXIT_MODEL = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(args, payload: dict, text: str) -> None:
    print(json.dumps(payload) if args.json else text)


def _model_args(p):
    p.add_argument("--compact-scale", type=int, choices=(8, 16, 32))
    p.add_argument("--activation", choices=("prelu", "relu"))


def _check_model_flags(args, model: Autoencoder) -> None:
    cfg = model.config
    if args.compact_scale is not None and args.compact_scale != cfg.compact_scale:
        raise ModelMismatchError(f"--compact-scale {args.compact_scale} but model uses {cfg.compact_scale}")
    if args.activation is not None and args.activation != cfg.activation:
        raise ModelMismatchError(f"--activation {args.activation} but model uses {cfg.activation}")


def cmd_train(args) -> int:
    mcfg = ModelConfig(
        compact_scale=args.compact_scale or 16,
        base_filters=args.base_filters,
        max_filters=args.max_filters,
        dropout_p=args.dropout,
        activation=args.activation or "prelu",
        seed=args.seed,
    )
    tcfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        patch_size=args.patch_size,
        patches_per_image=args.patches_per_image,
        rotation=not args.no_augment,
        scaling=not args.no_augment,
        seed=args.seed,
        max_steps=args.max_steps,
    )
    dataset = extract_patches(args.data, tcfg)
    model = Autoencoder(mcfg)
    result = train(model, dataset, tcfg, args.out, resume_from=args.resume)
    final = Path(args.out) / "model.lhicm"
    save_model(model, final)
    _emit(
        args,
        {"model": str(final), "steps": result.steps, "patches": len(dataset), "final_loss": result.losses[-1] if result.losses else None},
        f"trained {result.steps} steps on {len(dataset)} patches -> {final}",
    )
    return EXIT_OK


def cmd_encode(args) -> int:
    model = load_model(args.model)
    _check_model_flags(args, model)
    opts = EncodeOptions(
        scaling=args.scaling,
        quality=args.quality,
        lossless_codec=args.codec_lossless,
        lossy_codec=args.codec_lossy,
        clip_bound=args.clip_bound,
        enhancement=not args.no_enhancement,
    )
    img = read_image(args.input)
    data = container.serialize(HybridCodec(model).encode(img, opts))
    Path(args.output).write_bytes(data)
    h, w = img.shape[:2]
    rate = container.bpp(data, w, h)
    _emit(args, {"output": str(args.output), "bytes": len(data), "bpp": rate}, f"{args.output}: {len(data)} bytes, {rate:.4f} bits/pixel/channel")
    return EXIT_OK


def cmd_decode(args) -> int:
    model = load_model(args.model)
    _check_model_flags(args, model)
    b = container.parse(Path(args.input).read_bytes())
    img = HybridCodec(model).decode(b, force=args.force)
    write_image(args.output, img)
    _emit(args, {"output": str(args.output), "width": b.width, "height": b.height}, f"{args.output}: {b.width}x{b.height}")
    return EXIT_OK


def cmd_eval(args) -> int:
    ref, dec = read_image(args.input), read_image(args.decoded)
    h, w = ref.shape[:2]
    rate = container.bpp(Path(args.bitstream).read_bytes(), w, h) if args.bitstream else float("nan")
    report = quality_report(ref, dec, rate)
    _emit(args, report.to_dict(), f"PSNR {report.psnr_db:.4f} dB  MS-SSIM {report.ms_ssim:.6f}  bpp {rate:.4f}")
    return EXIT_OK


def _parse_grid(text: str | None) -> list[int] | None:
    return [int(v) for v in text.split(",")] if text else None


def cmd_bench(args) -> int:
    model = load_model(args.model) if args.model else None
    grid = _parse_grid(args.qualities)
    cfg = BenchConfig(
        corpus=args.corpus,
        codecs=args.codecs,
        qualities={c: grid for c in args.codecs} if grid else {},
        output=args.output,
        workers=args.workers,
    )
    rows = run_bench(cfg, model)
    if args.dat:
        overlays = [r for path in args.overlay for r in read_csv(path)]
        write_dat(rows, args.dat, overlays)
    failed = sum(r.status != "ok" for r in rows)
    _emit(args, {"output": str(args.output), "rows": len(rows), "failed": failed}, f"{len(rows)} rows -> {args.output} ({failed} failed)")
    return EXIT_OK


def cmd_ablate(args) -> int:
    rows = run_ablation(args.models, args.corpus, _parse_grid(args.qualities) or [4], args.scaling, args.codec_lossy, args.output)
    present = sum(r["status"] == "ok" for r in rows)
    _emit(args, {"output": str(args.output), "rows": rows}, f"{len(rows)} ablation rows ({present} with models) -> {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")
    p = _Parser(prog="lhic", description="Layered hybrid image compression")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", parents=[common], help="train CompNet/RecNet on a directory of lossless images")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True, help="directory for checkpoints, log and model.lhicm")
    _model_args(t)
    t.add_argument("--base-filters", type=int, default=64)
    t.add_argument("--max-filters", type=int, default=512)
    t.add_argument("--dropout", type=float, default=0.2)
    t.add_argument("--epochs", type=int, default=40)
    t.add_argument("--batch-size", type=int, default=20)
    t.add_argument("--lr", type=float, default=1e-4)
    t.add_argument("--patch-size", type=int, default=64)
    t.add_argument("--patches-per-image", type=int, default=50)
    t.add_argument("--max-steps", type=int)
    t.add_argument("--no-augment", action="store_true")
    t.add_argument("--resume", help="epoch checkpoint to continue from")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("encode", parents=[common], help="image -> .lhic")
    e.add_argument("--model", required=True)
    e.add_argument("--input", required=True)
    e.add_argument("--output", required=True)
    e.add_argument("--quality", type=int, default=4)
    e.add_argument("--scaling", choices=("shift", "minmax", "clip"), default="clip")
    e.add_argument("--clip-bound", type=int, default=120)
    e.add_argument("--codec-lossless", default="builtin-lossless")
    e.add_argument("--codec-lossy", default="builtin-dct")
    e.add_argument("--no-enhancement", action="store_true", help="emit the base layer only")
    _model_args(e)
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", parents=[common], help=".lhic -> image")
    d.add_argument("--model", required=True)
    d.add_argument("--input", required=True)
    d.add_argument("--output", required=True)
    d.add_argument("--force", action="store_true", help="decode even if the model hash differs")
    _model_args(d)
    d.set_defaults(func=cmd_decode)

    v = sub.add_parser("eval", parents=[common], help="PSNR / MS-SSIM / bpp of a decoded image")
    v.add_argument("--input", required=True, help="original image")
    v.add_argument("--decoded", required=True)
    v.add_argument("--bitstream", help=".lhic file for the rate")
    v.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", parents=[common], help="rate-distortion sweep over a corpus")
    b.add_argument("--corpus", required=True)
    b.add_argument("--output", required=True)
    b.add_argument("--model")
    b.add_argument("--codecs", nargs="+", default=["lhic:clip", "builtin-dct"])
    b.add_argument("--qualities", help="comma-separated grid applied to every codec")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--dat", help="also write gnuplot-ready averages here")
    b.add_argument("--overlay", nargs="*", default=[], help="external RD CSVs merged into --dat")
    b.set_defaults(func=cmd_bench)

    a = sub.add_parser("ablate", parents=[common], help="compact scale x activation grid")
    a.add_argument("--models", required=True, help="directory with s<scale>_<activation>.lhicm files")
    a.add_argument("--corpus", required=True)
    a.add_argument("--output", required=True)
    a.add_argument("--qualities")
    a.add_argument("--scaling", choices=("shift", "minmax", "clip"), default="clip")
    a.add_argument("--codec-lossy", default="builtin-dct")
    a.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ModelMismatchError, CheckpointError) as exc:
        code, err = EXIT_MODEL, exc
    except (CodecError, ContainerError) as exc:
        code, err = EXIT_CODEC, exc
    except OSError as exc:
        code, err = EXIT_IO, exc
    except (LHICError, ValueError) as exc:
        code, err = EXIT_USAGE, exc
    if args.json:
        print(json.dumps({"error": type(err).__name__, "message": str(err), "exit_code": code}))
    print(f"lhic: error: {err}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
