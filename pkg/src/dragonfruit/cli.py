"""Command-line interface: train, eval, classify, quantize, synth-data, serve.

Exit codes: 0 success, 1 usage, 2 data/ingestion, 3 model format,
4 runtime/divergence.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import modelfile, service
from .data import load_dataset, synth_dataset, write_dataset
from .errors import ConfigError, DivergenceError, IngestionError, ModelFormatError
from .metrics import compute_report, render_text, report_to_dict
from .network import CLASS_NAMES, Mode, build_network, forward, total_parameters
from .training import TrainConfig, evaluate, train, write_history

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_MODEL = 3
EXIT_RUNTIME = 4


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; this tool reserves 2 for data errors."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="dragonfruit",
        description="Train, quantize, and serve the dragon-fruit quality grading CNN.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("train", help="train a model", formatter_class=fmt)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", metavar="DIR", help="dataset root with train/ and validation/")
    src.add_argument("--synthetic", type=int, metavar="N", help="use N generated images per class")
    p.add_argument("--out", required=True, metavar="PATH", help="model file to write")
    p.add_argument("--width", type=float, default=1.0, help="channel width multiplier in (0, 1]")
    p.add_argument("--epochs", type=int, default=20, help="training epochs")
    p.add_argument("--batch", type=int, default=32, help="batch size")
    p.add_argument("--lr", type=float, default=0.0001, help="Adam learning rate")
    p.add_argument("--seed", type=int, default=0, help="seed for init, shuffle, augment, dropout")
    p.add_argument("--history", metavar="PATH", default=None,
                   help="epoch history CSV (default: <out> with .history.csv suffix)")

    p = sub.add_parser("eval", help="evaluate a model on a dataset", formatter_class=fmt)
    p.add_argument("--model", required=True, metavar="PATH")
    p.add_argument("--data", required=True, metavar="DIR")
    p.add_argument("--split", choices=["train", "validation"], default="validation",
                   help="which split to evaluate")
    p.add_argument("--report", metavar="PATH", default="eval-report.json",
                   help="where to write the JSON report")

    p = sub.add_parser("classify", help="classify image files", formatter_class=fmt)
    p.add_argument("--model", required=True, metavar="PATH")
    p.add_argument("images", nargs="+", metavar="IMAGE")

    p = sub.add_parser("quantize", help="write an int8 copy of a float model", formatter_class=fmt)
    p.add_argument("--model", required=True, metavar="PATH", help="float model file")
    p.add_argument("--out", required=True, metavar="PATH", help="quantized file to write")

    p = sub.add_parser("synth-data", help="materialize the synthetic dataset", formatter_class=fmt)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--per-class", type=int, default=8, help="images per class across both splits")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("serve", help="run the HTTP inspection service", formatter_class=fmt)
    p.add_argument("--model", required=True, metavar="PATH")
    p.add_argument("--addr", default=service.DEFAULT_ADDR, help="bind address HOST:PORT")
    p.add_argument("--quantized", action="store_true", help="require a quantized container")
    p.add_argument("--ui-dir", metavar="DIR", default=None, help="static assets for /ui")

    return parser


def _load_split_data(args) -> tuple:
    if getattr(args, "synthetic", None) is not None:
        if args.synthetic < 1:
            raise ConfigError("--synthetic must be >= 1")
        return synth_dataset(args.synthetic, seed=args.seed)
    return load_dataset(args.data)


def cmd_train(args) -> int:
    cfg = TrainConfig(
        learning_rate=args.lr, batch_size=args.batch, epochs=args.epochs,
        seed=args.seed, width=args.width,
    )
    print(
        f"config: lr={cfg.learning_rate} batch={cfg.batch_size} epochs={cfg.epochs} "
        f"width={cfg.width} seed={cfg.seed}"
    )
    train_ds, val_ds = _load_split_data(args)
    print(f"data: {len(train_ds)} train / {len(val_ds)} validation samples "
          f"({train_ds.skipped + val_ds.skipped} skipped)")
    net = build_network(width=cfg.width, seed=cfg.seed)
    print(f"model: {total_parameters(net)} parameters")

    def report(r) -> None:
        print(
            f"epoch {r.epoch:3d} train_loss={r.train_loss:.4f} train_acc={r.train_accuracy:.4f} "
            f"val_loss={r.val_loss:.4f} val_acc={r.val_accuracy:.4f}"
        )

    history, _ = train(net, train_ds, val_ds, cfg, on_epoch=report)
    modelfile.save_model(net, args.out)
    history_path = args.history or str(Path(args.out).with_suffix(".history.csv"))
    write_history(history, history_path)
    if history:
        last = history[-1]
        print(f"final: train_acc={last.train_accuracy:.4f} val_acc={last.val_accuracy:.4f}")
    else:
        print("final: no epochs run (epochs=0); initial model saved")
    print(f"wrote {args.out} and {history_path}")
    return EXIT_OK


def _load_for_inference(path):
    loaded = modelfile.load_any(path)
    if isinstance(loaded, modelfile.QuantizedModel):
        return modelfile.dequantize(loaded)
    return loaded


def cmd_eval(args) -> int:
    net = _load_for_inference(args.model)
    train_ds, val_ds = load_dataset(args.data)
    ds = train_ds if args.split == "train" else val_ds
    loss, cm = evaluate(net, ds)
    report = compute_report(cm)
    print(render_text(cm, report))
    print(f"loss: {loss:.6f}")
    payload = report_to_dict(report)
    payload["loss"] = loss
    payload["split"] = args.split
    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {args.report}")
    return EXIT_OK


def cmd_classify(args) -> int:
    from .data import decode_and_resize  # local import keeps startup light

    net = _load_for_inference(args.model)
    failures = 0
    for image_path in args.images:
        try:
            data = Path(image_path).read_bytes()
            image = decode_and_resize(data)
        except (OSError, IngestionError) as exc:
            print(f"{image_path}\terror\t{exc}", file=sys.stderr)
            failures += 1
            continue
        probs = forward(net, image, Mode.INFER)
        label = CLASS_NAMES[int(probs.argmax())]
        cols = " ".join(f"{name}={p:.6f}" for name, p in zip(CLASS_NAMES, probs))
        print(f"{image_path}\t{label}\t{cols}")
    return EXIT_DATA if failures else EXIT_OK


def cmd_quantize(args) -> int:
    net = modelfile.load_model(args.model)
    qm = modelfile.quantize_int8(net)
    modelfile.save_quantized(qm, args.out)
    in_size = Path(args.model).stat().st_size
    out_size = Path(args.out).stat().st_size
    worst = 0.0
    bound = 0.0
    for p, qw in zip(net.params, qm.weights):
        if p is None:
            continue
        back = modelfile.dequantize_tensor(qw[0])
        worst = max(worst, float(abs(p[0] - back).max()))
        bound = max(bound, qw[0].scale / 2.0)
    print(f"float file:     {in_size} bytes")
    print(f"quantized file: {out_size} bytes ({out_size / in_size:.4f}x)")
    print(f"max round-trip error: {worst:.3e} (bound scale/2 = {bound:.3e})")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_synth_data(args) -> int:
    train_ds, val_ds = synth_dataset(args.per_class, seed=args.seed)
    written = write_dataset(train_ds, val_ds, args.out)
    print(f"wrote {written} images under {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    service.serve(args.model, addr=args.addr, quantized=args.quantized, ui_dir=args.ui_dir)
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "classify": cmd_classify,
    "quantize": cmd_quantize,
    "synth-data": cmd_synth_data,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError,) as exc:
        print(f"dragonfruit: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IngestionError as exc:
        print(f"dragonfruit: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ModelFormatError as exc:
        print(f"dragonfruit: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except DivergenceError as exc:
        print(f"dragonfruit: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"dragonfruit: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
