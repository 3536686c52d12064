"""Full-scale training run on a real dataset with the reference defaults.

Expects <root>/{train,validation}/{defect,fresh,immature,mature}/*.png|jpg.
Trains the width-1 network (30.7M parameters) for 20 epochs with Adam at
1e-4, batch 32, and the standard augmentation suite, then evaluates,
quantizes, and writes everything under --out-dir:

    model.dfqn            float32 weights
    model.q.dfqn          int8 weights
    history.csv           per-epoch loss/accuracy
    eval-report.json      validation metrics

On one CPU core this is an overnight job. Pass --width/--epochs to scale it
down for a smoke run; that of course no longer reproduces the full recipe.
"""
import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from dragonfruit.data import load_dataset
from dragonfruit.metrics import compute_report, render_text, report_to_dict
from dragonfruit.modelfile import quantize_int8, quantized_forward, save_model, save_quantized
from dragonfruit.network import build_network, forward, total_parameters
from dragonfruit.training import TrainConfig, evaluate, train, write_history


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", required=True, help="dataset root with train/ and validation/")
    ap.add_argument("--out-dir", default="runs/full")
    ap.add_argument("--width", type=float, default=1.0)
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()

    def stamp(msg):
        print(f"[{time.perf_counter() - t0:8.0f}s] {msg}", flush=True)

    stamp(f"loading {args.data}")
    train_ds, val_ds = load_dataset(args.data)
    stamp(f"  {len(train_ds)} train / {len(val_ds)} validation"
          + (f" ({train_ds.skipped + val_ds.skipped} undecodable files skipped)"
             if train_ds.skipped + val_ds.skipped else ""))

    net = build_network(width=args.width, seed=args.seed)
    cfg = TrainConfig(epochs=args.epochs, seed=args.seed, width=args.width)
    stamp(f"network width {args.width}: {total_parameters(net):,} parameters")
    stamp(f"training {cfg.epochs} epochs, batch {cfg.batch_size}, lr {cfg.learning_rate}")

    def progress(r):
        stamp(
            f"  epoch {r.epoch:2d}  train {r.train_loss:.4f}/{r.train_accuracy:.4f}"
            f"  val {r.val_loss:.4f}/{r.val_accuracy:.4f}"
        )

    history, _ = train(net, train_ds, val_ds, cfg, on_epoch=progress)
    write_history(history, out_dir / "history.csv")
    save_model(net, out_dir / "model.dfqn")
    stamp(f"wrote {out_dir / 'model.dfqn'}")

    _, cm = evaluate(net, val_ds)
    report = compute_report(cm)
    print(render_text(cm, report))
    (out_dir / "eval-report.json").write_text(
        json.dumps(report_to_dict(report), indent=2) + "\n", encoding="utf-8"
    )

    qm = quantize_int8(net)
    save_quantized(qm, out_dir / "model.q.dfqn")
    images = np.stack([s.image for s in val_ds.samples])
    agree = 0
    for start in range(0, len(images), 16):
        chunk = images[start:start + 16]
        agree += int(
            (forward(net, chunk).argmax(axis=1)
             == quantized_forward(qm, chunk).argmax(axis=1)).sum()
        )
    fsize = (out_dir / "model.dfqn").stat().st_size
    qsize = (out_dir / "model.q.dfqn").stat().st_size
    stamp(f"quantized: {qsize:,} bytes ({qsize / fsize:.3f}x float),"
          f" top-1 agreement {agree}/{len(images)} on validation")
    stamp("done")
    return 0


if __name__ == "__main__":
    sys.exit(main())
