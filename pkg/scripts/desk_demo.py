"""Five-minute desk tour: train a narrow net on synthetic fruit, quantize, compare.

Runs entirely from generated images, so it needs no dataset on disk.

    python3 scripts/desk_demo.py
    python3 scripts/desk_demo.py --width 0.125 --epochs 60   # slower, converges further
"""
import argparse
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from dragonfruit.data import synth_dataset
from dragonfruit.metrics import compute_report, render_text
from dragonfruit.modelfile import (
    load_model,
    quantize_int8,
    quantized_forward,
    save_model,
    save_quantized,
)
from dragonfruit.network import build_network, forward
from dragonfruit.training import TrainConfig, evaluate, flatten_params, train


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--width", type=float, default=0.0625)
    ap.add_argument("--per-class", type=int, default=8)
    ap.add_argument("--epochs", type=int, default=40)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out-dir", default=None, help="where to leave the model files")
    args = ap.parse_args(argv)

    out_dir = Path(args.out_dir) if args.out_dir else Path(tempfile.mkdtemp(prefix="desk-demo-"))
    out_dir.mkdir(parents=True, exist_ok=True)

    print(f"synthesizing {args.per_class} images per class (seed {args.seed})")
    train_ds, val_ds = synth_dataset(per_class=args.per_class, seed=args.seed)
    print(f"  {len(train_ds)} train / {len(val_ds)} validation")

    net = build_network(width=args.width, seed=args.seed)
    cfg = TrainConfig(epochs=args.epochs, seed=args.seed, width=args.width)
    print(f"training width={args.width} for {args.epochs} epochs (lr {cfg.learning_rate})")
    start = time.perf_counter()

    def report(r):
        if r.epoch % 5 == 0 or r.epoch == args.epochs - 1:
            print(
                f"  epoch {r.epoch:3d}  loss {r.train_loss:.4f}"
                f"  train acc {r.train_accuracy:.3f}  val acc {r.val_accuracy:.3f}"
            )

    train(net, train_ds, val_ds, cfg, on_epoch=report)
    print(f"  done in {time.perf_counter() - start:.0f}s")

    _, cm = evaluate(net, val_ds)
    print()
    print(render_text(cm, compute_report(cm)))

    float_path = out_dir / "demo.dfqn"
    quant_path = out_dir / "demo.q.dfqn"
    save_model(net, float_path)
    qm = quantize_int8(net)
    save_quantized(qm, quant_path)
    ratio = quant_path.stat().st_size / float_path.stat().st_size

    images = np.stack([s.image for s in val_ds.samples])
    agree = int(
        (forward(net, images).argmax(axis=1) == quantized_forward(qm, images).argmax(axis=1)).sum()
    )
    print(f"float file    {float_path}  ({float_path.stat().st_size:,} bytes)")
    print(f"quantized     {quant_path}  ({quant_path.stat().st_size:,} bytes, {ratio:.2f}x)")
    print(f"top-1 agreement on validation: {agree}/{len(val_ds)}")

    # round-trip sanity: the file on disk reproduces the in-memory weights
    back = load_model(float_path)
    assert all(
        np.array_equal(a, b) for a, b in zip(flatten_params(net), flatten_params(back))
    )
    print("reload check: weights identical")
    return 0


if __name__ == "__main__":
    sys.exit(main())
