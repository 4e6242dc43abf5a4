#!/usr/bin/env python3
"""End-to-end experiment: synthesize the desk-scale dataset, train the
classifier, and print test-split metrics plus the confusion matrix.

Usage: python scripts/reproduce_results.py [workdir]

Roughly 10 minutes on a 2-core machine; artifacts land in the workdir
(default ./runs) and are reused by `gesturecell demo` / `gesturecell serve`.
"""

import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gesturecell.dataset import DatasetSpec, generate_dataset, load_manifest
from gesturecell.net import TrainConfig, evaluate, featurize_split, save_checkpoint, train
from gesturecell.scene import GESTURE_NAMES


def main() -> int:
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs")
    data_dir = root / "dataset"
    checkpoint = root / "model.gnet"

    if (data_dir / "manifest.json").exists():
        print(f"reusing dataset at {data_dir}")
        manifest = load_manifest(data_dir)
    else:
        print(f"generating desk-scale dataset at {data_dir} ...")
        t0 = time.time()
        manifest = generate_dataset(DatasetSpec(out_dir=data_dir, seed=0), progress=True)
        print(f"  {len(manifest.samples)} samples in {time.time() - t0:.0f}s")

    print("training ...")
    t0 = time.time()
    result = train(manifest, TrainConfig(epochs=14, seed=0), verbose=True)
    print(f"  {time.time() - t0:.0f}s, best val accuracy {result.best_val_accuracy:.4f}")
    save_checkpoint(checkpoint, result.net)
    print(f"  checkpoint -> {checkpoint}")

    x_test, y_test = featurize_split(manifest, "test", result.net.normalizer)
    report = evaluate(result.net, x_test, y_test)
    print(report.to_text(list(GESTURE_NAMES)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
