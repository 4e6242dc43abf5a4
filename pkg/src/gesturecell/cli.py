"""Command-line entry points.

    gesturecell gen-data   synthesize the labeled gesture dataset
    gesturecell train      train the classifier on a generated dataset
    gesturecell eval       print test-split metrics and the confusion matrix
    gesturecell replay     re-run a recorded session log
    gesturecell serve      run the live cell and the operator wire protocol
    gesturecell demo       headless scripted case study (exit code = result)

Data and checkpoints default to $GESTURECELL_ROOT (or ./runs).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

ROOT_ENV = "GESTURECELL_ROOT"


def data_root() -> Path:
    return Path(os.environ.get(ROOT_ENV, "runs"))


def cmd_gen_data(args) -> int:
    from .dataset import DatasetSpec, generate_dataset

    out = Path(args.out) if args.out else data_root() / "dataset"
    spec = DatasetSpec(
        out_dir=out,
        clean_per_class=args.clean_per_class,
        noisy_per_class=args.noisy_per_class,
        seed=args.seed,
        store=args.store,
    )
    t0 = time.time()
    manifest = generate_dataset(spec, progress=True, workers=args.workers)
    print(f"wrote {len(manifest.samples)} samples to {out} in {time.time() - t0:.0f}s")
    for split in ("train", "val", "test"):
        print(f"  {split}: {len(manifest.split_samples(split))}")
    return 0


def cmd_train(args) -> int:
    from .dataset import load_manifest
    from .net import TrainConfig, save_checkpoint, train

    data = Path(args.data) if args.data else data_root() / "dataset"
    out = Path(args.out) if args.out else data_root() / "model.gnet"
    manifest = load_manifest(data)
    config = TrainConfig(
        learning_rate=args.learning_rate, batch_size=args.batch_size,
        epochs=args.epochs, dropout_rate=args.dropout, seed=args.seed,
    )
    t0 = time.time()
    result = train(manifest, config, verbose=True)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, result.net)
    print(f"trained in {time.time() - t0:.0f}s; best val accuracy "
          f"{result.best_val_accuracy:.4f}; checkpoint -> {out}")
    return 0


def cmd_eval(args) -> int:
    from .dataset import load_manifest
    from .net import evaluate, featurize_split, load_checkpoint
    from .scene import GESTURE_NAMES

    data = Path(args.data) if args.data else data_root() / "dataset"
    checkpoint = Path(args.checkpoint) if args.checkpoint else data_root() / "model.gnet"
    manifest = load_manifest(data)
    net = load_checkpoint(checkpoint)
    x, y = featurize_split(manifest, args.split, net.normalizer)
    report = evaluate(net, x, y)
    print(report.to_text(list(GESTURE_NAMES)))
    return 0


def cmd_replay(args) -> int:
    from .formats import RCUB_MAGIC

    with open(args.log, "rb") as fh:
        magic = fh.read(5)
    if magic == RCUB_MAGIC:
        return _replay_cubes(args)

    from .gateway import replay_session

    report = replay_session(args.log, checkpoint_path=args.checkpoint)
    print(f"replayed {report.n_frames} frames "
          f"({report.truncated_records} truncated records skipped)")
    print(f"gesture events: {len(report.replayed_events)} replayed, "
          f"{len(report.recorded_events)} recorded, "
          f"identical: {report.events_identical}")
    print(f"final robot state matches: {report.final_state_matches}")
    return 0 if (report.events_identical and report.final_state_matches) else 1


def _replay_cubes(args) -> int:
    """Feed a raw RCUB1 cube sequence through the full pipeline."""
    from .formats import read_cube_sequence
    from .gateway import PipelineConfig, Session
    from .radar import extract_frame

    checkpoint = Path(args.checkpoint) if args.checkpoint else data_root() / "model.gnet"
    cubes = read_cube_sequence(args.log)
    session = Session(PipelineConfig(checkpoint_path=checkpoint, radar=cubes[0].config))
    for i, cube in enumerate(cubes):
        frame = extract_frame(cube, session.config.cfar, notch=session.config.notch,
                              frame_index=i)
        session.step(frame)
    # Idle frames flush any still-open gesture window.
    session.run(n_frames=session.config.segmenter.end_frames + 1)
    print(f"replayed {len(cubes)} cubes")
    for event in session.events:
        data = event["data"]
        print(f"  t={event['ts']:.2f}s {data['class_name']} ({data['confidence']:.3f})")
    return 0


def cmd_serve(args) -> int:
    from .gateway import PipelineConfig, Session
    from .scene import EnvironmentKind
    from .server import serve

    checkpoint = Path(args.checkpoint) if args.checkpoint else data_root() / "model.gnet"
    config = PipelineConfig(
        checkpoint_path=checkpoint,
        preset=args.preset,
        seed=args.seed,
        environment=EnvironmentKind(args.env),
    )
    session = Session(config)
    if args.record:
        session.start_recording(args.record)
    try:
        serve(session, args.host, args.port)
    finally:
        if args.record:
            session.stop_recording()
    return 0


def cmd_demo(args) -> int:
    from .gateway import run_demo
    from .scene import EnvironmentKind

    checkpoint = Path(args.checkpoint) if args.checkpoint else data_root() / "model.gnet"
    report = run_demo(
        args.test, checkpoint, seed=args.seed,
        env_kind=EnvironmentKind(args.env),
        record_path=args.record,
    )
    print(report.summary())
    return 0 if report.success else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gesturecell", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="synthesize the labeled gesture dataset")
    p.add_argument("--out", help=f"output dir (default ${ROOT_ENV}/dataset)")
    p.add_argument("--clean-per-class", type=int, default=200)
    p.add_argument("--noisy-per-class", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--store", choices=["detections", "cubes"], default="detections")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="train the gesture classifier")
    p.add_argument("--data", help=f"dataset dir (default ${ROOT_ENV}/dataset)")
    p.add_argument("--out", help=f"checkpoint path (default ${ROOT_ENV}/model.gnet)")
    p.add_argument("--epochs", type=int, default=14)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--dropout", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="print metrics and the confusion matrix")
    p.add_argument("--data", help=f"dataset dir (default ${ROOT_ENV}/dataset)")
    p.add_argument("--checkpoint", help=f"checkpoint (default ${ROOT_ENV}/model.gnet)")
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("replay", help="re-run a recorded session log")
    p.add_argument("log")
    p.add_argument("--checkpoint", default=None)
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("serve", help="run the live cell with the wire protocol")
    p.add_argument("--preset", default="test1",
                   choices=["test1", "test3", "test4", "test5",
                            "test1_pick_place", "test3_pour", "test4_estop",
                            "test5_guide_velocity"])
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--env", default="hand_only",
                   choices=["hand_only", "hand_plus_human", "hand_human_arm_behind"])
    p.add_argument("--record", default=None, help="write a session log here")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("demo", help="headless scripted case study")
    p.add_argument("test", choices=["test1", "test3"])
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--env", default="hand_only",
                   choices=["hand_only", "hand_plus_human", "hand_human_arm_behind"])
    p.add_argument("--record", default=None)
    p.set_defaults(fn=cmd_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
