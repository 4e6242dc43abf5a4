#!/usr/bin/env python3
"""Record a short telemetry log for the operator-UI headless render tests.

Usage: python scripts/record_ui_fixture.py <checkpoint> <out.jsonl>

Plays one gesture through the full pipeline and dumps every telemetry
message (one JSON object per line) exactly as the wire would carry it.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gesturecell.gateway import PipelineConfig, Session


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__)
        return 2
    checkpoint, out_path = sys.argv[1], sys.argv[2]
    session = Session(PipelineConfig(
        checkpoint_path=checkpoint, preset="test1_pick_place", seed=42,
    ))
    messages = []
    session.subscribe(messages.append)
    session.enqueue_command("play_gesture", {"class_name": "swipe_right"})
    session.run(n_frames=60)
    session.enqueue_command("inject_gesture", {"class_name": "up"})
    session.run(n_frames=40)
    with open(out_path, "w") as fh:
        for msg in messages:
            fh.write(json.dumps(msg, separators=(",", ":")) + "\n")
    print(f"wrote {len(messages)} telemetry messages to {out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
