import pytest

from gesturecell.protocol import (
    FrameDecoder,
    ProtocolError,
    ack,
    encode_message,
    telemetry,
    validate_command,
    validate_telemetry,
)


class TestFraming:
    def test_roundtrip_single_message(self):
        msg = {"type": "ack", "id": 1, "ok": True, "error": None}
        decoder = FrameDecoder()
        out = list(decoder.feed(encode_message(msg)))
        assert out == [msg]

    def test_handles_partial_and_coalesced_chunks(self):
        messages = [
            {"type": "ack", "id": i, "ok": True, "error": None} for i in range(5)
        ]
        blob = b"".join(encode_message(m) for m in messages)
        decoder = FrameDecoder()
        got = []
        # Feed one byte at a time.
        for i in range(len(blob)):
            got.extend(decoder.feed(blob[i : i + 1]))
        assert got == messages

    def test_bad_length_prefix_rejected(self):
        decoder = FrameDecoder()
        with pytest.raises(ProtocolError):
            list(decoder.feed(b"abc\n{}"))

    def test_bad_payload_rejected(self):
        decoder = FrameDecoder()
        with pytest.raises(ProtocolError):
            list(decoder.feed(b"3\nnot"))


class TestCommandValidation:
    def command(self, name, args):
        return {"type": "command", "id": 7, "name": name, "args": args}

    def test_valid_commands(self):
        validate_command(self.command("inject_gesture", {"class_name": "swipe_right"}))
        validate_command(self.command("play_gesture", {"class_name": "s"}))
        validate_command(self.command("set_proximity", {"distance": 0.5}))
        validate_command(self.command("estop", {}))
        validate_command(self.command("release_estop", {}))
        validate_command(self.command("load_preset", {"preset": "test1"}))
        validate_command(self.command("set_speed_override", {"fraction": 0.5}))

    def test_unknown_command_rejected(self):
        with pytest.raises(ProtocolError, match="unknown command"):
            validate_command(self.command("self_destruct", {}))

    def test_unknown_gesture_rejected(self):
        with pytest.raises(ProtocolError, match="unknown gesture"):
            validate_command(self.command("inject_gesture", {"class_name": "wave"}))

    def test_missing_and_extra_args_rejected(self):
        with pytest.raises(ProtocolError, match="missing arg"):
            validate_command(self.command("set_proximity", {}))
        with pytest.raises(ProtocolError, match="unexpected args"):
            validate_command(self.command("estop", {"force": True}))

    def test_wrong_types_rejected(self):
        with pytest.raises(ProtocolError):
            validate_command(self.command("set_proximity", {"distance": "close"}))
        with pytest.raises(ProtocolError):
            validate_command({"type": "command", "id": "x", "name": "estop", "args": {}})


class TestTelemetryValidation:
    def test_gesture_event(self):
        msg = telemetry("gesture_recognition", 0, 1.5,
                        {"class_name": "swipe_cw", "confidence": 0.93})
        validate_telemetry(msg)
        msg = telemetry("gesture_recognition", 1, 1.6,
                        {"class_name": "no_gesture", "confidence": 0.41})
        validate_telemetry(msg)
        with pytest.raises(ProtocolError):
            telemetry("gesture_recognition", 2, 1.7, {"class_name": "circle", "confidence": 1.0})

    def test_robot_state_requires_fields(self):
        good = {
            "sim_time": 1.0, "guide_pos": 0.5, "joints": [0.0] * 6,
            "gripper": 1.0, "speed_scale": 1.0, "estopped": False,
        }
        validate_telemetry(telemetry("robot_state", 0, 1.0, good))
        bad = dict(good)
        bad["joints"] = [0.0] * 5
        with pytest.raises(ProtocolError):
            validate_telemetry({"type": "telemetry", "stream": "robot_state",
                                "seq": 0, "ts": 0.0, "data": bad})

    def test_point_cloud_shape(self):
        validate_telemetry(telemetry("point_cloud", 0, 0.0, {
            "frame_index": 3,
            "detections": [[1.0, 0.3, 0.2, 0.0, 0.3]],
        }))
        with pytest.raises(ProtocolError):
            telemetry("point_cloud", 0, 0.0, {"frame_index": 0, "detections": [[1.0]]})

    def test_unknown_stream_rejected(self):
        with pytest.raises(ProtocolError):
            telemetry("surveillance", 0, 0.0, {})

    def test_ack_shape(self):
        assert ack(3, True) == {"type": "ack", "id": 3, "ok": True, "error": None}
        assert ack(4, False, "nope")["error"] == "nope"
