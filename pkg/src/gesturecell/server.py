"""TCP service exposing a running session over the wire protocol.

The session loop stays single-threaded; per-client reader threads only
validate and enqueue commands (acks are sent after the loop executes them),
and a per-client writer thread drains a bounded telemetry queue, dropping
oldest messages first under backpressure. Commands are never dropped.
"""

from __future__ import annotations

import logging
import socket
import threading
from collections import deque

from . import protocol
from .gateway import Session

log = logging.getLogger(__name__)

CLIENT_QUEUE_LIMIT = 512


class ClientConnection:
    def __init__(self, sock: socket.socket, address, server: "GatewayServer"):
        self.sock = sock
        self.address = address
        self.server = server
        self.role = "observer"
        self.queue: deque = deque()
        self.dropped = 0
        self.lock = threading.Lock()
        self.wakeup = threading.Condition(self.lock)
        self.closed = False

    def send(self, message: dict) -> None:
        with self.lock:
            if self.closed:
                return
            if len(self.queue) >= CLIENT_QUEUE_LIMIT:
                self.queue.popleft()
                self.dropped += 1
            self.queue.append(message)
            self.wakeup.notify()

    def writer_loop(self) -> None:
        while True:
            with self.lock:
                while not self.queue and not self.closed:
                    self.wakeup.wait(timeout=1.0)
                if self.closed and not self.queue:
                    return
                message = self.queue.popleft() if self.queue else None
            if message is None:
                continue
            try:
                self.sock.sendall(protocol.encode_message(message))
            except OSError:
                self.close()
                return

    def close(self) -> None:
        with self.lock:
            if self.closed:
                return
            self.closed = True
            self.wakeup.notify_all()
        try:
            self.sock.close()
        except OSError:
            pass
        self.server.forget(self)


class GatewayServer:
    """Accepts any number of observers and at most one controller."""

    def __init__(self, session: Session, host: str = "127.0.0.1", port: int = 8787):
        self.session = session
        self.host = host
        self.port = port
        self.clients: list[ClientConnection] = []
        self.controller: ClientConnection | None = None
        self.lock = threading.Lock()
        self._listener: socket.socket | None = None
        session.subscribe(self.broadcast)

    def broadcast(self, message: dict) -> None:
        with self.lock:
            clients = list(self.clients)
        for client in clients:
            client.send(message)

    def forget(self, client: ClientConnection) -> None:
        with self.lock:
            if client in self.clients:
                self.clients.remove(client)
            if self.controller is client:
                self.controller = None

    def start(self) -> int:
        """Begin accepting clients; returns the bound port (port=0 picks one)."""
        self._listener = socket.create_server((self.host, self.port))
        self._listener.settimeout(0.5)
        self.port = self._listener.getsockname()[1]
        threading.Thread(target=self._accept_loop, daemon=True).start()
        log.info("gateway listening on %s:%d", self.host, self.port)
        return self.port

    def stop(self) -> None:
        with self.lock:
            clients = list(self.clients)
        for client in clients:
            client.close()
        if self._listener is not None:
            self._listener.close()
            self._listener = None

    def _accept_loop(self) -> None:
        while self._listener is not None:
            try:
                sock, address = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            client = ClientConnection(sock, address, self)
            with self.lock:
                self.clients.append(client)
            threading.Thread(target=self._reader_loop, args=(client,), daemon=True).start()
            threading.Thread(target=client.writer_loop, daemon=True).start()

    def _handle_hello(self, client: ClientConnection, msg: dict) -> None:
        wanted = msg.get("role", "observer")
        with self.lock:
            if wanted == "controller" and self.controller is None:
                self.controller = client
                client.role = "controller"
            else:
                client.role = "observer"
        client.send({
            "type": "welcome",
            "role": client.role,
            "protocol": protocol.PROTOCOL_VERSION,
            "preset": self.session.preset_name,
        })

    def _handle_command(self, client: ClientConnection, msg: dict) -> None:
        try:
            protocol.validate_command(msg)
        except protocol.ProtocolError as exc:
            client.send(protocol.ack(msg.get("id", -1), False, str(exc)))
            return
        if client.role != "controller" and msg["name"] != "estop":
            client.send(protocol.ack(msg["id"], False, "controller slot required"))
            return
        command_id = msg["id"]

        def on_done(ok: bool, error: str | None) -> None:
            client.send(protocol.ack(command_id, ok, error))

        self.session.enqueue_command(msg["name"], msg.get("args", {}), on_done=on_done)

    def _reader_loop(self, client: ClientConnection) -> None:
        decoder = protocol.FrameDecoder()
        while not client.closed:
            try:
                data = client.sock.recv(65536)
            except OSError:
                break
            if not data:
                break
            try:
                for msg in decoder.feed(data):
                    kind = msg.get("type")
                    if kind == "hello":
                        self._handle_hello(client, msg)
                    elif kind == "command":
                        self._handle_command(client, msg)
                    else:
                        client.send({"type": "ack", "id": -1, "ok": False,
                                     "error": f"unexpected message type {kind!r}"})
            except protocol.ProtocolError as exc:
                log.warning("client %s protocol error: %s", client.address, exc)
                break
        client.close()


def serve(session: Session, host: str, port: int) -> None:
    """Run the fixed-rate loop in the calling thread until interrupted."""
    server = GatewayServer(session, host, port)
    server.start()
    period = 1.0 / session.config.effective_loop_hz
    log.info("loop at %.1f Hz; Ctrl-C to stop", 1.0 / period)
    try:
        while True:
            session.run(n_frames=25, realtime=True)
    except KeyboardInterrupt:
        log.info("shutting down")
    finally:
        server.stop()
