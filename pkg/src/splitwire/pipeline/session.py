"""Client-side split pipeline: filter, quantize, frame, send, log.

Two transports:

* ``simulated`` - uplink seconds come from latency.transfer_time, so a run
  is a deterministic function of (images, profile, channel, filter, seed).
* ``socket``    - frames go over a real TCP stream to a PipelineServer,
  paced by a token bucket at the channel rate; uplink seconds are measured
  wall clock, while head and tail compute stay virtual (from the profile).

Per-image head time is charged as t_head + t_filter_extra (the filter branch
runs alongside the head on every image). A dropped image sends nothing and
pays no tail time.
"""

from __future__ import annotations

import csv
import hashlib
import socket
import time
from dataclasses import dataclass

import numpy as np

from ..codec import dequantize, quantize8, quantize16, passthrough32
from ..errors import ArgumentError, ProtocolError, TransportError
from ..latency import ChannelModel, ExecutionProfile, transfer_time
from ..tensor import Shape, Tensor, random_fill
from .filtergate import FilterModel, filter_decide
from .wire import MsgType, WireMessage, decode_message, encode_message, quantized_to_message

__all__ = [
    "ImageRecord",
    "SessionLog",
    "TokenBucket",
    "make_stream",
    "run_session",
    "tensor_digest",
]


def tensor_digest(t: Tensor) -> bytes:
    """SHA-256 over the row-major little-endian float32 bytes."""
    return hashlib.sha256(t.data.astype("<f4").tobytes()).digest()


@dataclass(frozen=True)
class ImageRecord:
    image_id: int
    filtered: bool
    bytes_sent: int
    t_head: float
    t_uplink: float
    t_tail: float

    @property
    def total(self) -> float:
        return self.t_head + self.t_uplink + self.t_tail


@dataclass
class SessionLog:
    mode: str
    records: list[ImageRecord]

    @property
    def total_bytes(self) -> int:
        return sum(r.bytes_sent for r in self.records)

    @property
    def drop_rate(self) -> float:
        if not self.records:
            return 0.0
        return sum(r.filtered for r in self.records) / len(self.records)

    @property
    def mean_total(self) -> float:
        return float(np.mean([r.total for r in self.records]))

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["image_id", "filtered", "bytes_sent",
                             "t_head", "t_uplink", "t_tail", "total"])
            for r in self.records:
                writer.writerow([r.image_id, int(r.filtered), r.bytes_sent,
                                 repr(r.t_head), repr(r.t_uplink),
                                 repr(r.t_tail), repr(r.total)])


def make_stream(n: int, shape, p_empty: float, seed: int,
                lo: float = -1.0, hi: float = 1.0) -> list[tuple[Tensor, bool]]:
    """Synthetic labeled image stream: n (bottleneck tensor, is_empty) pairs."""
    if n < 1:
        raise ArgumentError(f"n must be >= 1, got {n}")
    if not isinstance(shape, Shape):
        shape = Shape(shape)
    # label stream is kept distinct from the session's score stream so the
    # same seed can drive both without coupling them
    rng = np.random.default_rng([0x57F3A, seed])
    labels = rng.random(n) < p_empty
    return [(random_fill(shape, seed * 100003 + i, lo, hi), bool(labels[i]))
            for i in range(n)]


class TokenBucket:
    """Byte-rate pacing with 10 ms granularity for socket sends."""

    def __init__(self, rate_bps: float, tick_s: float = 0.01):
        self.rate_bytes = rate_bps / 8.0
        self.tick_s = tick_s
        self.chunk = max(1, int(self.rate_bytes * tick_s))

    def send_all(self, sock: socket.socket, data: bytes) -> None:
        start = time.monotonic()
        sent = 0
        view = memoryview(data)
        while sent < len(data):
            end = min(sent + self.chunk, len(data))
            sock.sendall(view[sent:end])
            sent = end
            due = start + sent / self.rate_bytes
            delay = due - time.monotonic()
            if delay > 0:
                time.sleep(delay)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            raise TransportError("connection closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> WireMessage | None:
    """Read one frame from a stream; None on a clean end-of-stream."""
    try:
        first = sock.recv(1)
    except socket.timeout:
        return None
    if not first:
        return None
    head = first + _recv_exact(sock, 6)
    if head[:4] != b"SCWP":
        raise ProtocolError(f"bad magic {head[:4]!r}")
    ndim = head[6]
    rest = _recv_exact(sock, 4 * ndim + 16)
    payload_len = int.from_bytes(rest[-8:], "big")
    if payload_len > (1 << 32):
        raise ProtocolError(f"implausible payload_len {payload_len}")
    payload = _recv_exact(sock, payload_len) if payload_len else b""
    return decode_message(head + rest + payload)


def _quantize_for_width(t: Tensor, width: int):
    if width == 8:
        return quantize8(t)
    if width == 16:
        return quantize16(t)
    if width == 32:
        return passthrough32(t)
    raise ArgumentError(f"width must be 8, 16 or 32, got {width}")


def run_session(images: list[tuple[Tensor, bool]], prof: ExecutionProfile,
                ch: ChannelModel, fm: FilterModel, mode: str = "simulated",
                seed: int = 0, width: int = 8,
                server_addr: tuple[str, int] | None = None,
                connect_timeout_s: float = 5.0) -> SessionLog:
    """Run the head side over a labeled image stream and log every image."""
    if mode not in ("simulated", "socket"):
        raise ArgumentError(f"mode must be 'simulated' or 'socket', got {mode!r}")
    if not images:
        raise ArgumentError("need at least one image")

    rng = np.random.default_rng([0x5C0FE5, seed])
    labels = np.array([empty for _, empty in images], dtype=bool)
    scores = fm.sample_scores(labels, rng)

    head_s = prof.t_head + prof.t_filter_extra
    records: list[ImageRecord] = []

    sock = None
    bucket = None
    if mode == "socket":
        if server_addr is None:
            raise ArgumentError("socket mode needs server_addr")
        try:
            sock = socket.create_connection(server_addr, timeout=connect_timeout_s)
        except OSError as exc:
            raise TransportError(f"cannot reach server {server_addr}: {exc}") from exc
        bucket = TokenBucket(ch.rate_bps)

    try:
        for i, (img, _empty) in enumerate(images):
            score = float(np.clip(scores[i], 0.0, 1.0))
            if filter_decide(score, fm.threshold):
                records.append(ImageRecord(i, True, 0, head_s, 0.0, 0.0))
                continue

            frame = encode_message(quantized_to_message(_quantize_for_width(img, width)))
            if mode == "simulated":
                uplink = transfer_time(len(frame), ch)
            else:
                uplink = _socket_round_trip(sock, bucket, frame, img, width, i)
            records.append(ImageRecord(i, False, len(frame),
                                       head_s, uplink, prof.t_tail))
    finally:
        if sock is not None:
            sock.close()
    return SessionLog(mode, records)


def _socket_round_trip(sock, bucket, frame: bytes, img: Tensor,
                       width: int, index: int) -> float:
    start = time.monotonic()
    try:
        bucket.send_all(sock, frame)
    except OSError as exc:
        raise TransportError(f"image {index}: send failed: {exc}") from exc
    uplink = time.monotonic() - start
    try:
        reply = read_frame(sock)
    except OSError as exc:
        raise TransportError(f"image {index}: no reply: {exc}") from exc
    if reply is None:
        raise TransportError(f"image {index}: server closed the connection")
    if reply.msg_type is not MsgType.DETECTION_RESULT:
        raise ProtocolError(f"image {index}: unexpected reply {reply.msg_type.name}")
    expected = tensor_digest(dequantize(_quantize_for_width(img, width)))
    if reply.payload != expected:
        raise ProtocolError(f"image {index}: tensor digest mismatch")
    return uplink
