"""Length-prefixed binary framing and the two transports that carry it.

Frame layout (all integers little-endian):

    u32  length of everything after this prefix
    u16  protocol version
    u8   message type
    u8   origin (0 = coordinator/cloud, 1..K = agencies)
    u16  round counter
    u8   number of applied-agency ids
    u8[] applied-agency ids
    u8   number of matrix sections
    then per matrix:  u32 rows, u32 cols, rows*cols f64 (row-major)

The same bytes travel over both transports, so a run is reproducible
bit-for-bit regardless of which one carries it.
"""

import logging
import socket
import struct
import threading
from dataclasses import dataclass

import numpy as np

from .errors import TransportFailure

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1

# Message types.
MSG_SHARD = 1
MSG_GRAM_RELEASE = 2
MSG_ESTIMATE = 3
MSG_RESIDUAL_GRAM = 4

_LEN = struct.Struct("<I")
_HEADER = struct.Struct("<HBBH")
_COUNT = struct.Struct("<B")
_MATRIX = struct.Struct("<II")

#: The origin field is a single byte and 0 is the coordinator.
MAX_PARTICIPANTS = 255


@dataclass(frozen=True)
class Frame:
    """One protocol message: typed header plus a tuple of f64 matrices."""

    msg_type: int
    origin: int
    round: int
    applied: tuple
    matrices: tuple


def encode_frame(frame):
    """Serialize a Frame to bytes, length prefix included."""
    parts = [
        _HEADER.pack(PROTOCOL_VERSION, frame.msg_type, frame.origin,
                     frame.round),
        _COUNT.pack(len(frame.applied)),
        bytes(frame.applied),
        _COUNT.pack(len(frame.matrices)),
    ]
    for m in frame.matrices:
        m = np.ascontiguousarray(m, dtype=np.float64)
        if m.ndim != 2:
            raise TransportFailure(f"matrix payload must be 2-d, got {m.ndim}-d")
        parts.append(_MATRIX.pack(m.shape[0], m.shape[1]))
        parts.append(m.tobytes())
    body = b"".join(parts)
    return _LEN.pack(len(body)) + body


def decode_frame(data):
    """Parse one complete frame, length prefix included."""
    try:
        (length,) = _LEN.unpack_from(data, 0)
        body = data[_LEN.size:]
        if len(body) != length:
            raise TransportFailure(
                f"frame length prefix says {length} bytes, got {len(body)}"
            )
        version, msg_type, origin, round_ = _HEADER.unpack_from(body, 0)
        if version != PROTOCOL_VERSION:
            raise TransportFailure(
                f"protocol version {version}, expected {PROTOCOL_VERSION}"
            )
        off = _HEADER.size
        (n_applied,) = _COUNT.unpack_from(body, off)
        off += _COUNT.size
        applied = tuple(body[off:off + n_applied])
        off += n_applied
        (n_matrices,) = _COUNT.unpack_from(body, off)
        off += _COUNT.size
        matrices = []
        for _ in range(n_matrices):
            rows, cols = _MATRIX.unpack_from(body, off)
            off += _MATRIX.size
            nbytes = rows * cols * 8
            data = body[off:off + nbytes]
            if len(data) != nbytes:
                raise TransportFailure("truncated matrix payload")
            off += nbytes
            matrices.append(
                np.frombuffer(data, dtype="<f8").reshape(rows, cols).copy()
            )
        if off != len(body):
            raise TransportFailure(f"{len(body) - off} trailing bytes in frame")
    except struct.error as exc:
        raise TransportFailure(f"malformed frame: {exc}") from exc
    return Frame(msg_type=msg_type, origin=origin, round=round_,
                 applied=applied, matrices=tuple(matrices))


class BusTransport:
    """In-process transport: one blocking FIFO per directed participant pair.

    Thread-safe, so a run may drive all participants from one thread or one
    thread each; message content is identical either way.
    """

    def __init__(self, participants):
        self._queues = {}
        self._participants = tuple(participants)
        for src in participants:
            for dst in participants:
                if src != dst:
                    self._queues[(src, dst)] = _BlockingQueue()

    def send(self, src, dst, frame):
        try:
            q = self._queues[(src, dst)]
        except KeyError:
            raise TransportFailure(f"no channel {src} -> {dst}") from None
        q.put(encode_frame(frame))

    def recv(self, src, dst, timeout=30.0):
        """Receive the next frame sent from ``src`` to ``dst``."""
        try:
            q = self._queues[(src, dst)]
        except KeyError:
            raise TransportFailure(f"no channel {src} -> {dst}") from None
        data = q.get(timeout)
        if data is None:
            raise TransportFailure(f"timed out waiting on {src} -> {dst}")
        return decode_frame(data)

    def close(self):
        self._queues.clear()


class _BlockingQueue:
    """Tiny blocking FIFO (queue.SimpleQueue lacks a deterministic close)."""

    def __init__(self):
        self._items = []
        self._cond = threading.Condition()

    def put(self, item):
        with self._cond:
            self._items.append(item)
            self._cond.notify()

    def get(self, timeout):
        with self._cond:
            if not self._items and not self._cond.wait_for(
                lambda: bool(self._items), timeout
            ):
                return None
            return self._items.pop(0)


class TcpTransport:
    """Loopback TCP mesh carrying the same frames as the bus.

    Every participant listens on an ephemeral localhost port; construction
    opens one socket per directed pair, so ``recv(src, dst)`` reads from a
    dedicated stream and per-pair ordering is guaranteed by TCP itself.
    """

    def __init__(self, participants):
        self._participants = tuple(participants)
        self._listeners = {}
        self._conns = {}
        self._lock = threading.Lock()
        self._accepting = []
        try:
            self._open_mesh()
        except OSError as exc:
            self.close()
            raise TransportFailure(f"could not open loopback mesh: {exc}") from exc

    def _open_mesh(self):
        ports = {}
        for pid in self._participants:
            lst = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            lst.bind(("127.0.0.1", 0))
            lst.listen(len(self._participants))
            self._listeners[pid] = lst
            ports[pid] = lst.getsockname()[1]
        # Accept in background while the mesh dials out, then join.
        threads = []
        for pid in self._participants:
            t = threading.Thread(target=self._accept_all, args=(pid,), daemon=True)
            t.start()
            threads.append(t)
        for src in self._participants:
            for dst in self._participants:
                if src == dst:
                    continue
                s = socket.create_connection(("127.0.0.1", ports[dst]), timeout=10)
                s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                s.sendall(struct.pack("<BB", src, dst))
                with self._lock:
                    self._conns[("out", src, dst)] = s
        for t in threads:
            t.join(timeout=10)
            if t.is_alive():
                raise TransportFailure("mesh accept did not finish")

    def _accept_all(self, pid):
        expected = len(self._participants) - 1
        for _ in range(expected):
            conn, _addr = self._listeners[pid].accept()
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            hello = self._read_exact(conn, 2)
            src, dst = struct.unpack("<BB", hello)
            if dst != pid:
                raise TransportFailure(f"hello addressed to {dst}, expected {pid}")
            with self._lock:
                self._conns[("in", src, dst)] = conn

    @staticmethod
    def _read_exact(conn, n):
        chunks = []
        got = 0
        while got < n:
            chunk = conn.recv(n - got)
            if not chunk:
                raise TransportFailure("peer closed the connection")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def send(self, src, dst, frame):
        with self._lock:
            conn = self._conns.get(("out", src, dst))
        if conn is None:
            raise TransportFailure(f"no connection {src} -> {dst}")
        try:
            conn.sendall(encode_frame(frame))
        except OSError as exc:
            raise TransportFailure(f"send {src} -> {dst} failed: {exc}") from exc

    def recv(self, src, dst, timeout=30.0):
        with self._lock:
            conn = self._conns.get(("in", src, dst))
        if conn is None:
            raise TransportFailure(f"no connection {src} -> {dst}")
        conn.settimeout(timeout)
        try:
            prefix = self._read_exact(conn, _LEN.size)
            (length,) = _LEN.unpack(prefix)
            body = self._read_exact(conn, length)
        except socket.timeout:
            raise TransportFailure(f"timed out waiting on {src} -> {dst}") from None
        except OSError as exc:
            raise TransportFailure(f"recv {src} -> {dst} failed: {exc}") from exc
        return decode_frame(prefix + body)

    def close(self):
        with self._lock:
            conns = list(self._conns.values())
            self._conns.clear()
        for c in conns:
            try:
                c.close()
            except OSError:
                pass
        for lst in self._listeners.values():
            try:
                lst.close()
            except OSError:
                pass
        self._listeners.clear()


def make_transport(kind, participants):
    """Build a transport by config name: ``bus`` or ``tcp``."""
    if kind == "bus":
        return BusTransport(participants)
    if kind == "tcp":
        return TcpTransport(participants)
    raise ValueError(f"unknown transport {kind!r}")
