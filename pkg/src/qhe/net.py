"""Delegated evaluation over TCP.

The client keeps the key, encrypts locally, and ships ``(gamma, circuit,
ciphertext)`` to a server that only runs ``evaluate``. One request and one
response per connection.

Frame: ``uint32 length`` (big-endian, payload size + 1), one type byte, the
payload. An EVAL_REQUEST payload is ``uint32 json_length``, a UTF-8 JSON
header ``{"gamma": {...}, "circuit": "..."}``, then the ciphertext bytes. An
EVAL_RESPONSE payload is the evaluated ciphertext. ERROR carries a UTF-8
message.
"""
from __future__ import annotations

import json
import logging
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass
from typing import Optional

from .backends import load_cipher
from .circuit import Circuit, CircuitError, parse_circuit, serialize_circuit
from .params import Gamma
from .scheme import SchemeError, decrypt, encrypt, evaluate

log = logging.getLogger(__name__)

EVAL_REQUEST = 0x01
EVAL_RESPONSE = 0x02
ERROR = 0x7F
FRAME_TYPES = (EVAL_REQUEST, EVAL_RESPONSE, ERROR)
DEFAULT_MAX_PAYLOAD = 64 << 20
_LEN = struct.Struct(">I")


class ProtocolError(Exception):
    """Malformed or unexpected frame."""


class TransportError(ConnectionError):
    """The connection failed before a complete response arrived."""


class RemoteError(Exception):
    """The server rejected the request with an ERROR frame."""


@dataclass(frozen=True)
class Frame:
    type: int
    payload: bytes

    def __post_init__(self) -> None:
        if self.type not in FRAME_TYPES:
            raise ProtocolError(f"unknown frame type 0x{self.type:02x}")

    def encode(self) -> bytes:
        return _LEN.pack(len(self.payload) + 1) + bytes([self.type]) + self.payload

    @classmethod
    def decode(cls, data: bytes) -> "Frame":
        if len(data) < 5:
            raise ProtocolError("frame shorter than its header")
        (length,) = _LEN.unpack_from(data)
        if length != len(data) - 4:
            raise ProtocolError(f"length field {length} does not match {len(data) - 4} bytes")
        return cls(data[4], bytes(data[5:]))


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks, got = [], 0
    while got < n:
        chunk = sock.recv(min(n - got, 1 << 20))
        if not chunk:
            raise TransportError(f"connection closed after {got} of {n} bytes")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


class OversizeError(ProtocolError):
    def __init__(self, declared: int, cap: int):
        super().__init__(f"payload of {declared} bytes exceeds the cap of {cap}")
        self.declared = declared


def read_frame(sock: socket.socket, max_payload: int = DEFAULT_MAX_PAYLOAD) -> Frame:
    (length,) = _LEN.unpack(_recv_exact(sock, 4))
    if length < 1:
        raise ProtocolError("zero-length frame")
    if length - 1 > max_payload:
        raise OversizeError(length - 1, max_payload)
    body = _recv_exact(sock, length)
    return Frame(body[0], body[1:])


def encode_request(gamma: Gamma, circuit: Circuit, cipher_bytes: bytes) -> Frame:
    header = json.dumps({"gamma": gamma.as_dict(), "circuit": serialize_circuit(circuit)}).encode()
    return Frame(EVAL_REQUEST, _LEN.pack(len(header)) + header + cipher_bytes)


def decode_request(frame: Frame) -> tuple[Gamma, Circuit, bytes]:
    if frame.type != EVAL_REQUEST:
        raise ProtocolError(f"expected EVAL_REQUEST, got 0x{frame.type:02x}")
    data = frame.payload
    if len(data) < 4:
        raise ProtocolError("request payload too short")
    (hlen,) = _LEN.unpack_from(data)
    if 4 + hlen > len(data):
        raise ProtocolError("request header overruns the payload")
    try:
        header = json.loads(data[4:4 + hlen].decode())
        gamma = Gamma.from_dict(header["gamma"])
        circuit = parse_circuit(header["circuit"], gamma.r)
    except (ValueError, KeyError, TypeError) as exc:
        raise ProtocolError(f"bad request header: {exc}") from exc
    return gamma, circuit, data[4 + hlen:]


def handle_request(frame: Frame) -> Frame:
    """Server-side evaluation of one decoded frame; errors become ERROR frames."""
    try:
        gamma, circuit, body = decode_request(frame)
        ct = load_cipher(body)
        if ct.gamma != gamma:
            raise SchemeError("ciphertext parameters differ from the request parameters")
        out = evaluate(circuit, ct)
        if out.gamma != gamma:
            raise SchemeError("evaluated ciphertext changed shape")
        return Frame(EVAL_RESPONSE, out.to_bytes())
    except (ProtocolError, SchemeError, CircuitError, ValueError) as exc:
        return Frame(ERROR, str(exc).encode())


def _discard(sock: socket.socket, n: int, timeout: float = 5.0) -> None:
    """Drop the rest of a refused frame so the peer can still read our ERROR reply."""
    sock.settimeout(timeout)
    try:
        while n > 0:
            chunk = sock.recv(min(n, 1 << 20))
            if not chunk:
                return
            n -= len(chunk)
    except OSError:
        return


class _Handler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        sock = self.request
        try:
            frame = read_frame(sock, self.server.max_payload)
        except ProtocolError as exc:
            sock.sendall(Frame(ERROR, str(exc).encode()).encode())
            if isinstance(exc, OversizeError):
                _discard(sock, exc.declared + 1)
            return
        except TransportError:
            return
        reply = handle_request(frame)
        try:
            sock.sendall(reply.encode())
        except OSError as exc:
            log.warning("client went away: %s", exc)


class EvalServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, addr: tuple[str, int], max_payload: int = DEFAULT_MAX_PAYLOAD):
        self.max_payload = max_payload
        super().__init__(addr, _Handler)

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]

    def start(self) -> threading.Thread:
        th = threading.Thread(target=self.serve_forever, daemon=True)
        th.start()
        return th


def parse_address(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"address must be host:port, got {text!r}")
    return host, int(port)


def serve(bind_addr: str, max_payload: int = DEFAULT_MAX_PAYLOAD) -> None:
    """Serve evaluation requests until interrupted."""
    with EvalServer(parse_address(bind_addr), max_payload) as server:
        log.info("listening on %s:%d", *server.address)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass


def exchange(server_addr, request: Frame, timeout: float = 600.0,
             max_payload: int = DEFAULT_MAX_PAYLOAD) -> Frame:
    """Send one frame and return the reply frame."""
    addr = parse_address(server_addr) if isinstance(server_addr, str) else tuple(server_addr)
    try:
        with socket.create_connection(addr, timeout=timeout) as sock:
            try:
                sock.sendall(request.encode())
            except OSError:
                # the server may have refused the frame early; its reason is still worth reading
                return read_frame(sock, max_payload)
            return read_frame(sock, max_payload)
    except OSError as exc:
        if isinstance(exc, TransportError):
            raise
        raise TransportError(f"transport failure talking to {addr}: {exc}") from exc


def delegate_evaluation(server_addr, ct, circuit: Circuit, **kw):
    """Ship a ciphertext for evaluation and return the evaluated ciphertext."""
    reply = exchange(server_addr, encode_request(ct.gamma, circuit, ct.to_bytes()), **kw)
    if reply.type == ERROR:
        raise RemoteError(reply.payload.decode(errors="replace"))
    if reply.type != EVAL_RESPONSE:
        raise ProtocolError(f"unexpected reply type 0x{reply.type:02x}")
    out = load_cipher(reply.payload)
    if out.gamma != ct.gamma:
        raise ProtocolError("response parameters differ from the request")
    return out


def client_delegate(server_addr, key, block, circuit: Circuit, backend,
                    mode: str = "exact", rng=None, **kw):
    """Encrypt locally, evaluate remotely, decrypt locally."""
    ct = encrypt(key, block, backend)
    return decrypt(key, delegate_evaluation(server_addr, ct, circuit, **kw), mode=mode, rng=rng)
