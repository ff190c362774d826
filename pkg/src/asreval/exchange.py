"""Binary exchange format for token embedding matrices.

One payload is: a UTF-8 JSON header line
``{"utterance_id": ..., "tokens": [...], "dim": D, "dtype": "f32",
"byte_order": "little"}`` terminated by ``\\n``, followed by T*D
little-endian float32 values in row-major order (T = len(tokens)), followed
by an 8-byte little-endian unsigned trailer holding the byte count of header
line plus matrix, so a reader can verify it consumed exactly one record.

An error reply replaces the header with ``{"utterance_id": ..., "error":
msg}`` and carries no matrix; the trailer then covers the header line only.

Provider subprocesses receive requests as an 8-byte little-endian length
prefix followed by UTF-8 JSON ``{"id": ..., "tokens": [...]}`` on stdin and
answer with one payload per request, in order, on stdout.
"""

from __future__ import annotations

import json
import struct
from typing import BinaryIO

import numpy as np

_TRAILER = struct.Struct("<Q")

DTYPE = "f32"
BYTE_ORDER = "little"


class ProtocolError(RuntimeError):
    """Malformed or inconsistent exchange payload."""


def write_payload(fh: BinaryIO, utterance_id: str, tokens: list[str],
                  matrix: np.ndarray) -> None:
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise ProtocolError("matrix must be 2-dimensional")
    if matrix.shape[0] != len(tokens):
        raise ProtocolError(
            f"matrix has {matrix.shape[0]} rows for {len(tokens)} tokens")
    header = json.dumps(
        {"utterance_id": utterance_id, "tokens": tokens,
         "dim": int(matrix.shape[1]), "dtype": DTYPE, "byte_order": BYTE_ORDER},
        ensure_ascii=False, separators=(",", ":")).encode("utf-8") + b"\n"
    body = matrix.tobytes()
    fh.write(header)
    fh.write(body)
    fh.write(_TRAILER.pack(len(header) + len(body)))
    fh.flush()


def write_error(fh: BinaryIO, utterance_id: str, message: str) -> None:
    header = json.dumps(
        {"utterance_id": utterance_id, "error": message},
        ensure_ascii=False, separators=(",", ":")).encode("utf-8") + b"\n"
    fh.write(header)
    fh.write(_TRAILER.pack(len(header)))
    fh.flush()


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = fh.read(remaining)
        if not chunk:
            raise ProtocolError(f"stream ended while reading {what}")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_payload(fh: BinaryIO) -> tuple[str, list[str], np.ndarray] | None:
    """Read one payload; None at a clean end of stream.

    Raises ProtocolError for error replies, malformed headers, or trailer
    mismatches.
    """
    header_bytes = b""
    first = fh.read(1)
    if first == b"":
        return None
    while first != b"\n":
        header_bytes += first
        first = fh.read(1)
        if first == b"":
            raise ProtocolError("stream ended inside header line")
    header_bytes += b"\n"
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed header: {exc}") from None
    utterance_id = str(header.get("utterance_id", ""))
    if "error" in header:
        expected = _TRAILER.unpack(_read_exact(fh, _TRAILER.size, "trailer"))[0]
        if expected != len(header_bytes):
            raise ProtocolError("trailer mismatch on error reply")
        raise ProtocolError(
            f"provider error for {utterance_id!r}: {header['error']}")
    for key in ("tokens", "dim", "dtype", "byte_order"):
        if key not in header:
            raise ProtocolError(f"header missing {key!r}")
    if header["dtype"] != DTYPE or header["byte_order"] != BYTE_ORDER:
        raise ProtocolError(
            f"unsupported encoding {header['dtype']}/{header['byte_order']}")
    tokens = [str(t) for t in header["tokens"]]
    dim = int(header["dim"])
    if dim <= 0:
        raise ProtocolError("non-positive dim")
    body_len = len(tokens) * dim * 4
    body = _read_exact(fh, body_len, "matrix")
    expected = _TRAILER.unpack(_read_exact(fh, _TRAILER.size, "trailer"))[0]
    if expected != len(header_bytes) + body_len:
        raise ProtocolError(
            f"trailer mismatch: recorded {expected}, "
            f"read {len(header_bytes) + body_len}")
    matrix = np.frombuffer(body, dtype="<f4").reshape(len(tokens), dim)
    return utterance_id, tokens, matrix


def write_request(fh: BinaryIO, utterance_id: str, tokens: list[str]) -> None:
    body = json.dumps({"id": utterance_id, "tokens": tokens},
                      ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    fh.write(_TRAILER.pack(len(body)))
    fh.write(body)
    fh.flush()


def read_request(fh: BinaryIO) -> tuple[str, list[str]] | None:
    """Read one length-prefixed request; None at a clean end of stream."""
    prefix = fh.read(_TRAILER.size)
    if prefix == b"":
        return None
    if len(prefix) < _TRAILER.size:
        raise ProtocolError("stream ended inside request length prefix")
    (length,) = _TRAILER.unpack(prefix)
    body = _read_exact(fh, length, "request body")
    try:
        obj = json.loads(body.decode("utf-8"))
        return str(obj["id"]), [str(t) for t in obj["tokens"]]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ProtocolError(f"malformed request: {exc}") from None
