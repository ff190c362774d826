"""Wire format shared with the evaluation harness.

Requests arrive on stdin as an 8-byte little-endian length prefix followed
by UTF-8 JSON {"id": ..., "tokens": [...]}. Each reply on stdout is a JSON
header line {"utterance_id", "tokens", "dim", "dtype": "f32", "byte_order":
"little"} plus a newline, then T*D little-endian float32 values row-major,
then an 8-byte little-endian trailer holding len(header line) + len(matrix
bytes). Error replies swap the header for {"utterance_id", "error"} and the
trailer covers the header line alone.
"""

from __future__ import annotations

import json
import struct
from typing import BinaryIO

import numpy as np

_LEN = struct.Struct("<Q")


class WireError(RuntimeError):
    """The inbound stream is unreadable; the service must stop."""


def read_request(fh: BinaryIO) -> tuple[str, list[str]] | None:
    prefix = fh.read(_LEN.size)
    if prefix == b"":
        return None
    if len(prefix) < _LEN.size:
        raise WireError("truncated request length prefix")
    (length,) = _LEN.unpack(prefix)
    body = b""
    while len(body) < length:
        chunk = fh.read(length - len(body))
        if not chunk:
            raise WireError("truncated request body")
        body += chunk
    try:
        obj = json.loads(body.decode("utf-8"))
        return str(obj["id"]), [str(t) for t in obj["tokens"]]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise WireError(f"malformed request: {exc}") from None


def write_payload(fh: BinaryIO, utterance_id: str, tokens: list[str],
                  matrix: np.ndarray) -> None:
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    assert matrix.ndim == 2 and matrix.shape[0] == len(tokens)
    header = json.dumps(
        {"utterance_id": utterance_id, "tokens": tokens,
         "dim": int(matrix.shape[1]), "dtype": "f32", "byte_order": "little"},
        ensure_ascii=False, separators=(",", ":")).encode("utf-8") + b"\n"
    body = matrix.tobytes()
    fh.write(header)
    fh.write(body)
    fh.write(_LEN.pack(len(header) + len(body)))
    fh.flush()


def write_error(fh: BinaryIO, utterance_id: str, message: str) -> None:
    header = json.dumps(
        {"utterance_id": utterance_id, "error": message},
        ensure_ascii=False, separators=(",", ":")).encode("utf-8") + b"\n"
    fh.write(header)
    fh.write(_LEN.pack(len(header)))
    fh.flush()
