import io

import numpy as np
import pytest

from asreval.exchange import (
    ProtocolError,
    read_payload,
    read_request,
    write_error,
    write_payload,
    write_request,
)


def test_payload_round_trip():
    matrix = np.arange(6, dtype=np.float32).reshape(2, 3) + 1
    buf = io.BytesIO()
    write_payload(buf, "u1", ["a", "é"], matrix)
    buf.seek(0)
    uid, tokens, out = read_payload(buf)
    assert uid == "u1"
    assert tokens == ["a", "é"]
    assert np.array_equal(out, matrix)
    assert read_payload(buf) is None  # clean EOF


def test_multiple_payloads_stream():
    buf = io.BytesIO()
    write_payload(buf, "a", ["x"], np.ones((1, 4), dtype=np.float32))
    write_payload(buf, "b", ["y", "z"], np.ones((2, 4), dtype=np.float32))
    buf.seek(0)
    assert read_payload(buf)[0] == "a"
    assert read_payload(buf)[0] == "b"
    assert read_payload(buf) is None


def test_row_count_must_match_tokens():
    with pytest.raises(ProtocolError):
        write_payload(io.BytesIO(), "u1", ["a", "b"],
                      np.ones((1, 4), dtype=np.float32))


def test_error_reply_raises_with_id():
    buf = io.BytesIO()
    write_error(buf, "u7", "too many tokens")
    buf.seek(0)
    with pytest.raises(ProtocolError, match="u7.*too many tokens"):
        read_payload(buf)


def test_truncated_matrix_detected():
    buf = io.BytesIO()
    write_payload(buf, "u1", ["a", "b"], np.ones((2, 4), dtype=np.float32))
    data = buf.getvalue()[:-12]  # drop part of matrix and trailer
    with pytest.raises(ProtocolError):
        read_payload(io.BytesIO(data))


def test_corrupt_trailer_detected():
    buf = io.BytesIO()
    write_payload(buf, "u1", ["a"], np.ones((1, 4), dtype=np.float32))
    data = bytearray(buf.getvalue())
    data[-1] ^= 0xFF
    with pytest.raises(ProtocolError, match="trailer"):
        read_payload(io.BytesIO(bytes(data)))


def test_request_round_trip():
    buf = io.BytesIO()
    write_request(buf, "u1", ["bonjour", "l'"])
    write_request(buf, "u2", [])
    buf.seek(0)
    assert read_request(buf) == ("u1", ["bonjour", "l'"])
    assert read_request(buf) == ("u2", [])
    assert read_request(buf) is None
