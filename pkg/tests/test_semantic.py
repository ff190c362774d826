import subprocess
import sys

import numpy as np
import pytest

from asreval import exchange
from asreval.exchange import ProtocolError
from asreval.semantic import (
    DeterministicProvider,
    EmbeddingCache,
    EmbeddingMatrix,
    ReplayProvider,
    SubprocessProvider,
    greedy_match_score,
    request_embeddings,
    score_run,
)


def _matrix(uid, tokens, rows):
    return EmbeddingMatrix(utterance_id=uid, tokens=tuple(tokens),
                           vectors=np.asarray(rows, dtype=np.float32))


def _basis(i, dim=4):
    row = np.zeros(dim, dtype=np.float32)
    row[i] = 1.0
    return row


def test_identical_matrices_score_100():
    m = _matrix("u", ["a", "b"], [_basis(0), _basis(1)])
    score = greedy_match_score(m, m)
    assert score.precision == pytest.approx(1.0)
    assert score.recall == pytest.approx(1.0)
    assert score.f1_scaled == pytest.approx(100.0)


def test_orthogonal_matrices_score_0():
    ref = _matrix("r", ["a", "b"], [_basis(0), _basis(1)])
    hyp = _matrix("h", ["c", "d"], [_basis(2), _basis(3)])
    score = greedy_match_score(ref, hyp)
    assert score.precision == 0.0
    assert score.recall == 0.0
    assert score.f1_scaled == 0.0


def test_hand_computed_partial_match():
    # ref = e1, e2; hyp = e1: R = (1+0)/2, P = 1, F1 = 2/3
    ref = _matrix("r", ["a", "b"], [_basis(0), _basis(1)])
    hyp = _matrix("h", ["a"], [_basis(0)])
    score = greedy_match_score(ref, hyp)
    assert score.recall == pytest.approx(0.5, abs=1e-12)
    assert score.precision == pytest.approx(1.0, abs=1e-12)
    assert abs(score.f1_scaled - 200.0 / 3.0) < 1e-9


def test_scale_invariance():
    ref = _matrix("r", ["a", "b"], [[1.0, 2.0, 0.0, 0.0], [0.0, 1.0, 3.0, 0.0]])
    hyp = _matrix("h", ["c"], [[2.0, 1.0, 0.5, 0.0]])
    base = greedy_match_score(ref, hyp)
    scaled_ref = _matrix("r", ["a", "b"],
                         np.asarray([[1.0, 2.0, 0.0, 0.0],
                                     [0.0, 1.0, 3.0, 0.0]]) * [[7.0], [0.01]])
    scaled = greedy_match_score(scaled_ref, hyp)
    assert scaled.f1_scaled == pytest.approx(base.f1_scaled, abs=1e-9)


def test_precision_recall_swap_symmetry():
    ref = _matrix("r", ["a", "b"], [[1, 0, 0, 0], [0.5, 0.5, 0, 0]])
    hyp = _matrix("h", ["c"], [[0, 1, 0, 0]])
    fwd = greedy_match_score(ref, hyp)
    rev = greedy_match_score(hyp, ref)
    assert fwd.precision == pytest.approx(rev.recall)
    assert fwd.recall == pytest.approx(rev.precision)


def test_hyp_permutation_invariance():
    provider = DeterministicProvider(seed=4)
    ref = provider.embed("r", ["un", "deux", "trois"])
    hyp = provider.embed("h", ["a", "b", "c", "d"])
    permuted = EmbeddingMatrix(
        utterance_id="h", tokens=("d", "b", "a", "c"),
        vectors=hyp.vectors[[3, 1, 0, 2]])
    assert greedy_match_score(ref, hyp).f1_scaled == pytest.approx(
        greedy_match_score(ref, permuted).f1_scaled, abs=1e-12)


def test_negative_cosines_clamped():
    ref = _matrix("r", ["a"], [[1.0, 0.0]])
    hyp = _matrix("h", ["b"], [[-1.0, 0.0]])
    score = greedy_match_score(ref, hyp)
    assert score.f1_scaled == 0.0
    raw = greedy_match_score(ref, hyp, clamp_negative=False)
    assert raw.precision == pytest.approx(-1.0)


def test_bounds_on_random_pairs():
    provider = DeterministicProvider(seed=9)
    rng = np.random.default_rng(0)
    for i in range(200):
        n_ref = int(rng.integers(1, 6))
        n_hyp = int(rng.integers(1, 6))
        ref = provider.embed(f"r{i}", [f"t{j}" for j in range(n_ref)])
        hyp = provider.embed(f"h{i}", [f"u{j}" for j in range(n_hyp)])
        score = greedy_match_score(ref, hyp)
        assert 0.0 <= score.f1_scaled <= 100.0


def test_degenerate_empty_hypothesis():
    provider = DeterministicProvider()
    ref = provider.embed("r", ["a"])
    hyp = provider.embed("h", [])
    score = greedy_match_score(ref, hyp)
    assert score.degenerate and score.f1_scaled == 0.0


def test_dimension_mismatch_rejected():
    ref = _matrix("r", ["a"], [[1.0, 0.0]])
    hyp = _matrix("h", ["b"], [[1.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        greedy_match_score(ref, hyp)


def test_zero_norm_row_rejected():
    with pytest.raises(ValueError):
        _matrix("r", ["a"], [[0.0, 0.0]])


def test_corpus_weighted_mean():
    provider = DeterministicProvider(seed=1)
    perfect = provider.embed("a", [f"t{i}" for i in range(10)])
    pairs = [(perfect, perfect)]
    corpus, scores = score_run(pairs, weights=[10])
    assert corpus == pytest.approx(100.0)

    # frozen weighted mean: 100 with weight 10, 80 with weight 30 -> 85.0
    class Fixed:
        def __init__(self, f1):
            self.f1_scaled = f1
            self.degenerate = False

    from asreval.metrics import weighted_mean
    assert weighted_mean([100.0, 80.0], [10, 30]) == 85.0


def test_score_run_excludes_degenerate_and_all_degenerate_undefined():
    provider = DeterministicProvider()
    ref = provider.embed("r", ["a", "b"])
    empty = provider.embed("h", [])
    corpus, scores = score_run([(ref, empty)])
    assert corpus is None
    assert scores[0].degenerate

    good = provider.embed("h2", ["a", "b"])
    corpus, scores = score_run([(ref, empty), (ref, good)])
    assert corpus == pytest.approx(100.0)
    assert [s.degenerate for s in scores] == [True, False]


def test_deterministic_provider_reproducible():
    a = DeterministicProvider(seed=3).embed("u", ["a", "b"])
    b = DeterministicProvider(seed=3).embed("u", ["a", "b"])
    assert np.array_equal(a.vectors, b.vectors)
    c = DeterministicProvider(seed=4).embed("u", ["a", "b"])
    assert not np.array_equal(a.vectors, c.vectors)
    # position matters: same token at different slots embeds differently
    d = DeterministicProvider(seed=3).embed("u", ["b", "a"])
    assert not np.array_equal(a.vectors[0], d.vectors[1])


def test_provider_token_count_mismatch_is_protocol_error():
    class Broken:
        provider_id = "broken"

        def embed(self, uid, tokens):
            return EmbeddingMatrix(
                utterance_id=uid, tokens=tuple(tokens[:-1]),
                vectors=np.ones((len(tokens) - 1, 4), dtype=np.float32))

        def close(self):
            pass

    with pytest.raises(ProtocolError):
        request_embeddings([("u", ["a", "b", "c"])], Broken())


def test_cache_serves_without_provider_calls(tmp_path):
    calls = {"n": 0}

    class Counting(DeterministicProvider):
        def embed(self, uid, tokens):
            calls["n"] += 1
            return super().embed(uid, tokens)

    cache = EmbeddingCache(tmp_path)
    provider = Counting(seed=5)
    first = request_embeddings([("u", ["a", "b"])], provider, cache)
    assert calls["n"] == 1
    second = request_embeddings([("u", ["a", "b"])], provider, cache)
    assert calls["n"] == 1  # served from cache
    assert np.array_equal(first[0].vectors, second[0].vectors)


def test_replay_provider_round_trip(tmp_path):
    provider = DeterministicProvider(seed=2)
    matrix = provider.embed("u1", ["bonjour", "monsieur"])
    path = tmp_path / "embeddings.bin"
    with path.open("wb") as fh:
        exchange.write_payload(fh, "u1", list(matrix.tokens), matrix.vectors)
    replay = ReplayProvider(path)
    out = replay.embed("u1", ["bonjour", "monsieur"])
    assert np.array_equal(out.vectors, matrix.vectors)
    with pytest.raises(ProtocolError):
        replay.embed("u1", ["bonjour"])  # token mismatch
    with pytest.raises(ProtocolError):
        replay.embed("unknown", ["x"])


_ECHO_SIDECAR = r"""
import sys
import numpy as np
sys.path.insert(0, {src!r})
from asreval import exchange
while True:
    req = exchange.read_request(sys.stdin.buffer)
    if req is None:
        break
    uid, tokens = req
    if len(tokens) > 4:
        exchange.write_error(sys.stdout.buffer, uid, "too many tokens")
        continue
    rows = np.eye(max(len(tokens), 1), 8, dtype=np.float32)[: len(tokens)] + 1
    exchange.write_payload(sys.stdout.buffer, uid, tokens, rows)
"""


def test_subprocess_provider(tmp_path):
    from pathlib import Path

    import asreval

    pkg_src = str(Path(asreval.__file__).parent.parent)
    script = tmp_path / "echo_provider.py"
    script.write_text(_ECHO_SIDECAR.format(src=pkg_src), encoding="utf-8")
    provider = SubprocessProvider([sys.executable, str(script)],
                                  provider_id="echo")
    try:
        out = provider.embed("u1", ["a", "b"])
        assert out.vectors.shape == (2, 8)
        out2 = provider.embed("u2", ["c"])
        assert out2.vectors.shape == (1, 8)
        with pytest.raises(ProtocolError, match="too many tokens"):
            provider.embed("u3", ["a", "b", "c", "d", "e"])
        # provider stays alive after a protocol error reply
        out3 = provider.embed("u4", ["x"])
        assert out3.vectors.shape == (1, 8)
    finally:
        provider.close()
