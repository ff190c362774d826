"""Semantic similarity scoring via greedy max-cosine token matching.

Each token on one side is paired with its best cosine match on the other:
recall averages the reference side, precision the hypothesis side, and the
score is the harmonic mean scaled to [0, 100]. Scoring uses the same
normalized tokens the error rates use, so the normalization profile is a
recorded run parameter. No baseline rescaling and no IDF weighting by
default; negative best-cosines are clamped to 0 so the documented [0, 100]
range holds for arbitrary embeddings.

Embeddings come from a provider: the built-in deterministic one (seeded
hash-derived unit vectors, no model needed), a replay file, or a subprocess
speaking the exchange protocol. Results are cached on disk per
(provider id, text hash) because embedding extraction dominates runtime.
"""

from __future__ import annotations

import hashlib
import shlex
import struct
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from . import exchange
from .exchange import ProtocolError

DEFAULT_DIM = 32


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Per-token contextual embeddings for one utterance."""

    utterance_id: str
    tokens: tuple[str, ...]
    vectors: np.ndarray  # T x D, float32

    def __post_init__(self) -> None:
        vectors = np.asarray(self.vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise ValueError("vectors must be a T x D matrix")
        if vectors.shape[0] != len(self.tokens):
            raise ValueError(
                f"{vectors.shape[0]} rows for {len(self.tokens)} tokens")
        if len(self.tokens) and not np.all(np.linalg.norm(vectors, axis=1) > 0):
            raise ValueError("zero-norm embedding row")
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "tokens", tuple(self.tokens))

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class SemanticScore:
    precision: float
    recall: float
    f1_scaled: float
    degenerate: bool = False

    def to_json_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1_scaled": self.f1_scaled,
            "degenerate": self.degenerate,
        }


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return matrix / norms


def _canonical_rows(matrix: np.ndarray) -> np.ndarray:
    order = np.lexsort(matrix.T[::-1])
    return np.ascontiguousarray(matrix[order])


def greedy_match_score(ref: EmbeddingMatrix, hyp: EmbeddingMatrix, *,
                       clamp_negative: bool = True) -> SemanticScore:
    """Greedy max-cosine precision/recall/F1 between two embedding sets.

    An empty side makes the pair degenerate: the score is 0 with the
    degenerate flag set, and corpus aggregation treats it as unscorable.
    """
    if len(ref) == 0 or len(hyp) == 0:
        return SemanticScore(precision=0.0, recall=0.0, f1_scaled=0.0,
                             degenerate=True)
    if ref.dim != hyp.dim:
        raise ValueError(f"dimension mismatch: ref {ref.dim}, hyp {hyp.dim}")
    # Row order is canonicalized before the product and the maxima are sorted
    # before the mean: BLAS kernels and float sums are order-sensitive, and
    # this pins both, so permuting tokens cannot move the score by an ulp.
    ref_unit = _canonical_rows(_unit_rows(ref.vectors))
    hyp_unit = _canonical_rows(_unit_rows(hyp.vectors))
    sim = ref_unit @ hyp_unit.T
    ref_best = np.sort(sim.max(axis=1))
    hyp_best = np.sort(sim.max(axis=0))
    if clamp_negative:
        ref_best = np.maximum(ref_best, 0.0)
        hyp_best = np.maximum(hyp_best, 0.0)
    recall = float(ref_best.mean())
    precision = float(hyp_best.mean())
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
    return SemanticScore(precision=precision, recall=recall,
                         f1_scaled=100.0 * f1)


def score_run(pairs: Sequence[tuple[EmbeddingMatrix, EmbeddingMatrix]],
              weights: Sequence[float] | None = None, *,
              clamp_negative: bool = True,
              ) -> tuple[float | None, list[SemanticScore]]:
    """Corpus score: reference-token-count weighted mean of per-pair F1.

    Degenerate pairs keep their per-utterance zero score but contribute no
    weight, so an all-degenerate run is undefined (None), mirroring how
    empty strata are reported missing rather than zero.
    """
    scores = [greedy_match_score(r, h, clamp_negative=clamp_negative)
              for r, h in pairs]
    if weights is None:
        weights = [len(r.tokens) for r, _ in pairs]
    elif len(weights) != len(pairs):
        raise ValueError("one weight per pair required")
    total = 0.0
    acc = 0.0
    for score, weight in zip(scores, weights):
        if score.degenerate:
            continue
        total += weight
        acc += weight * score.f1_scaled
    corpus = acc / total if total > 0 else None
    return corpus, scores


class EmbeddingProvider(Protocol):
    provider_id: str

    def embed(self, utterance_id: str, tokens: list[str]) -> EmbeddingMatrix: ...

    def close(self) -> None: ...


class DeterministicProvider:
    """Seeded, model-free provider for tests and reproducible dry runs.

    Each row is a unit vector derived by hashing (seed, position, token), so
    identical text always embeds identically, bit for bit, on any platform.
    """

    dim = DEFAULT_DIM

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self.provider_id = f"deterministic-d{self.dim}-s{self.seed}"

    def _row(self, position: int, token: str) -> np.ndarray:
        key = f"{self.seed}\x1f{position}\x1f{token}".encode("utf-8")
        raw = b"".join(
            hashlib.blake2b(key + bytes([counter]), digest_size=64).digest()
            for counter in range((self.dim * 8 + 63) // 64))
        ints = struct.unpack(f"<{self.dim}Q", raw[: self.dim * 8])
        values = np.array([v / 2.0 ** 64 * 2.0 - 1.0 for v in ints])
        norm = np.linalg.norm(values)
        if norm == 0:  # unreachable in practice, keeps the contract total
            values[0] = 1.0
            norm = 1.0
        return (values / norm).astype(np.float32)

    def embed(self, utterance_id: str, tokens: list[str]) -> EmbeddingMatrix:
        if not tokens:
            vectors = np.zeros((0, self.dim), dtype=np.float32)
        else:
            vectors = np.stack([self._row(i, t) for i, t in enumerate(tokens)])
        return EmbeddingMatrix(utterance_id=utterance_id,
                               tokens=tuple(tokens), vectors=vectors)

    def close(self) -> None:
        pass


class ReplayProvider:
    """Serves embeddings recorded in an exchange-format file, keyed by id."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.provider_id = f"replay-{self.path.name}"
        self._payloads: dict[str, tuple[list[str], np.ndarray]] = {}
        with self.path.open("rb") as fh:
            while True:
                payload = exchange.read_payload(fh)
                if payload is None:
                    break
                utterance_id, tokens, matrix = payload
                self._payloads[utterance_id] = (tokens, matrix)

    def embed(self, utterance_id: str, tokens: list[str]) -> EmbeddingMatrix:
        try:
            stored_tokens, matrix = self._payloads[utterance_id]
        except KeyError:
            raise ProtocolError(
                f"no recorded embedding for {utterance_id!r}") from None
        if list(stored_tokens) != list(tokens):
            raise ProtocolError(
                f"recorded tokens differ from request for {utterance_id!r}")
        return EmbeddingMatrix(utterance_id=utterance_id,
                               tokens=tuple(tokens), vectors=matrix)

    def close(self) -> None:
        pass


class SubprocessProvider:
    """Talks to a long-running sidecar over the stdin/stdout protocol."""

    def __init__(self, command: str | Sequence[str], *,
                 provider_id: str | None = None, timeout_s: float = 300.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        digest = hashlib.sha256(" ".join(self.command).encode()).hexdigest()[:12]
        self.provider_id = provider_id or f"subprocess-{digest}"
        self.timeout_s = timeout_s
        self._proc: subprocess.Popen | None = None

    def _ensure_started(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        return self._proc

    def embed(self, utterance_id: str, tokens: list[str]) -> EmbeddingMatrix:
        proc = self._ensure_started()
        try:
            exchange.write_request(proc.stdin, utterance_id, tokens)
            payload = exchange.read_payload(proc.stdout)
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(
                f"embedding provider died on {utterance_id!r}: {exc}") from None
        if payload is None:
            raise ProtocolError(
                f"embedding provider closed stream on {utterance_id!r}")
        reply_id, reply_tokens, matrix = payload
        if reply_id != utterance_id:
            raise ProtocolError(
                f"reply id {reply_id!r} for request {utterance_id!r}")
        if list(reply_tokens) != list(tokens):
            raise ProtocolError(
                f"reply tokens differ from request for {utterance_id!r}")
        return EmbeddingMatrix(utterance_id=utterance_id,
                               tokens=tuple(tokens), vectors=matrix)

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=10)
            except Exception:
                self._proc.kill()
        self._proc = None


class EmbeddingCache:
    """One exchange-format file per (provider id, text hash)."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _path(self, provider_id: str, tokens: Sequence[str]) -> Path:
        safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in provider_id)
        text_hash = hashlib.sha256(
            "\x1f".join(tokens).encode("utf-8")).hexdigest()
        return self.root / safe / f"{text_hash}.emb"

    def get(self, provider_id: str, utterance_id: str,
            tokens: Sequence[str]) -> EmbeddingMatrix | None:
        path = self._path(provider_id, tokens)
        if not path.exists():
            return None
        with path.open("rb") as fh:
            payload = exchange.read_payload(fh)
        if payload is None:
            return None
        _, stored_tokens, matrix = payload
        if list(stored_tokens) != list(tokens):
            return None  # hash collision or stale entry: recompute
        return EmbeddingMatrix(utterance_id=utterance_id,
                               tokens=tuple(tokens), vectors=matrix)

    def put(self, provider_id: str, matrix: EmbeddingMatrix) -> None:
        path = self._path(provider_id, matrix.tokens)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        with tmp.open("wb") as fh:
            exchange.write_payload(fh, matrix.utterance_id,
                                   list(matrix.tokens), matrix.vectors)
        tmp.replace(path)


def request_embeddings(
    items: Iterable[tuple[str, list[str]]],
    provider: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
) -> list[EmbeddingMatrix]:
    """Fetch one matrix per (utterance_id, tokens) item, cache-first."""
    out: list[EmbeddingMatrix] = []
    for utterance_id, tokens in items:
        if cache is not None:
            hit = cache.get(provider.provider_id, utterance_id, tokens)
            if hit is not None:
                out.append(hit)
                continue
        matrix = provider.embed(utterance_id, list(tokens))
        if list(matrix.tokens) != list(tokens):
            raise ProtocolError(
                f"provider returned {len(matrix.tokens)} tokens for "
                f"{len(tokens)} requested ({utterance_id!r})")
        if cache is not None and len(matrix):
            cache.put(provider.provider_id, matrix)
        out.append(matrix)
    return out
