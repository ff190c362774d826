"""Encoder loading, per-word embedding with sub-token pooling, serve loop."""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np
import torch

from . import protocol
from .protocol import WireError

SELFTEST_SENTENCES = [
    "Bonjour, pouvez-vous décliner votre identité pour la commission ?",
    "Le témoin affirme qu'il n'était pas présent ce soir-là.",
    "Nous reprendrons l'audience demain matin à neuf heures.",
    "La greffière a déposé les pièces au dossier hier après-midi.",
    "Merci, maître, vous pouvez poursuivre votre contre-interrogatoire.",
]


class StartupError(RuntimeError):
    """Configuration or checkpoint problem detected before serving."""


@dataclass(frozen=True)
class ProviderConfig:
    checkpoint: str
    layer: int = -1  # hidden-state index; -1 is the last hidden layer
    max_tokens_per_request: int = 10_000
    device: str = "cpu"


class EncoderService:
    """Wraps a pretrained encoder; one request in flight at a time."""

    def __init__(self, config: ProviderConfig):
        try:
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:  # pragma: no cover
            raise StartupError(f"transformers unavailable: {exc}") from exc
        self.config = config
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(config.checkpoint)
            self.model = AutoModel.from_pretrained(config.checkpoint)
        except Exception as exc:
            raise StartupError(
                f"cannot load checkpoint {config.checkpoint!r}: {exc}") from exc
        self.model.to(config.device)
        self.model.eval()
        # hidden_states has num_hidden_layers + 1 entries (embeddings first)
        depth = int(self.model.config.num_hidden_layers) + 1
        if not -depth <= config.layer < depth:
            raise StartupError(
                f"layer {config.layer} out of range for a "
                f"{depth - 1}-layer encoder")
        self.dim = int(self.model.config.hidden_size)
        self._max_positions = int(getattr(self.model.config,
                                          "max_position_embeddings", 512))

    def _pieces(self, word: str) -> list[int]:
        ids = self.tokenizer.encode(word, add_special_tokens=False)
        if not ids:
            ids = [self.tokenizer.unk_token_id]
        return ids

    def embed_tokens(self, words: list[str]) -> np.ndarray:
        """One float32 row per word; sub-token vectors are mean-pooled."""
        if not words:
            return np.zeros((0, self.dim), dtype=np.float32)
        spans: list[tuple[int, int]] = []
        ids: list[int] = [self.tokenizer.cls_token_id]
        for word in words:
            pieces = self._pieces(word)
            spans.append((len(ids), len(ids) + len(pieces)))
            ids.extend(pieces)
        ids.append(self.tokenizer.sep_token_id)
        if len(ids) > self._max_positions:
            raise ValueError(
                f"sequence of {len(ids)} pieces exceeds the encoder's "
                f"{self._max_positions} positions")
        with torch.no_grad():
            output = self.model(
                input_ids=torch.tensor([ids], device=self.config.device),
                output_hidden_states=True)
        hidden = output.hidden_states[self.config.layer][0]
        rows = [hidden[start:stop].mean(dim=0) for start, stop in spans]
        return torch.stack(rows).cpu().numpy().astype(np.float32)

    def serve(self, stdin: BinaryIO | None = None,
              stdout: BinaryIO | None = None) -> None:
        """Answer requests until stdin closes; errors get error replies."""
        stdin = stdin if stdin is not None else sys.stdin.buffer
        stdout = stdout if stdout is not None else sys.stdout.buffer
        while True:
            try:
                request = protocol.read_request(stdin)
            except WireError:
                return  # stream is unusable; exit quietly
            if request is None:
                return
            utterance_id, tokens = request
            if len(tokens) > self.config.max_tokens_per_request:
                protocol.write_error(
                    stdout, utterance_id,
                    f"request has {len(tokens)} tokens, limit is "
                    f"{self.config.max_tokens_per_request}")
                continue
            try:
                matrix = self.embed_tokens(tokens)
            except Exception as exc:
                protocol.write_error(stdout, utterance_id, str(exc))
                continue
            protocol.write_payload(stdout, utterance_id, tokens, matrix)


def selftest(config: ProviderConfig) -> list[str]:
    """Run the conformance checks; returns the names of failing checks."""
    failures: list[str] = []
    service = EncoderService(config)
    for sentence in SELFTEST_SENTENCES:
        words = sentence.split()
        first = service.embed_tokens(words)
        if first.shape != (len(words), service.dim):
            failures.append(f"shape-contract: {sentence!r} gave {first.shape}")
            continue
        second = service.embed_tokens(words)
        if not np.array_equal(first, second):
            failures.append(f"determinism: {sentence!r} not bit-identical")
        norms = np.linalg.norm(first.astype(np.float64), axis=1)
        if not np.all(norms > 0):
            failures.append(f"zero-norm-row: {sentence!r}")
            continue
        unit = first.astype(np.float64) / norms[:, None]
        self_cos = (unit * unit).sum(axis=1)
        if not np.all(np.abs(self_cos - 1.0) <= 1e-6):
            failures.append(f"self-cosine: {sentence!r}")
    return failures
