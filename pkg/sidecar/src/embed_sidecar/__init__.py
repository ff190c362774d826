"""Serves per-word contextual embeddings from a multilingual encoder.

Speaks the evaluation harness's exchange protocol on stdin/stdout: one
length-prefixed token-list request in, one binary embedding payload out, in
order, one request in flight. Words that the tokenizer expands into several
sub-tokens are mean-pooled back to a single row, so the reply always has one
row per requested token.
"""

from .service import EncoderService, ProviderConfig, selftest

__version__ = "0.1.0"
