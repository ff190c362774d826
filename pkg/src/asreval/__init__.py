"""Model-agnostic ASR evaluation harness.

Dataset manifests in, stratified WER/CER/DIR/RTF and semantic-F1 reports
out, with pluggable transcription backends and French-aware normalization
applied identically to references and hypotheses.
"""

from .alignment import AlignmentResult, align, char_tokens, word_tokens
from .metrics import AggregateMetrics, CountSummary, aggregate, aggregate_by
from .numbers_fr import verbalize_number_fr
from .records import (
    Hypothesis,
    Manifest,
    UtteranceRecord,
    load_hypotheses,
    load_manifest,
    missing_coverage,
)
from .semantic import (
    DeterministicProvider,
    EmbeddingMatrix,
    SemanticScore,
    greedy_match_score,
    request_embeddings,
    score_run,
)
from .textnorm import (
    NormalizationProfile,
    get_profile,
    normalize,
    normalize_basic,
    normalize_whisper,
    prenormalize_unicode,
)
from .transcribers import TimingRecord, TranscriberSpec, prompt_sweep, rtf

__version__ = "0.1.0"
