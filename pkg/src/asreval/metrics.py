"""Micro-aggregation of alignment counts into corpus-level rates.

Counts are summed across utterances before dividing, so longer utterances
weigh more. A stratum whose summed reference length is zero has undefined
rates (reported missing, not 0); DIR is undefined when no insertions exist.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

from .alignment import AlignmentResult


@dataclass(frozen=True)
class CountSummary:
    """Summed S/I/D/correct over a set of utterances at one unit."""

    unit: str
    n_utterances: int
    n_ref: int
    substitutions: int
    insertions: int
    deletions: int
    correct: int

    @property
    def rate_pct(self) -> float | None:
        """100 * (S+I+D) / n_ref; None when the stratum has no reference units."""
        if self.n_ref == 0:
            return None
        return 100.0 * (self.substitutions + self.insertions + self.deletions) / self.n_ref

    @property
    def dir(self) -> float | None:
        """Deletions/insertions ratio; None when there are no insertions."""
        if self.insertions == 0:
            return None
        return self.deletions / self.insertions

    @property
    def skip_corrected_rate_pct(self) -> float | None:
        """Rate with the deletion total replaced by the insertion total.

        A rough correction for wholesale segment skipping: if a model
        silently drops spans, D balloons while I stays typical, and setting
        D := I estimates the rate without the skips.
        """
        if self.n_ref == 0:
            return None
        return 100.0 * (self.substitutions + 2 * self.insertions) / self.n_ref

    def to_json_dict(self) -> dict:
        return {
            "unit": self.unit,
            "n_utterances": self.n_utterances,
            "n_ref": self.n_ref,
            "sub": self.substitutions,
            "ins": self.insertions,
            "del": self.deletions,
            "correct": self.correct,
            "rate_pct": self.rate_pct,
            "dir": self.dir,
            "skip_corrected_rate_pct": self.skip_corrected_rate_pct,
        }


def aggregate(results: Iterable[AlignmentResult]) -> CountSummary:
    """Micro-aggregate alignment results sharing one unit."""
    unit: str | None = None
    n = n_ref = subs = ins = dels = corr = 0
    for r in results:
        if unit is None:
            unit = r.unit
        elif r.unit != unit:
            raise ValueError(f"mixed units in aggregation: {unit!r} and {r.unit!r}")
        n += 1
        n_ref += r.n_ref
        subs += r.substitutions
        ins += r.insertions
        dels += r.deletions
        corr += r.correct
    return CountSummary(unit=unit or "word", n_utterances=n, n_ref=n_ref,
                        substitutions=subs, insertions=ins, deletions=dels,
                        correct=corr)


def aggregate_by(
    keyed: Iterable[tuple[Hashable, AlignmentResult]],
) -> dict[Hashable, CountSummary]:
    """Aggregate separately per grouping key, preserving first-seen key order."""
    groups: dict[Hashable, list[AlignmentResult]] = {}
    for key, result in keyed:
        groups.setdefault(key, []).append(result)
    return {key: aggregate(results) for key, results in groups.items()}


@dataclass(frozen=True)
class AggregateMetrics:
    """Word and character rates for one utterance set (one stratum)."""

    wer_pct: float | None
    cer_pct: float | None
    dir: float | None
    total_ref_words: int
    skip_corrected_wer_pct: float | None
    n_utterances: int = 0

    @classmethod
    def from_counts(cls, word: CountSummary,
                    char: CountSummary | None = None) -> "AggregateMetrics":
        return cls(
            wer_pct=word.rate_pct,
            cer_pct=char.rate_pct if char is not None else None,
            dir=word.dir,
            total_ref_words=word.n_ref,
            skip_corrected_wer_pct=word.skip_corrected_rate_pct,
            n_utterances=word.n_utterances,
        )

    def to_json_dict(self) -> dict:
        return {
            "wer_pct": self.wer_pct,
            "cer_pct": self.cer_pct,
            "dir": self.dir,
            "total_ref_words": self.total_ref_words,
            "skip_corrected_wer_pct": self.skip_corrected_wer_pct,
            "n_utterances": self.n_utterances,
        }


def relative_gender_delta_pct(
    by_gender: Mapping[str, AggregateMetrics]) -> float | None:
    """Relative male/female WER delta: 100 * (male - female) / male.

    Positive values mean the female stratum fares better. None when either
    stratum is missing or male WER is zero.
    """
    male = by_gender.get("male")
    female = by_gender.get("female")
    if male is None or female is None:
        return None
    if male.wer_pct is None or female.wer_pct is None or male.wer_pct == 0:
        return None
    return 100.0 * (male.wer_pct - female.wer_pct) / male.wer_pct


def weighted_mean(values: Sequence[float], weights: Sequence[float]) -> float | None:
    """Weight-proportional mean; None when the weights sum to zero."""
    if len(values) != len(weights):
        raise ValueError("values and weights differ in length")
    total = sum(weights)
    if total == 0:
        return None
    return sum(v * w for v, w in zip(values, weights)) / total
