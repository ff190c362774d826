"""Minimum-edit-distance alignment with deterministic error counts.

Unit costs (substitution 1, insertion 1, deletion 1, match 0). Ties between
equal-cost alignments are broken canonically: keep the alignment with the
most exact matches, then prefer substitution over insertion+deletion, then
deletion over insertion. Given the cost and the match count, the S/I/D
counts of a cell are fully determined, so this order makes the counts unique
and swapping the two sides exactly swaps insertions with deletions.

The DP keeps two rows of costs and per-cell running counts, so memory stays
linear in the hypothesis length even for 10^4-token utterances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

UNIT_WORD = "word"
UNIT_CHAR = "char"


@dataclass(frozen=True)
class AlignmentResult:
    """Edit counts for one reference/hypothesis pair at one unit."""

    unit: str
    n_ref: int
    substitutions: int
    insertions: int
    deletions: int
    correct: int

    def __post_init__(self) -> None:
        if self.correct + self.substitutions + self.deletions != self.n_ref:
            raise ValueError("counts do not cover the reference")
        if min(self.n_ref, self.substitutions, self.insertions,
               self.deletions, self.correct) < 0:
            raise ValueError("negative count")

    @property
    def edit_cost(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def error_rate(self) -> float | None:
        """(S+I+D)/n_ref, or None for an empty reference."""
        if self.n_ref == 0:
            return None
        return self.edit_cost / self.n_ref

    def to_json_dict(self) -> dict:
        return {
            "n_ref": self.n_ref,
            "sub": self.substitutions,
            "ins": self.insertions,
            "del": self.deletions,
            "correct": self.correct,
        }

    @classmethod
    def from_json_dict(cls, unit: str, d: dict) -> "AlignmentResult":
        return cls(unit=unit, n_ref=d["n_ref"], substitutions=d["sub"],
                   insertions=d["ins"], deletions=d["del"], correct=d["correct"])


def word_tokens(text: str) -> list[str]:
    """Whitespace tokenization of already-normalized text."""
    return text.split()


def char_tokens(text: str) -> list[str]:
    """Unicode scalar values, inter-word spaces included as tokens."""
    return list(text)


def align(ref_tokens: Sequence[str], hyp_tokens: Sequence[str],
          unit: str = UNIT_WORD) -> AlignmentResult:
    """Align two token sequences and count S/I/D/correct.

    Either sequence may be empty; an empty reference yields n_ref=0 with all
    hypothesis tokens counted as insertions (the rate is then undefined and
    reported as missing, never zero).
    """
    n_ref = len(ref_tokens)
    n_hyp = len(hyp_tokens)

    # Common prefix/suffix tokens are always matched by some optimal
    # alignment; trimming them keeps the DP small for near-identical pairs.
    lo = 0
    while lo < n_ref and lo < n_hyp and ref_tokens[lo] == hyp_tokens[lo]:
        lo += 1
    hi = 0
    while (hi < n_ref - lo and hi < n_hyp - lo
           and ref_tokens[n_ref - 1 - hi] == hyp_tokens[n_hyp - 1 - hi]):
        hi += 1
    trimmed_matches = lo + hi
    ref = ref_tokens[lo:n_ref - hi]
    hyp = hyp_tokens[lo:n_hyp - hi]

    subs, ins, dels, corr = _align_counts(ref, hyp)
    return AlignmentResult(
        unit=unit,
        n_ref=n_ref,
        substitutions=subs,
        insertions=ins,
        deletions=dels,
        correct=corr + trimmed_matches,
    )


def _align_counts(ref: Sequence[str], hyp: Sequence[str]) -> tuple[int, int, int, int]:
    if not ref:
        return 0, len(hyp), 0, 0
    if not hyp:
        return 0, 0, len(ref), 0

    m = len(hyp)
    # prev/cur: cost row plus parallel (sub, ins, del, correct) count rows.
    prev_cost = list(range(m + 1))
    prev_counts: list[tuple[int, int, int, int]] = [(0, j, 0, 0) for j in range(m + 1)]

    for i, r in enumerate(ref):
        cur_cost = [i + 1] + [0] * m
        cur_counts: list[tuple[int, int, int, int]] = [(0, 0, i + 1, 0)] + [(0, 0, 0, 0)] * m
        for j, h in enumerate(hyp):
            if r == h:
                best_cost = prev_cost[j]
                s, ii, d, c = prev_counts[j]
                best_counts = (s, ii, d, c + 1)
            else:
                best_cost = prev_cost[j] + 1
                s, ii, d, c = prev_counts[j]
                best_counts = (s + 1, ii, d, c)
            del_cost = prev_cost[j + 1] + 1
            if del_cost < best_cost or (del_cost == best_cost
                                        and prev_counts[j + 1][3] > best_counts[3]):
                best_cost = del_cost
                s, ii, d, c = prev_counts[j + 1]
                best_counts = (s, ii, d + 1, c)
            ins_cost = cur_cost[j] + 1
            if ins_cost < best_cost or (ins_cost == best_cost
                                        and cur_counts[j][3] > best_counts[3]):
                best_cost = ins_cost
                s, ii, d, c = cur_counts[j]
                best_counts = (s, ii + 1, d, c)
            cur_cost[j + 1] = best_cost
            cur_counts[j + 1] = best_counts
        prev_cost = cur_cost
        prev_counts = cur_counts

    subs, ins, dels, corr = prev_counts[m]
    return subs, ins, dels, corr
