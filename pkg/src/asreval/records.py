"""Manifest and hypothesis data formats.

Both files are line-delimited JSON, one object per line. A manifest may start
with a header line ``#meta {"format_version": 1}``; when absent, version 1 is
assumed. Text fields are opaque Unicode here: all normalization happens
downstream, so references round-trip byte-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

GENDERS = ("male", "female", "unknown")
SPLITS = ("train", "dev", "test")

FORMAT_VERSION = 1

_META_PREFIX = "#meta "


class ManifestError(ValueError):
    """Raised on a malformed manifest or hypothesis file.

    Carries the 1-based line number of the first violation when known.
    """

    def __init__(self, message: str, *, path: str | Path | None = None,
                 line: int | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if self.path is not None:
            where = f"{self.path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


@dataclass(frozen=True)
class UtteranceRecord:
    """One audio segment with its reference transcript and metadata."""

    id: str
    duration_s: float
    reference: str
    speaker_id: str
    gender: str
    dataset: str
    split: str
    audio_path: str | None = None  # absent for score-only runs

    def to_json_dict(self) -> dict:
        d = {
            "id": self.id,
            "duration_s": self.duration_s,
            "reference": self.reference,
            "speaker_id": self.speaker_id,
            "gender": self.gender,
            "dataset": self.dataset,
            "split": self.split,
        }
        if self.audio_path is not None:
            d["audio_path"] = self.audio_path
        return d


@dataclass(frozen=True)
class Hypothesis:
    """One transcript produced for an utterance.

    ``wall_time_s`` is absent for replayed runs without timing; ``failed``
    marks utterances where the transcriber errored (empty text, no timing).
    """

    utterance_id: str
    text: str
    wall_time_s: float | None = None
    prompt_id: str | None = None
    failed: bool = False

    def to_json_dict(self) -> dict:
        d: dict = {"utterance_id": self.utterance_id, "text": self.text}
        if self.wall_time_s is not None:
            d["wall_time_s"] = self.wall_time_s
        if self.prompt_id is not None:
            d["prompt_id"] = self.prompt_id
        if self.failed:
            d["failed"] = True
        return d


@dataclass
class Manifest:
    """Immutable, validated collection of utterance records."""

    records: list[UtteranceRecord]
    format_version: int = FORMAT_VERSION
    _by_id: dict[str, UtteranceRecord] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._by_id = {r.id: r for r in self.records}
        if len(self._by_id) != len(self.records):
            seen: set[str] = set()
            for r in self.records:
                if r.id in seen:
                    raise ManifestError(f"duplicate utterance id {r.id!r}")
                seen.add(r.id)

    def __iter__(self) -> Iterator[UtteranceRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, utterance_id: str) -> UtteranceRecord:
        return self._by_id[utterance_id]

    def __contains__(self, utterance_id: str) -> bool:
        return utterance_id in self._by_id

    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def total_duration_s(self) -> float:
        return sum(r.duration_s for r in self.records)


def _parse_record(obj: dict, path: Path, line: int, *, rtf_required: bool) -> UtteranceRecord:
    required = ("id", "duration_s", "reference", "speaker_id", "gender",
                "dataset", "split")
    for key in required:
        if key not in obj:
            raise ManifestError(f"missing field {key!r}", path=path, line=line)
    duration = obj["duration_s"]
    if not isinstance(duration, (int, float)) or isinstance(duration, bool):
        raise ManifestError("duration_s must be a number", path=path, line=line)
    if duration < 0:
        raise ManifestError("negative duration", path=path, line=line)
    if rtf_required and duration <= 0:
        raise ManifestError("non-positive duration (required for RTF)",
                            path=path, line=line)
    reference = obj["reference"]
    if not isinstance(reference, str) or not reference.strip():
        raise ManifestError("reference empty after whitespace trim",
                            path=path, line=line)
    gender = obj["gender"]
    if gender not in GENDERS:
        raise ManifestError(f"gender must be one of {GENDERS}, got {gender!r}",
                            path=path, line=line)
    split = obj["split"]
    if split not in SPLITS:
        raise ManifestError(f"split must be one of {SPLITS}, got {split!r}",
                            path=path, line=line)
    return UtteranceRecord(
        id=str(obj["id"]),
        duration_s=float(duration),
        reference=reference,
        speaker_id=str(obj["speaker_id"]),
        gender=gender,
        dataset=str(obj["dataset"]),
        split=split,
        audio_path=obj.get("audio_path"),
    )


def load_manifest(path: str | Path, *, rtf_required: bool = False) -> Manifest:
    """Load and validate a manifest JSONL file.

    When ``rtf_required`` is set, every record must have a strictly positive
    duration (RTF divides by total audio duration).
    """
    path = Path(path)
    records: list[UtteranceRecord] = []
    ids_seen: set[str] = set()
    version = FORMAT_VERSION
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            stripped = raw.strip()
            if not stripped:
                continue
            if stripped.startswith(_META_PREFIX):
                try:
                    meta = json.loads(stripped[len(_META_PREFIX):])
                    version = int(meta["format_version"])
                except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                    raise ManifestError("malformed #meta header",
                                        path=path, line=lineno) from None
                continue
            if stripped.startswith("#"):
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"malformed JSON line: {exc.msg}",
                                    path=path, line=lineno) from None
            record = _parse_record(obj, path, lineno, rtf_required=rtf_required)
            if record.id in ids_seen:
                raise ManifestError(f"duplicate utterance id {record.id!r}",
                                    path=path, line=lineno)
            ids_seen.add(record.id)
            records.append(record)
    return Manifest(records=records, format_version=version)


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(_META_PREFIX + json.dumps(
            {"format_version": manifest.format_version}) + "\n")
        for record in manifest:
            fh.write(json.dumps(record.to_json_dict(), ensure_ascii=False) + "\n")


def load_hypotheses(path: str | Path, manifest: Manifest) -> list[Hypothesis]:
    """Load hypotheses and join them to the manifest.

    Every hypothesis must reference a manifest record; several hypotheses per
    utterance are allowed when they carry distinct prompt ids.
    """
    path = Path(path)
    hyps: list[Hypothesis] = []
    orphans: list[str] = []
    keys_seen: set[tuple[str, str | None]] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            stripped = raw.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"malformed JSON line: {exc.msg}",
                                    path=path, line=lineno) from None
            if "utterance_id" not in obj or "text" not in obj:
                raise ManifestError("hypothesis needs utterance_id and text",
                                    path=path, line=lineno)
            hyp = Hypothesis(
                utterance_id=str(obj["utterance_id"]),
                text=obj["text"] if isinstance(obj["text"], str) else "",
                wall_time_s=obj.get("wall_time_s"),
                prompt_id=obj.get("prompt_id"),
                failed=bool(obj.get("failed", False)),
            )
            if hyp.wall_time_s is not None and hyp.wall_time_s < 0:
                raise ManifestError("negative wall_time_s", path=path, line=lineno)
            key = (hyp.utterance_id, hyp.prompt_id)
            if key in keys_seen:
                raise ManifestError(
                    f"duplicate hypothesis for utterance {hyp.utterance_id!r}"
                    + (f" prompt {hyp.prompt_id!r}" if hyp.prompt_id else ""),
                    path=path, line=lineno)
            keys_seen.add(key)
            if hyp.utterance_id not in manifest:
                orphans.append(hyp.utterance_id)
            hyps.append(hyp)
    if orphans:
        raise ManifestError(
            "hypotheses reference unknown utterance ids: "
            + ", ".join(sorted(set(orphans))), path=path)
    return hyps


def write_hypotheses(hyps: Iterable[Hypothesis], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for hyp in hyps:
            fh.write(json.dumps(hyp.to_json_dict(), ensure_ascii=False) + "\n")


def missing_coverage(manifest: Manifest, hypotheses: Iterable[Hypothesis]) -> list[str]:
    """Manifest ids with no usable hypothesis, in manifest order.

    Failed hypotheses do not count as coverage; downstream metrics mark these
    utterances (and any stratum made of them) as undefined rather than zero.
    """
    covered = {h.utterance_id for h in hypotheses if not h.failed}
    return [r.id for r in manifest if r.id not in covered]
