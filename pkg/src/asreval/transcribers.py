"""Uniform transcription interface over replay files, subprocesses, and HTTP.

All adapters honor the batch-1 timing contract: one utterance in flight per
adapter, wall time from a monotonic clock. The HTTP adapter starts its clock
only after the request body (the audio) is fully written and stops once the
response body is fully read, so upload time is excluded and result download
included. No retries inside an utterance (a retry would corrupt RTF);
failures are recorded, and three consecutive failures abort the run.
"""

from __future__ import annotations

import base64
import hashlib
import json
import shlex
import subprocess
import time
import urllib.parse
from dataclasses import dataclass, field
from http.client import HTTPConnection, HTTPSConnection
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .records import Hypothesis, Manifest, UtteranceRecord

KIND_REPLAY = "replay"
KIND_SUBPROCESS = "subprocess"
KIND_HTTP = "http"

PHASE_INFERENCE = "inference"
PHASE_DOWNLOAD = "download_of_result"
PHASE_UPLOAD = "upload_of_audio"

MAX_CONSECUTIVE_FAILURES = 3


class TranscriberError(RuntimeError):
    pass


class RunAborted(TranscriberError):
    """Raised after three consecutive utterance failures."""

    def __init__(self, utterance_id: str):
        self.utterance_id = utterance_id
        super().__init__(
            f"{MAX_CONSECUTIVE_FAILURES} consecutive failures, "
            f"last at utterance {utterance_id!r}")


@dataclass(frozen=True)
class HttpTemplate:
    """Vendor-specific request/response shaping for the generic HTTP adapter."""

    method: str = "POST"
    headers: dict = field(default_factory=dict)
    audio_encoding: str = "raw"  # raw bytes body, or base64 inside a JSON body
    body_template: str | None = None  # JSON string with {audio_b64}/{prompt}/{lang}
    response_kind: str = "json"  # "json" or "text"
    response_text_field: str = "text"  # dot path into the JSON reply


@dataclass(frozen=True)
class TranscriberSpec:
    """Declarative description of a transcription backend."""

    id: str
    kind: str
    target: str  # hypotheses path | command template | URL
    prompt: str | None = None
    language_hint: str | None = None
    timeout_s: float = 120.0
    http: HttpTemplate = field(default_factory=HttpTemplate)

    def __post_init__(self) -> None:
        if self.kind not in (KIND_REPLAY, KIND_SUBPROCESS, KIND_HTTP):
            raise ValueError(f"unknown transcriber kind {self.kind!r}")
        if self.kind == KIND_HTTP:
            parsed = urllib.parse.urlparse(self.target)
            if parsed.scheme not in ("http", "https") or not parsed.netloc:
                raise ValueError(f"http transcriber needs a URL, got {self.target!r}")
        if self.prompt is not None and self.kind == KIND_REPLAY:
            raise ValueError("replay transcribers cannot take a prompt")

    def with_prompt(self, prompt: str) -> "TranscriberSpec":
        return TranscriberSpec(id=self.id, kind=self.kind, target=self.target,
                               prompt=prompt, language_hint=self.language_hint,
                               timeout_s=self.timeout_s, http=self.http)

    @classmethod
    def from_json(cls, path: str | Path) -> "TranscriberSpec":
        path = Path(path)
        obj = json.loads(path.read_text(encoding="utf-8"))
        http = HttpTemplate(**obj.get("http", {}))
        target = obj["target"]
        if obj["kind"] == KIND_REPLAY and not Path(target).is_absolute():
            target = str(path.parent / target)
        return cls(id=obj["id"], kind=obj["kind"], target=target,
                   prompt=obj.get("prompt"),
                   language_hint=obj.get("language_hint"),
                   timeout_s=float(obj.get("timeout_s", 120.0)), http=http)


@dataclass(frozen=True)
class TimingRecord:
    """Wall time for one successfully transcribed utterance."""

    utterance_id: str
    wall_time_s: float
    included_phases: frozenset[str] = frozenset({PHASE_INFERENCE})
    excluded_phases: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.wall_time_s < 0:
            raise ValueError("negative wall time")
        if PHASE_UPLOAD in self.included_phases:
            raise ValueError("audio upload must never be timed")

    def to_json_dict(self) -> dict:
        return {
            "utterance_id": self.utterance_id,
            "wall_time_s": self.wall_time_s,
            "included_phases": sorted(self.included_phases),
            "excluded_phases": sorted(self.excluded_phases),
        }


class _SerialGuard:
    """Detects violations of the one-utterance-in-flight contract."""

    def __init__(self) -> None:
        self._busy = False

    def __enter__(self) -> None:
        if self._busy:
            raise TranscriberError(
                "concurrent transcribe() calls on one adapter "
                "(batch-1 contract)")
        self._busy = True

    def __exit__(self, *exc) -> None:
        self._busy = False


class Transcriber:
    """Base adapter; subclasses implement _transcribe_once."""

    def __init__(self, spec: TranscriberSpec):
        self.spec = spec
        self._guard = _SerialGuard()

    def transcribe(self, utterance: UtteranceRecord,
                   ) -> tuple[Hypothesis, TimingRecord | None]:
        with self._guard:
            try:
                return self._transcribe_once(utterance)
            except TranscriberError:
                raise
            except Exception:
                return (Hypothesis(utterance_id=utterance.id, text="",
                                   prompt_id=self._prompt_id(), failed=True),
                        None)

    def _prompt_id(self) -> str | None:
        return None

    def _transcribe_once(self, utterance: UtteranceRecord,
                         ) -> tuple[Hypothesis, TimingRecord | None]:
        raise NotImplementedError

    def close(self) -> None:
        pass


class ReplayTranscriber(Transcriber):
    """Replays hypotheses from a JSONL file; output is a pure function of it."""

    def __init__(self, spec: TranscriberSpec):
        super().__init__(spec)
        self._by_id: dict[str, Hypothesis] = {}
        path = Path(spec.target)
        with path.open("r", encoding="utf-8") as fh:
            for raw in fh:
                raw = raw.strip()
                if not raw or raw.startswith("#"):
                    continue
                obj = json.loads(raw)
                hyp = Hypothesis(utterance_id=str(obj["utterance_id"]),
                                 text=obj.get("text", ""),
                                 wall_time_s=obj.get("wall_time_s"),
                                 prompt_id=obj.get("prompt_id"),
                                 failed=bool(obj.get("failed", False)))
                self._by_id[hyp.utterance_id] = hyp

    def _transcribe_once(self, utterance: UtteranceRecord,
                         ) -> tuple[Hypothesis, TimingRecord | None]:
        hyp = self._by_id.get(utterance.id)
        if hyp is None or hyp.failed:
            return (Hypothesis(utterance_id=utterance.id, text="", failed=True),
                    None)
        timing = None
        if hyp.wall_time_s is not None:
            # Recorded by the original run; replay passes it through.
            timing = TimingRecord(utterance_id=utterance.id,
                                  wall_time_s=hyp.wall_time_s)
        return hyp, timing


class SubprocessTranscriber(Transcriber):
    """Runs a command per utterance; the transcript is read from stdout.

    The command template is shell-lexed once; {audio}, {lang} and {prompt}
    placeholders are substituted per argument, never re-quoted.
    """

    def __init__(self, spec: TranscriberSpec):
        super().__init__(spec)
        self._argv_template = shlex.split(spec.target)

    def _prompt_id(self) -> str | None:
        return None if self.spec.prompt is None else _prompt_id_of(self.spec.prompt)

    def _argv(self, utterance: UtteranceRecord) -> list[str]:
        mapping = {
            "audio": utterance.audio_path or "",
            "lang": self.spec.language_hint or "",
            "prompt": self.spec.prompt or "",
        }
        return [arg.format(**mapping) for arg in self._argv_template]

    def _transcribe_once(self, utterance: UtteranceRecord,
                         ) -> tuple[Hypothesis, TimingRecord | None]:
        argv = self._argv(utterance)
        start = time.perf_counter()
        try:
            proc = subprocess.run(argv, capture_output=True,
                                  timeout=self.spec.timeout_s)
        except (subprocess.TimeoutExpired, OSError):
            return (Hypothesis(utterance_id=utterance.id, text="",
                               prompt_id=self._prompt_id(), failed=True), None)
        elapsed = time.perf_counter() - start
        if proc.returncode != 0:
            return (Hypothesis(utterance_id=utterance.id, text="",
                               prompt_id=self._prompt_id(), failed=True), None)
        text = proc.stdout.decode("utf-8", errors="replace").strip()
        hyp = Hypothesis(utterance_id=utterance.id, text=text,
                         wall_time_s=elapsed, prompt_id=self._prompt_id())
        return hyp, TimingRecord(utterance_id=utterance.id, wall_time_s=elapsed)


class HttpTranscriber(Transcriber):
    """POSTs audio to an endpoint and reads the transcript from the reply."""

    def _prompt_id(self) -> str | None:
        return None if self.spec.prompt is None else _prompt_id_of(self.spec.prompt)

    def _build_body(self, audio: bytes) -> tuple[bytes, dict]:
        tpl = self.spec.http
        headers = dict(tpl.headers)
        if tpl.audio_encoding == "raw":
            headers.setdefault("Content-Type", "application/octet-stream")
            if self.spec.prompt:
                headers.setdefault("X-Prompt", self.spec.prompt)
            if self.spec.language_hint:
                headers.setdefault("X-Language", self.spec.language_hint)
            return audio, headers
        if tpl.audio_encoding == "base64-json":
            template = tpl.body_template or '{"audio_b64": "{audio_b64}"}'
            body = template.replace("{audio_b64}",
                                    base64.b64encode(audio).decode("ascii"))
            body = body.replace("{prompt}", self.spec.prompt or "")
            body = body.replace("{lang}", self.spec.language_hint or "")
            headers.setdefault("Content-Type", "application/json")
            return body.encode("utf-8"), headers
        raise ValueError(f"unknown audio encoding {tpl.audio_encoding!r}")

    def _extract_text(self, payload: bytes) -> str:
        tpl = self.spec.http
        if tpl.response_kind == "text":
            return payload.decode("utf-8", errors="replace").strip()
        obj = json.loads(payload.decode("utf-8"))
        value = obj
        for part in tpl.response_text_field.split("."):
            value = value[part]
        return str(value)

    def _transcribe_once(self, utterance: UtteranceRecord,
                         ) -> tuple[Hypothesis, TimingRecord | None]:
        if not utterance.audio_path:
            return (Hypothesis(utterance_id=utterance.id, text="",
                               prompt_id=self._prompt_id(), failed=True), None)
        audio = Path(utterance.audio_path).read_bytes()
        body, headers = self._build_body(audio)
        parsed = urllib.parse.urlparse(self.spec.target)
        conn_cls = HTTPSConnection if parsed.scheme == "https" else HTTPConnection
        conn = conn_cls(parsed.netloc, timeout=self.spec.timeout_s)
        path = parsed.path or "/"
        if parsed.query:
            path += "?" + parsed.query
        try:
            # request() returns once headers and body are written: the clock
            # below therefore excludes the audio upload and covers inference
            # plus result download only.
            conn.request(self.spec.http.method, path, body=body, headers=headers)
            start = time.perf_counter()
            resp = conn.getresponse()
            payload = resp.read()
            elapsed = time.perf_counter() - start
        finally:
            conn.close()
        if not 200 <= resp.status < 300:
            return (Hypothesis(utterance_id=utterance.id, text="",
                               prompt_id=self._prompt_id(), failed=True), None)
        text = self._extract_text(payload)
        hyp = Hypothesis(utterance_id=utterance.id, text=text,
                         wall_time_s=elapsed, prompt_id=self._prompt_id())
        timing = TimingRecord(
            utterance_id=utterance.id, wall_time_s=elapsed,
            included_phases=frozenset({PHASE_INFERENCE, PHASE_DOWNLOAD}),
            excluded_phases=frozenset({PHASE_UPLOAD}))
        return hyp, timing


def _prompt_id_of(prompt: str) -> str:
    return "p-" + hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:8]


_ADAPTERS: dict[str, type[Transcriber]] = {
    KIND_REPLAY: ReplayTranscriber,
    KIND_SUBPROCESS: SubprocessTranscriber,
    KIND_HTTP: HttpTranscriber,
}


def make_transcriber(spec: TranscriberSpec) -> Transcriber:
    return _ADAPTERS[spec.kind](spec)


def run_transcription(
    transcriber: Transcriber, manifest: Manifest,
    on_result: Callable[[Hypothesis, TimingRecord | None], None] | None = None,
) -> tuple[list[Hypothesis], list[TimingRecord]]:
    """Transcribe a manifest strictly serially, aborting on a failure streak.

    Partial results accumulate through ``on_result`` before an abort, so a
    crashed run keeps its artifacts.
    """
    hyps: list[Hypothesis] = []
    timings: list[TimingRecord] = []
    consecutive_failures = 0
    for utterance in manifest:
        hyp, timing = transcriber.transcribe(utterance)
        hyps.append(hyp)
        if timing is not None:
            timings.append(timing)
        if on_result is not None:
            on_result(hyp, timing)
        if hyp.failed:
            consecutive_failures += 1
            if consecutive_failures >= MAX_CONSECUTIVE_FAILURES:
                raise RunAborted(utterance.id)
        else:
            consecutive_failures = 0
    return hyps, timings


def rtf(timings: Iterable[TimingRecord], manifest: Manifest) -> float | None:
    """Real-time factor in percent: 100 * total wall time / total audio time.

    Only successfully transcribed utterances contribute; None when there are
    none. 25% means a quarter second of compute per second of speech.
    """
    total_wall = 0.0
    total_audio = 0.0
    any_timing = False
    for t in timings:
        record = manifest[t.utterance_id]
        total_wall += t.wall_time_s
        total_audio += record.duration_s
        any_timing = True
    if not any_timing or total_audio == 0:
        return None
    return 100.0 * total_wall / total_audio


@dataclass(frozen=True)
class PromptResult:
    index: int  # 1-based position in the prompt list
    prompt: str
    wer_pct: float | None
    failed: bool = False


@dataclass(frozen=True)
class SweepReport:
    results: list[PromptResult]  # sorted by ascending WER, failures last
    selected: PromptResult

    def to_json_dict(self) -> dict:
        return {
            "results": [
                {"index": r.index, "prompt": r.prompt, "wer_pct": r.wer_pct,
                 "failed": r.failed}
                for r in self.results
            ],
            "selected": {"index": self.selected.index,
                         "prompt": self.selected.prompt,
                         "wer_pct": self.selected.wer_pct},
        }


def prompt_sweep(spec: TranscriberSpec, prompts: Sequence[str],
                 dev_manifest: Manifest, profile: str = "basic",
                 make: Callable[[TranscriberSpec], Transcriber] = make_transcriber,
                 ) -> SweepReport:
    """Evaluate each prompt on the dev set and pick the lowest-WER one.

    Ties go to the earliest prompt in the list. A prompt whose run fails
    entirely is excluded and flagged; all prompts failing is an error.
    """
    from .alignment import UNIT_WORD, align, word_tokens
    from .metrics import aggregate
    from .textnorm import get_profile

    if len(prompts) < 2:
        raise ValueError("a prompt sweep needs at least 2 prompts")
    if spec.kind == KIND_REPLAY:
        raise ValueError("replay transcribers are not prompt-capable")
    prof = get_profile(profile)

    results: list[PromptResult] = []
    for index, prompt in enumerate(prompts, start=1):
        transcriber = make(spec.with_prompt(prompt))
        try:
            hyps, _ = run_transcription(transcriber, dev_manifest)
        except RunAborted:
            results.append(PromptResult(index=index, prompt=prompt,
                                        wer_pct=None, failed=True))
            continue
        finally:
            transcriber.close()
        ok = [h for h in hyps if not h.failed]
        if not ok:
            results.append(PromptResult(index=index, prompt=prompt,
                                        wer_pct=None, failed=True))
            continue
        alignments = []
        for hyp in ok:
            record = dev_manifest[hyp.utterance_id]
            ref_norm, _ = prof.apply(record.reference)
            hyp_norm, _ = prof.apply(hyp.text)
            alignments.append(align(word_tokens(ref_norm),
                                    word_tokens(hyp_norm), unit=UNIT_WORD))
        results.append(PromptResult(index=index, prompt=prompt,
                                    wer_pct=aggregate(alignments).rate_pct))

    scored = [r for r in results if not r.failed and r.wer_pct is not None]
    if not scored:
        raise TranscriberError("every prompt failed during the sweep")
    ordered = sorted(scored, key=lambda r: (r.wer_pct, r.index))
    ordered += [r for r in results if r.failed or r.wer_pct is None]
    return SweepReport(results=ordered, selected=ordered[0])


def load_prompts(path: str | Path) -> list[str]:
    """One prompt per non-empty line; order defines the tie-break index."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip()]
