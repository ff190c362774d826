"""End-to-end run orchestration and post-hoc verification.

Stages: data prep, transcription (or replay of a hypotheses file),
normalization of both sides through one shared profile instance, word and
character alignment, optional semantic scoring, aggregation. Every stage
persists its per-utterance records in the output directory so each aggregate
can be re-derived later; ``verify_run`` does exactly that and reports any
discrepancy.

Reports carry no timestamps (those live in run_meta.json), so a rerun on
identical inputs with the replay transcriber and the deterministic embedding
provider is byte-identical.
"""

from __future__ import annotations

import datetime
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .alignment import (
    UNIT_CHAR,
    UNIT_WORD,
    AlignmentResult,
    align,
    char_tokens,
    word_tokens,
)
from .metrics import (
    AggregateMetrics,
    CountSummary,
    aggregate,
    relative_gender_delta_pct,
    weighted_mean,
)
from .records import (
    Hypothesis,
    Manifest,
    load_hypotheses,
    load_manifest,
    missing_coverage,
)
from .report import REPORT_BASENAME, MetricReport, render_report
from .semantic import (
    DeterministicProvider,
    EmbeddingCache,
    ReplayProvider,
    SemanticScore,
    SubprocessProvider,
    greedy_match_score,
    request_embeddings,
)
from .textnorm import get_profile
from .transcribers import (
    KIND_REPLAY,
    RunAborted,
    TimingRecord,
    TranscriberSpec,
    make_transcriber,
    run_transcription,
)

CACHE_ENV_VAR = "ASREVAL_CACHE_DIR"

DEFAULT_STRATA = ("gender", "dataset", "split")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    """A pipeline stage failed; names the stage and the utterance."""

    def __init__(self, stage: str, utterance_id: str | None, cause: Exception):
        self.stage = stage
        self.utterance_id = utterance_id
        where = f" at utterance {utterance_id!r}" if utterance_id else ""
        super().__init__(f"stage {stage!r} failed{where}: {cause}")


@dataclass
class RunConfig:
    manifest_path: Path
    out_dir: Path
    transcriber_spec_path: Path | None = None
    hypotheses_path: Path | None = None
    profile: str = "basic"
    strata: tuple[str, ...] = DEFAULT_STRATA
    semantic: bool = True
    provider: str = "deterministic"  # deterministic | replay:PATH | subprocess:CMD
    seed: int = 0
    cache_dir: Path | None = None
    prompt_id: str | None = None
    model_label: str | None = None

    def __post_init__(self) -> None:
        have_spec = self.transcriber_spec_path is not None
        have_hyps = self.hypotheses_path is not None
        if have_spec == have_hyps:
            raise ConfigError(
                "exactly one of a transcriber spec or a hypotheses file "
                "must be given")


def make_provider(provider: str, seed: int = 0):
    if provider == "deterministic":
        return DeterministicProvider(seed=seed)
    if provider.startswith("replay:"):
        return ReplayProvider(provider.split(":", 1)[1])
    if provider.startswith("subprocess:"):
        return SubprocessProvider(provider.split(":", 1)[1])
    raise ConfigError(
        f"unknown embedding provider {provider!r}; expected 'deterministic', "
        "'replay:PATH' or 'subprocess:COMMAND'")


def resolve_cache_dir(cache_dir: Path | None) -> Path | None:
    if cache_dir is not None:
        return Path(cache_dir)
    env = os.environ.get(CACHE_ENV_VAR)
    return Path(env) if env else None


def _stratum_value(record, key: str) -> str | None:
    """Value of a stratification key; compound keys like dataset+split join
    with '/'. Gender 'unknown' is excluded from gender strata (but remains
    part of the overall aggregate).
    """
    parts = []
    for piece in key.split("+"):
        value = getattr(record, piece, None)
        if value is None:
            raise ConfigError(f"unknown stratification key {piece!r}")
        if piece == "gender" and value == "unknown":
            return None
        parts.append(value)
    return "/".join(parts)


def _jsonl_dump(rows: list[dict], path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def _jsonl_load(path: Path) -> list[dict]:
    rows = []
    with path.open("r", encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.strip()
            if raw:
                rows.append(json.loads(raw))
    return rows


def _metrics_cell(word: CountSummary, char: CountSummary | None,
                  rtf_pct: float | None, bert_f1: float | None) -> dict:
    cell = AggregateMetrics.from_counts(word, char).to_json_dict()
    cell["rtf_pct"] = rtf_pct
    cell["bert_f1"] = bert_f1
    return cell


def _undefined_cell() -> dict:
    return {"wer_pct": None, "cer_pct": None, "dir": None,
            "total_ref_words": 0, "skip_corrected_wer_pct": None,
            "n_utterances": 0, "rtf_pct": None, "bert_f1": None}


@dataclass
class _Scored:
    """Everything derived from one covered utterance."""

    utterance_id: str
    prompt_id: str | None
    ref_norm: str
    hyp_norm: str
    word: AlignmentResult
    char: AlignmentResult
    strata: dict[str, str | None] = field(default_factory=dict)
    wall_time_s: float | None = None
    duration_s: float = 0.0
    f1_scaled: float | None = None
    degenerate: bool = False
    ref_token_count: int = 0


def run_pipeline(config: RunConfig) -> MetricReport:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    profile = get_profile(config.profile)

    spec: TranscriberSpec | None = None
    rtf_required = False
    if config.transcriber_spec_path is not None:
        spec = TranscriberSpec.from_json(config.transcriber_spec_path)
        rtf_required = spec.kind != KIND_REPLAY

    try:
        manifest = load_manifest(config.manifest_path, rtf_required=rtf_required)
    except Exception as exc:
        raise StageError("data-prep", None, exc) from exc

    hyps, timings, aborted = _obtain_hypotheses(config, spec, manifest, out_dir)
    model = config.model_label or (spec.id if spec else "replay")

    if config.prompt_id is not None:
        hyps = [h for h in hyps if h.prompt_id == config.prompt_id]
    else:
        prompt_ids = {h.prompt_id for h in hyps}
        if len(prompt_ids) > 1:
            raise ConfigError(
                "hypotheses carry multiple prompt ids "
                f"({sorted(p or '<none>' for p in prompt_ids)}); "
                "select one with prompt_id")

    ok_hyps = [h for h in hyps if not h.failed and h.utterance_id in manifest]
    missing = missing_coverage(manifest, hyps)
    n_failed = sum(1 for h in hyps if h.failed)

    # Score-only runs take timing from the hypotheses themselves.
    if not timings:
        timings = [TimingRecord(utterance_id=h.utterance_id,
                                wall_time_s=h.wall_time_s)
                   for h in ok_hyps if h.wall_time_s is not None]
    timing_by_id = {t.utterance_id: t for t in timings}

    warnings: dict[str, dict] = {}
    scored: list[_Scored] = []
    for hyp in ok_hyps:
        record = manifest[hyp.utterance_id]
        try:
            ref_norm, ref_warn = profile.apply(record.reference)
            hyp_norm, hyp_warn = profile.apply(hyp.text)
        except Exception as exc:
            raise StageError("normalization", hyp.utterance_id, exc) from exc
        if ref_warn or hyp_warn:
            warnings[hyp.utterance_id] = {
                **({"ref": ref_warn} if ref_warn else {}),
                **({"hyp": hyp_warn} if hyp_warn else {}),
            }
        try:
            word = align(word_tokens(ref_norm), word_tokens(hyp_norm),
                         unit=UNIT_WORD)
            char = align(char_tokens(ref_norm), char_tokens(hyp_norm),
                         unit=UNIT_CHAR)
        except Exception as exc:
            raise StageError("alignment", hyp.utterance_id, exc) from exc
        timing = timing_by_id.get(hyp.utterance_id)
        scored.append(_Scored(
            utterance_id=hyp.utterance_id,
            prompt_id=hyp.prompt_id,
            ref_norm=ref_norm,
            hyp_norm=hyp_norm,
            word=word,
            char=char,
            strata={key: _stratum_value(record, key) for key in config.strata},
            wall_time_s=timing.wall_time_s if timing else None,
            duration_s=record.duration_s,
            ref_token_count=len(word_tokens(ref_norm)),
        ))

    meta: dict = {
        "profile": profile.name,
        "profile_fingerprint_ref": profile.fingerprint(),
        "profile_fingerprint_hyp": profile.fingerprint(),
        "seed": config.seed,
        "aggregation": "micro-by-reference-words",
        "rtf_note": "wall time may include provider queue wait for remote services",
        "provider_id": None,
    }
    if config.semantic:
        meta["provider_id"] = _score_semantic(config, scored)

    _persist_records(scored, out_dir)

    report = _build_report(model, profile.name, config.strata, manifest,
                           scored, missing, n_failed, meta, warnings)
    report.dump(out_dir / f"{REPORT_BASENAME}.json")
    (out_dir / f"{REPORT_BASENAME}.csv").write_text(
        render_report(report, "csv"), encoding="utf-8")
    (out_dir / f"{REPORT_BASENAME}.md").write_text(
        render_report(report, "markdown"), encoding="utf-8")

    run_meta = {
        "config": {
            "manifest": str(config.manifest_path),
            "transcriber_spec": (str(config.transcriber_spec_path)
                                 if config.transcriber_spec_path else None),
            "hypotheses": (str(config.hypotheses_path)
                           if config.hypotheses_path else None),
            "profile": profile.name,
            "strata": list(config.strata),
            "semantic": config.semantic,
            "provider": config.provider,
            "seed": config.seed,
        },
        "timestamps": {
            "finished_utc": datetime.datetime.now(
                datetime.timezone.utc).isoformat(),
        },
        "aborted_at": aborted,
        "missing_ids": missing,
        "n_failed": n_failed,
        "warnings": warnings,
        **meta,
    }
    (out_dir / "run_meta.json").write_text(
        json.dumps(run_meta, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    if aborted:
        raise RunAborted(aborted)
    return report


def _obtain_hypotheses(config: RunConfig, spec: TranscriberSpec | None,
                       manifest: Manifest, out_dir: Path,
                       ) -> tuple[list[Hypothesis], list[TimingRecord], str | None]:
    """Run the transcriber or load the hypotheses file; persist both streams.

    On an aborted run the partial streams are still written (and returned)
    so the evidence survives.
    """
    aborted: str | None = None
    hyps: list[Hypothesis] = []
    timings: list[TimingRecord] = []
    if spec is None:
        try:
            hyps = load_hypotheses(config.hypotheses_path, manifest)
        except Exception as exc:
            raise StageError("hypothesis-load", None, exc) from exc
    else:
        transcriber = make_transcriber(spec)

        def collect(hyp: Hypothesis, timing: TimingRecord | None) -> None:
            hyps.append(hyp)
            if timing is not None:
                timings.append(timing)

        try:
            run_transcription(transcriber, manifest, on_result=collect)
        except RunAborted as exc:
            aborted = exc.utterance_id
        finally:
            transcriber.close()
    _jsonl_dump([h.to_json_dict() for h in hyps], out_dir / "hyps.jsonl")
    timing_rows = []
    for t in timings:
        row = t.to_json_dict()
        if t.utterance_id in manifest:
            row["duration_s"] = manifest[t.utterance_id].duration_s
        timing_rows.append(row)
    _jsonl_dump(timing_rows, out_dir / "timings.jsonl")
    return hyps, timings, aborted


def _score_semantic(config: RunConfig, scored: list[_Scored]) -> str:
    """Attach per-utterance semantic scores; returns the provider id."""
    provider = make_provider(config.provider, seed=config.seed)
    cache_dir = resolve_cache_dir(config.cache_dir)
    cache = EmbeddingCache(cache_dir) if cache_dir else None
    try:
        ref_items = [(f"{s.utterance_id}#ref", word_tokens(s.ref_norm))
                     for s in scored]
        hyp_items = [(f"{s.utterance_id}#hyp", word_tokens(s.hyp_norm))
                     for s in scored]
        try:
            ref_mats = request_embeddings(ref_items, provider, cache)
            hyp_mats = request_embeddings(hyp_items, provider, cache)
        except Exception as exc:
            raise StageError("semantic-scoring", None, exc) from exc
        for s, ref_mat, hyp_mat in zip(scored, ref_mats, hyp_mats):
            if len(ref_mat) and len(hyp_mat):
                score = greedy_match_score(ref_mat, hyp_mat)
            else:
                score = SemanticScore(0.0, 0.0, 0.0, degenerate=True)
            s.f1_scaled = score.f1_scaled
            s.degenerate = score.degenerate
        return provider.provider_id
    finally:
        provider.close()


def _persist_records(scored: list[_Scored], out_dir: Path) -> None:
    alignment_rows = []
    semantic_rows = []
    for s in scored:
        alignment_rows.append({
            "utterance_id": s.utterance_id,
            "prompt_id": s.prompt_id,
            "word": s.word.to_json_dict(),
            "char": s.char.to_json_dict(),
            "strata": s.strata,
            "ref_norm": s.ref_norm,
            "hyp_norm": s.hyp_norm,
            "duration_s": s.duration_s,
            "wall_time_s": s.wall_time_s,
        })
        if s.f1_scaled is not None or s.degenerate:
            semantic_rows.append({
                "utterance_id": s.utterance_id,
                "f1_scaled": s.f1_scaled,
                "degenerate": s.degenerate,
                "ref_tokens": s.ref_token_count,
            })
    _jsonl_dump(alignment_rows, out_dir / "alignments.jsonl")
    _jsonl_dump(semantic_rows, out_dir / "semantic.jsonl")


def _rtf_pct(wall_times: list[float], durations: list[float]) -> float | None:
    if not wall_times:
        return None
    total_audio = sum(durations)
    if total_audio <= 0:
        return None
    return 100.0 * sum(wall_times) / total_audio


def _rtf_of(scored: list[_Scored]) -> float | None:
    timed = [s for s in scored if s.wall_time_s is not None]
    return _rtf_pct([s.wall_time_s for s in timed],
                    [s.duration_s for s in timed])


def _bert_of(scored: list[_Scored]) -> float | None:
    usable = [s for s in scored if s.f1_scaled is not None and not s.degenerate]
    if not usable:
        return None
    return weighted_mean([s.f1_scaled for s in usable],
                         [s.ref_token_count for s in usable])


def _build_report(model: str, profile_name: str, strata_keys: tuple[str, ...],
                  manifest: Manifest, scored: list[_Scored],
                  missing: list[str], n_failed: int, meta: dict,
                  warnings: dict) -> MetricReport:
    overall_word = aggregate([s.word for s in scored])
    overall_char = aggregate([s.char for s in scored])
    overall = _metrics_cell(overall_word, overall_char,
                            _rtf_of(scored), _bert_of(scored))
    overall["n_missing"] = len(missing)
    overall["n_failed"] = n_failed
    overall["n_timed"] = sum(1 for s in scored if s.wall_time_s is not None)
    overall["total_ref_chars"] = overall_char.n_ref

    strata: dict[str, dict[str, dict]] = {}
    for key in strata_keys:
        # Strata come from the manifest so an uncovered stratum still shows
        # up, as undefined, instead of silently disappearing.
        values: list[str] = []
        for record in manifest:
            value = _stratum_value(record, key)
            if value is not None and value not in values:
                values.append(value)
        cells: dict[str, dict] = {}
        for value in sorted(values):
            members = [s for s in scored if s.strata.get(key) == value]
            if not members:
                cells[value] = _undefined_cell()
                continue
            cells[value] = _metrics_cell(
                aggregate([s.word for s in members]),
                aggregate([s.char for s in members]),
                _rtf_of(members), _bert_of(members))
        strata[key] = cells

    gender_metrics = {
        value: AggregateMetrics(
            wer_pct=cell["wer_pct"], cer_pct=cell["cer_pct"],
            dir=cell["dir"], total_ref_words=cell["total_ref_words"],
            skip_corrected_wer_pct=cell["skip_corrected_wer_pct"],
            n_utterances=cell["n_utterances"])
        for value, cell in strata.get("gender", {}).items()
    }
    report_meta = dict(meta)
    report_meta["warnings"] = warnings
    report_meta["gender_wer_relative_delta_pct"] = (
        relative_gender_delta_pct(gender_metrics) if gender_metrics else None)

    utterance_rows = [
        {"utterance_id": s.utterance_id,
         "word": s.word.to_json_dict(),
         "char": s.char.to_json_dict(),
         "f1_scaled": s.f1_scaled,
         "degenerate": s.degenerate}
        for s in scored
    ]
    return MetricReport(model=model, profile=profile_name, overall=overall,
                        strata=strata, meta=report_meta,
                        utterances=utterance_rows)


def verify_run(run_dir: str | Path) -> list[str]:
    """Re-derive every aggregate from the persisted per-utterance records.

    Returns a list of discrepancy descriptions; empty means the report is
    fully reproducible from its own audit trail.
    """
    run_dir = Path(run_dir)
    report = MetricReport.load(run_dir)
    alignment_rows = _jsonl_load(run_dir / "alignments.jsonl")
    semantic_path = run_dir / "semantic.jsonl"
    semantic_rows = _jsonl_load(semantic_path) if semantic_path.exists() else []

    problems: list[str] = []

    def check(name: str, reported, recomputed) -> None:
        if reported is None and recomputed is None:
            return
        if reported is None or recomputed is None or reported != recomputed:
            problems.append(f"{name}: report has {reported!r}, "
                            f"records give {recomputed!r}")

    def summarize(rows: list[dict]) -> dict:
        word = aggregate([AlignmentResult.from_json_dict(UNIT_WORD, r["word"])
                          for r in rows])
        char = aggregate([AlignmentResult.from_json_dict(UNIT_CHAR, r["char"])
                          for r in rows])
        timed = [r for r in rows if r.get("wall_time_s") is not None]
        rtf = _rtf_pct([r["wall_time_s"] for r in timed],
                       [r["duration_s"] for r in timed])
        ids = {r["utterance_id"] for r in rows}
        usable = [r for r in semantic_rows
                  if r["utterance_id"] in ids and not r["degenerate"]
                  and r.get("f1_scaled") is not None]
        bert = weighted_mean([r["f1_scaled"] for r in usable],
                             [r["ref_tokens"] for r in usable]) \
            if usable else None
        return _metrics_cell(word, char, rtf, bert)

    recomputed_overall = summarize(alignment_rows)
    for column in ("wer_pct", "cer_pct", "dir", "skip_corrected_wer_pct",
                   "rtf_pct", "bert_f1", "total_ref_words"):
        check(f"overall.{column}", report.overall.get(column),
              recomputed_overall.get(column))

    for key, cells in report.strata.items():
        for value, cell in cells.items():
            members = [r for r in alignment_rows
                       if r.get("strata", {}).get(key) == value]
            if not members:
                if cell.get("n_utterances", 0) != 0:
                    problems.append(
                        f"strata.{key}.{value}: report has data, records none")
                continue
            recomputed = summarize(members)
            for column in ("wer_pct", "cer_pct", "dir",
                           "skip_corrected_wer_pct", "rtf_pct", "bert_f1"):
                check(f"strata.{key}.{value}.{column}", cell.get(column),
                      recomputed.get(column))
    return problems
