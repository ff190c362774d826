import json

import pytest

from asreval.pipeline import (
    ConfigError,
    RunConfig,
    run_pipeline,
    verify_run,
)
from asreval.report import MetricReport


def _score_config(data_dir, tmp_path, hyps="hyps_perfect.jsonl", **over):
    kwargs = dict(
        manifest_path=data_dir / "manifest.jsonl",
        out_dir=tmp_path / "run",
        hypotheses_path=data_dir / hyps,
        profile="basic",
        semantic=True,
        provider="deterministic",
        seed=0,
    )
    kwargs.update(over)
    return RunConfig(**kwargs)


def test_config_requires_exactly_one_source(data_dir, tmp_path):
    with pytest.raises(ConfigError):
        RunConfig(manifest_path=data_dir / "manifest.jsonl",
                  out_dir=tmp_path,
                  transcriber_spec_path=data_dir / "transcriber_replay.json",
                  hypotheses_path=data_dir / "hyps_perfect.jsonl")
    with pytest.raises(ConfigError):
        RunConfig(manifest_path=data_dir / "manifest.jsonl", out_dir=tmp_path)


def test_perfect_hypotheses_score_zero_wer(data_dir, tmp_path):
    report = run_pipeline(_score_config(data_dir, tmp_path))
    assert report.overall["wer_pct"] == 0.0
    assert report.overall["cer_pct"] == 0.0
    assert report.overall["bert_f1"] == pytest.approx(100.0)
    assert report.overall["total_ref_words"] == 119
    assert report.overall["rtf_pct"] == 25.0
    assert report.overall["n_missing"] == 0


def test_one_substitution_is_one_over_total_words(data_dir, tmp_path):
    report = run_pipeline(_score_config(data_dir, tmp_path,
                                        hyps="hyps_oneerror.jsonl"))
    assert report.overall["wer_pct"] == 100.0 * 1 / 119


def test_artifacts_written(data_dir, tmp_path):
    run_pipeline(_score_config(data_dir, tmp_path))
    run_dir = tmp_path / "run"
    for name in ("hyps.jsonl", "timings.jsonl", "alignments.jsonl",
                 "semantic.jsonl", "report.json", "report.csv", "report.md",
                 "run_meta.json"):
        assert (run_dir / name).exists(), name
    meta = json.loads((run_dir / "run_meta.json").read_text())
    assert meta["profile"] == "basic"
    assert meta["profile_fingerprint_ref"] == meta["profile_fingerprint_hyp"]
    assert "finished_utc" in meta["timestamps"]


def test_strata_include_gender_dataset_split(data_dir, tmp_path):
    report = run_pipeline(_score_config(data_dir, tmp_path))
    assert set(report.strata) == {"gender", "dataset", "split"}
    assert set(report.strata["gender"]) == {"male", "female"}  # unknown excluded
    assert set(report.strata["dataset"]) == {"Bast", "Charb"}
    assert set(report.strata["split"]) == {"dev", "test"}
    # overall includes the two unknown-gender utterances
    n_by_gender = sum(c["n_utterances"] for c in report.strata["gender"].values())
    assert report.overall["n_utterances"] == n_by_gender + 2


def test_compound_stratum_key(data_dir, tmp_path):
    report = run_pipeline(_score_config(data_dir, tmp_path,
                                        strata=("dataset+split",)))
    assert set(report.strata["dataset+split"]) == {
        "Bast/dev", "Bast/test", "Charb/dev", "Charb/test"}


def test_missing_coverage_marks_stratum_undefined(data_dir, tmp_path):
    # keep only Bast hypotheses: every Charb stratum must go undefined
    hyps = [json.loads(line) for line in
            (data_dir / "hyps_perfect.jsonl").read_text().splitlines()]
    partial = tmp_path / "partial.jsonl"
    partial.write_text("\n".join(
        json.dumps(h) for h in hyps if h["utterance_id"] <= "u10") + "\n")
    report = run_pipeline(_score_config(data_dir, tmp_path,
                                        hypotheses_path=partial))
    assert report.overall["n_missing"] == 10
    charb = report.strata["dataset"]["Charb"]
    assert charb["wer_pct"] is None
    assert charb["n_utterances"] == 0
    assert report.strata["dataset"]["Bast"]["wer_pct"] == 0.0


def test_gender_relative_delta_present(data_dir, tmp_path):
    report = run_pipeline(_score_config(data_dir, tmp_path,
                                        hyps="hyps_divergent.jsonl"))
    assert "gender_wer_relative_delta_pct" in report.meta


def test_replay_transcriber_end_to_end(data_dir, tmp_path):
    config = RunConfig(
        manifest_path=data_dir / "manifest.jsonl",
        out_dir=tmp_path / "run",
        transcriber_spec_path=data_dir / "transcriber_replay.json",
        profile="basic",
    )
    report = run_pipeline(config)
    assert report.model == "fixture-replay"
    assert report.overall["wer_pct"] == 0.0
    assert report.overall["rtf_pct"] == 25.0  # replayed wall times


def test_determinism_two_runs_byte_identical(data_dir, tmp_path):
    config_a = _score_config(data_dir, tmp_path, out_dir=tmp_path / "a")
    config_b = _score_config(data_dir, tmp_path, out_dir=tmp_path / "b")
    run_pipeline(config_a)
    run_pipeline(config_b)
    for name in ("report.json", "report.csv", "report.md", "alignments.jsonl",
                 "semantic.jsonl", "hyps.jsonl", "timings.jsonl"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b, name


def test_verify_clean_run(data_dir, tmp_path):
    run_pipeline(_score_config(data_dir, tmp_path,
                               hyps="hyps_divergent.jsonl"))
    assert verify_run(tmp_path / "run") == []


def test_verify_detects_tampering(data_dir, tmp_path):
    run_pipeline(_score_config(data_dir, tmp_path))
    report_path = tmp_path / "run" / "report.json"
    doc = json.loads(report_path.read_text())
    doc["overall"]["wer_pct"] = 3.14
    report_path.write_text(json.dumps(doc))
    problems = verify_run(tmp_path / "run")
    assert any("wer_pct" in p for p in problems)


def test_profile_divergence_direction(data_dir, tmp_path):
    basic = run_pipeline(_score_config(
        data_dir, tmp_path, hyps="hyps_divergent.jsonl",
        out_dir=tmp_path / "basic", profile="basic"))
    whisper = run_pipeline(_score_config(
        data_dir, tmp_path, hyps="hyps_divergent.jsonl",
        out_dir=tmp_path / "whisper", profile="whisper"))
    assert basic.overall["wer_pct"] < whisper.overall["wer_pct"]
    # two errors survive basic normalization: one deletion, one substitution
    assert basic.overall["wer_pct"] == pytest.approx(100 * 2 / 119)


def test_multiple_prompt_ids_require_selection(data_dir, tmp_path):
    hyps = tmp_path / "multi.jsonl"
    rows = [
        {"utterance_id": "u01", "text": "a", "prompt_id": "p1"},
        {"utterance_id": "u01", "text": "b", "prompt_id": "p2"},
    ]
    hyps.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    with pytest.raises(ConfigError, match="prompt"):
        run_pipeline(_score_config(data_dir, tmp_path, hypotheses_path=hyps))
    report = run_pipeline(_score_config(data_dir, tmp_path,
                                        hypotheses_path=hyps, prompt_id="p1",
                                        semantic=False))
    assert report.overall["n_utterances"] == 1


def test_empty_hypothesis_counts_as_deletions(data_dir, tmp_path):
    hyps = tmp_path / "empty_text.jsonl"
    rows = [{"utterance_id": "u01", "text": ""}]
    hyps.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    report = run_pipeline(_score_config(data_dir, tmp_path,
                                        hypotheses_path=hyps))
    # u01 reference has 4 basic tokens, all deleted; 19 utterances missing
    u01 = report.utterances[0]
    assert u01["word"]["del"] == 4
    assert u01["degenerate"] is True
    assert report.overall["n_missing"] == 19
    assert report.overall["bert_f1"] is None  # all scored pairs degenerate


def test_cache_reused_across_runs(data_dir, tmp_path):
    cache_dir = tmp_path / "cache"
    run_pipeline(_score_config(data_dir, tmp_path, out_dir=tmp_path / "r1",
                               cache_dir=cache_dir))
    files_after_first = set(cache_dir.rglob("*.emb"))
    assert files_after_first
    report = run_pipeline(_score_config(data_dir, tmp_path,
                                        out_dir=tmp_path / "r2",
                                        cache_dir=cache_dir))
    assert set(cache_dir.rglob("*.emb")) == files_after_first
    assert report.overall["bert_f1"] == pytest.approx(100.0)
