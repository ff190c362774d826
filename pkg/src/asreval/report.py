"""Report shapes and rendering: delimited tables plus plot-ready records.

Summary tables order models by ascending WER. Metrics that are undefined
because a stratum has no scored data render as "nan"; a DIR that is
undefined only because there were no insertions renders as an em dash. JSON
output mirrors the delimited tables with one key per column and nulls for
undefined cells.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from scipy import stats

REPORT_BASENAME = "report"

_RATE_COLUMNS = ("wer_pct", "cer_pct", "rtf_pct", "bert_f1", "dir",
                 "skip_corrected_wer_pct")


@dataclass
class MetricReport:
    """Aggregated metrics for one run, with per-utterance audit records."""

    model: str
    profile: str
    overall: dict
    strata: dict[str, dict[str, dict]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    utterances: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "profile": self.profile,
            "overall": self.overall,
            "strata": self.strata,
            "meta": self.meta,
            "utterances": self.utterances,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(model=d["model"], profile=d["profile"],
                   overall=d["overall"], strata=d.get("strata", {}),
                   meta=d.get("meta", {}), utterances=d.get("utterances", []))

    @classmethod
    def load(cls, path: str | Path) -> "MetricReport":
        """Load from a report.json file or a run directory containing one."""
        path = Path(path)
        if path.is_dir():
            path = path / f"{REPORT_BASENAME}.json"
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), ensure_ascii=False, indent=2,
                       sort_keys=True) + "\n", encoding="utf-8")


def _fmt(value, column: str) -> str:
    if value is None:
        # No insertions makes DIR undefined even when data exists; missing
        # data renders as nan everywhere.
        return "—" if column == "dir" else "nan"
    if isinstance(value, float):
        return f"{value:.2f}"
    return str(value)


def _wer_sort_key(row: dict):
    wer = row.get("wer_pct")
    return (wer is None, wer if wer is not None else 0.0, row.get("model", ""))


def summary_rows(reports: Sequence[MetricReport]) -> tuple[list[str], list[dict]]:
    """One row per model, ascending WER; gender columns when available."""
    has_gender = any("gender" in r.strata for r in reports)
    columns = ["model", "wer_pct", "cer_pct", "rtf_pct", "bert_f1", "dir",
               "skip_corrected_wer_pct", "total_ref_words"]
    if has_gender:
        columns += ["wer_male_pct", "wer_female_pct",
                    "cer_male_pct", "cer_female_pct"]
    rows = []
    for report in reports:
        row = {"model": report.model}
        for col in ("wer_pct", "cer_pct", "rtf_pct", "bert_f1", "dir",
                    "skip_corrected_wer_pct", "total_ref_words"):
            row[col] = report.overall.get(col)
        if has_gender:
            gender = report.strata.get("gender", {})
            row["wer_male_pct"] = gender.get("male", {}).get("wer_pct")
            row["wer_female_pct"] = gender.get("female", {}).get("wer_pct")
            row["cer_male_pct"] = gender.get("male", {}).get("cer_pct")
            row["cer_female_pct"] = gender.get("female", {}).get("cer_pct")
        rows.append(row)
    rows.sort(key=_wer_sort_key)
    return columns, rows


def strata_rows(report: MetricReport) -> tuple[list[str], list[dict]]:
    """Per-stratum detail rows for a single run (dev/test/gender breakdowns)."""
    columns = ["stratum", "value", "wer_pct", "cer_pct", "rtf_pct", "bert_f1",
               "dir", "skip_corrected_wer_pct", "total_ref_words",
               "n_utterances"]
    rows = []
    overall = dict(report.overall)
    rows.append({"stratum": "overall", "value": "all",
                 **{c: overall.get(c) for c in columns[2:]}})
    for key in report.strata:
        for value, cell in report.strata[key].items():
            rows.append({"stratum": key, "value": value,
                         **{c: cell.get(c) for c in columns[2:]}})
    return columns, rows


def profile_comparison_rows(reports: Sequence[MetricReport],
                            ) -> tuple[list[str], list[dict]]:
    """Normalization-impact table: one row per profile, WER and Bert F1."""
    columns = ["profile", "wer_pct", "bert_f1"]
    rows = [{"profile": r.profile, "wer_pct": r.overall.get("wer_pct"),
             "bert_f1": r.overall.get("bert_f1")} for r in reports]
    return columns, rows


def render_table(columns: Sequence[str], rows: Sequence[dict],
                 fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c), c) for c in columns])
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(columns) + " |",
                 "| " + " | ".join("---" for _ in columns) + " |"]
        for row in rows:
            lines.append("| " + " | ".join(_fmt(row.get(c), c)
                                           for c in columns) + " |")
        return "\n".join(lines) + "\n"
    if fmt == "json":
        return json.dumps({"columns": list(columns),
                           "rows": [{c: row.get(c) for c in columns}
                                    for row in rows]},
                          ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown format {fmt!r}; expected csv, markdown or json")


def render_report(report: MetricReport, fmt: str) -> str:
    """Single-run document: overall plus per-stratum rows."""
    columns, rows = strata_rows(report)
    return render_table(columns, rows, fmt)


def render_summary(reports: Sequence[MetricReport], fmt: str) -> str:
    columns, rows = summary_rows(reports)
    return render_table(columns, rows, fmt)


def scatter_data(reports: Sequence[MetricReport],
                 ) -> tuple[list[tuple[str, float, float]], list[str]]:
    """(model, rtf_pct, wer_pct) points for speed/accuracy plots.

    Models without RTF are excluded and returned separately so callers can
    warn about them.
    """
    points: list[tuple[str, float, float]] = []
    excluded: list[str] = []
    for report in reports:
        rtf_pct = report.overall.get("rtf_pct")
        wer_pct = report.overall.get("wer_pct")
        if rtf_pct is None or wer_pct is None:
            excluded.append(report.model)
            continue
        points.append((report.model, rtf_pct, wer_pct))
    return points, excluded


@dataclass
class BenchmarkComparison:
    """Local results joined against externally published benchmark numbers."""

    benchmarks: list[str]
    rows: list[dict]  # model, local_wer_pct, one column per benchmark
    spearman: dict[str, float]  # benchmark -> rank correlation with local WER

    def table(self) -> tuple[list[str], list[dict]]:
        columns = ["model", "local_wer_pct"] + [f"{b}_wer_pct"
                                                for b in self.benchmarks]
        return columns, self.rows


def load_external_benchmarks(path: str | Path) -> list[tuple[str, str, float]]:
    """CSV with model,benchmark,wer_pct columns (numbers supplied, not fetched)."""
    out = []
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out.append((row["model"], row["benchmark"], float(row["wer_pct"])))
    return out


def external_benchmark_join(
    reports: Sequence[MetricReport],
    external: Sequence[tuple[str, str, float]],
) -> BenchmarkComparison:
    """Join per-model local WER with external numbers and rank-correlate."""
    local = {r.model: r.overall.get("wer_pct") for r in reports
             if r.overall.get("wer_pct") is not None}
    by_benchmark: dict[str, dict[str, float]] = {}
    for model, benchmark, wer_pct in external:
        by_benchmark.setdefault(benchmark, {})[model] = wer_pct
    benchmarks = sorted(by_benchmark)
    joined_models = [m for m in local
                     if any(m in by_benchmark[b] for b in benchmarks)]
    if not joined_models:
        raise ValueError("no overlap between local reports and external table")
    joined_models.sort(key=lambda m: local[m])
    rows = []
    for model in joined_models:
        row = {"model": model, "local_wer_pct": local[model]}
        for benchmark in benchmarks:
            row[f"{benchmark}_wer_pct"] = by_benchmark[benchmark].get(model)
        rows.append(row)
    spearman: dict[str, float] = {}
    for benchmark in benchmarks:
        shared = [m for m in joined_models if m in by_benchmark[benchmark]]
        if len(shared) < 2:
            continue
        local_vals = [local[m] for m in shared]
        ext_vals = [by_benchmark[benchmark][m] for m in shared]
        rho = stats.spearmanr(local_vals, ext_vals).statistic
        spearman[benchmark] = float(rho)
    return BenchmarkComparison(benchmarks=benchmarks, rows=rows,
                               spearman=spearman)
