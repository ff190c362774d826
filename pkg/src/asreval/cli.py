"""Command line interface.

Subcommands: run, score, normalize, sweep, report, verify, join-external.
Exit code 0 only when every requested utterance succeeded; partial results
are kept on disk either way.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import figures
from .pipeline import (
    ConfigError,
    RunConfig,
    StageError,
    run_pipeline,
    verify_run,
)
from .report import (
    MetricReport,
    external_benchmark_join,
    load_external_benchmarks,
    profile_comparison_rows,
    render_summary,
    render_table,
    scatter_data,
)
from .textnorm import get_profile
from .transcribers import (
    RunAborted,
    TranscriberSpec,
    load_prompts,
    prompt_sweep,
)


def _add_common_scoring_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--profile", default="basic", choices=["basic", "whisper"])
    p.add_argument("--by", default="gender,dataset,split",
                   help="comma-separated strata keys (e.g. gender,dataset+split)")
    p.add_argument("--semantic", action=argparse.BooleanOptionalAction,
                   default=True, help="compute the semantic F1 column")
    p.add_argument("--provider", default="deterministic",
                   help="deterministic | replay:PATH | subprocess:COMMAND")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the deterministic embedding provider")
    p.add_argument("--cache-dir", type=Path, default=None,
                   help="embedding cache directory (or set ASREVAL_CACHE_DIR)")
    p.add_argument("--prompt-id", default=None,
                   help="select one prompt's hypotheses when several exist")
    p.add_argument("--model-label", default=None)


def _strata(arg: str) -> tuple[str, ...]:
    return tuple(k.strip() for k in arg.split(",") if k.strip())


def _run_common(args, transcriber_spec: Path | None,
                hypotheses: Path | None, out_dir: Path) -> int:
    config = RunConfig(
        manifest_path=args.manifest,
        out_dir=out_dir,
        transcriber_spec_path=transcriber_spec,
        hypotheses_path=hypotheses,
        profile=args.profile,
        strata=_strata(args.by),
        semantic=args.semantic,
        provider=args.provider,
        seed=args.seed,
        cache_dir=args.cache_dir,
        prompt_id=args.prompt_id,
        model_label=args.model_label,
    )
    try:
        report = run_pipeline(config)
    except RunAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 1
    overall = report.overall
    wer = overall.get("wer_pct")
    print(f"model={report.model} profile={report.profile} "
          f"wer={wer if wer is None else f'{wer:.2f}%'} "
          f"missing={overall.get('n_missing', 0)} "
          f"failed={overall.get('n_failed', 0)}")
    print(f"report written to {out_dir}")
    if overall.get("n_missing", 0) or overall.get("n_failed", 0):
        return 1
    return 0


def _cmd_run(args) -> int:
    return _run_common(args, args.transcriber, None, args.out)


def _cmd_score(args) -> int:
    if args.out.suffix == ".json":
        # Single-file form: write the full artifact set next to it.
        out_dir = args.out.parent / (args.out.stem + ".artifacts")
        rc = _run_common(args, None, args.hyps, out_dir)
        (args.out).write_bytes((out_dir / "report.json").read_bytes())
        return rc
    return _run_common(args, None, args.hyps, args.out)


def _cmd_normalize(args) -> int:
    profile = get_profile(args.profile)
    lines = (args.infile.read_text(encoding="utf-8").splitlines()
             if args.infile else sys.stdin.read().splitlines())
    out_lines = []
    warnings: dict[int, list[str]] = {}
    for lineno, line in enumerate(lines, start=1):
        normalized, warns = profile.apply(line)
        out_lines.append(normalized)
        if warns:
            warnings[lineno] = warns
    text = "\n".join(out_lines) + ("\n" if out_lines else "")
    if args.outfile:
        args.outfile.write_text(text, encoding="utf-8")
        if warnings:
            sidecar = args.outfile.with_suffix(args.outfile.suffix + ".warnings")
            sidecar.write_text(
                "".join(f"{lineno}\t{w}\n" for lineno, ws in sorted(warnings.items())
                        for w in ws), encoding="utf-8")
    else:
        sys.stdout.write(text)
        for lineno, ws in sorted(warnings.items()):
            for w in ws:
                print(f"line {lineno}: {w}", file=sys.stderr)
    return 0


def _cmd_sweep(args) -> int:
    spec = TranscriberSpec.from_json(args.transcriber)
    prompts = load_prompts(args.prompts)
    from .records import load_manifest

    manifest = load_manifest(args.manifest, rtf_required=False)
    sweep = prompt_sweep(spec, prompts, manifest, profile=args.profile)
    columns = ["index", "prompt", "wer_pct"]
    rows = [{"index": r.index, "prompt": r.prompt, "wer_pct": r.wer_pct}
            for r in sweep.results]
    print(render_table(columns, rows, "markdown"))
    print(f"selected prompt #{sweep.selected.index}: "
          f"{sweep.selected.prompt!r} at {sweep.selected.wer_pct:.2f}% WER")
    if args.out:
        args.out.write_text(
            json.dumps(sweep.to_json_dict(), ensure_ascii=False, indent=2)
            + "\n", encoding="utf-8")
    return 0


def _load_reports(paths: list[Path]) -> list[MetricReport]:
    return [MetricReport.load(p) for p in paths]


def _cmd_report(args) -> int:
    reports = _load_reports(args.runs)
    fmt = args.format
    if args.compare == "profiles":
        columns, rows = profile_comparison_rows(reports)
        document = render_table(columns, rows, fmt)
    else:
        document = render_summary(reports, fmt)
    if args.out:
        args.out.write_text(document, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(document)
    if args.figures:
        base = args.out.parent if args.out else Path(".")
        if args.compare == "profiles":
            _, rows = profile_comparison_rows(reports)
            path = figures.render_profile_comparison(
                rows, base / "normalization_impact.png")
            print(f"wrote {path}")
        else:
            points, excluded = scatter_data(reports)
            for model in excluded:
                print(f"warning: no RTF for {model}, excluded from scatter",
                      file=sys.stderr)
            if points:
                path = figures.render_wer_vs_rtf(points, base / "wer_vs_rtf.png")
                print(f"wrote {path}")
    return 0


def _cmd_verify(args) -> int:
    problems = verify_run(args.run_dir)
    if problems:
        for problem in problems:
            print(problem, file=sys.stderr)
        print(f"verify: {len(problems)} discrepancies", file=sys.stderr)
        return 1
    print("verify: all aggregates re-derived with zero discrepancies")
    return 0


def _cmd_join_external(args) -> int:
    reports = _load_reports(args.runs)
    external = load_external_benchmarks(args.external)
    comparison = external_benchmark_join(reports, external)
    columns, rows = comparison.table()
    document = render_table(columns, rows, args.format)
    if args.out:
        args.out.write_text(document, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(document)
    for benchmark, rho in sorted(comparison.spearman.items()):
        print(f"spearman(local, {benchmark}) = {rho:+.3f}")
    if args.figures:
        base = args.out.parent if args.out else Path(".")
        path = figures.render_benchmark_comparison(
            comparison, base / "benchmark_comparison.png")
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asreval",
        description="ASR evaluation harness: WER/CER/DIR, RTF and semantic F1 "
                    "with French-aware normalization.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="transcribe a manifest and score the result")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--transcriber", type=Path, required=True,
                   help="transcriber spec JSON (replay/subprocess/http)")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    _add_common_scoring_args(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("score", help="score an existing hypotheses file")
    p.add_argument("--refs", "--manifest", dest="manifest", type=Path,
                   required=True)
    p.add_argument("--hyps", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True,
                   help="output directory, or report.json path")
    _add_common_scoring_args(p)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("normalize", help="normalize text, one utterance per line")
    p.add_argument("--profile", default="basic", choices=["basic", "whisper"])
    p.add_argument("--in", dest="infile", type=Path, default=None)
    p.add_argument("--out", dest="outfile", type=Path, default=None)
    p.set_defaults(func=_cmd_normalize)

    p = sub.add_parser("sweep", help="prompt sweep on a dev manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--transcriber", type=Path, required=True)
    p.add_argument("--prompts", type=Path, required=True,
                   help="text file, one prompt per line")
    p.add_argument("--profile", default="basic", choices=["basic", "whisper"])
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("report", help="render tables (and figures) from runs")
    p.add_argument("runs", nargs="+", type=Path,
                   help="run directories or report.json files")
    p.add_argument("--format", default="markdown",
                   choices=["csv", "markdown", "json"])
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--compare", choices=["profiles"], default=None,
                   help="profiles: normalization-impact table (WER, Bert F1)")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction,
                   default=True)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("verify", help="re-derive aggregates from records")
    p.add_argument("run_dir", type=Path)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("join-external",
                       help="join local WER with published benchmark numbers")
    p.add_argument("runs", nargs="+", type=Path)
    p.add_argument("--external", type=Path, required=True,
                   help="CSV with model,benchmark,wer_pct")
    p.add_argument("--format", default="markdown",
                   choices=["csv", "markdown", "json"])
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction,
                   default=True)
    p.set_defaults(func=_cmd_join_external)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, StageError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
