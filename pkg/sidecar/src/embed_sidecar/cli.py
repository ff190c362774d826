"""Command line entry: serve on stdio, or run the self-test."""

from __future__ import annotations

import argparse
import sys

from .service import EncoderService, ProviderConfig, StartupError, selftest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-sidecar",
        description="Serve per-word contextual embeddings over stdin/stdout.")
    parser.add_argument("--checkpoint", required=True,
                        help="encoder checkpoint path or hub id (recorded "
                             "verbatim in run metadata; no silent default)")
    parser.add_argument("--layer", type=int, default=-1,
                        help="hidden-state index, -1 = last hidden layer")
    parser.add_argument("--max-tokens", type=int, default=10_000,
                        help="largest accepted request, in tokens")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--selftest", action="store_true",
                        help="run conformance checks and exit")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = ProviderConfig(checkpoint=args.checkpoint, layer=args.layer,
                            max_tokens_per_request=args.max_tokens,
                            device=args.device)
    if args.selftest:
        try:
            failures = selftest(config)
        except StartupError as exc:
            print(f"selftest: startup failed: {exc}", file=sys.stderr)
            return 2
        for failure in failures:
            print(f"selftest: {failure}", file=sys.stderr)
        if failures:
            return 1
        print(f"selftest: ok (checkpoint={config.checkpoint}, "
              f"layer={config.layer})")
        return 0
    try:
        service = EncoderService(config)
    except StartupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    service.serve()
    return 0


if __name__ == "__main__":
    sys.exit(main())
