"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 backend error.
The backend URL can also come from the CLOZEFILL_BACKEND_URL environment
variable, which overrides --backend-url.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import BackendUnavailable, ConfigError, DatasetFormatError
from .pipeline import (
    TUNE,
    ReferenceBackendConfig,
    RemoteBackendConfig,
    RunConfig,
    run,
)

ENV_BACKEND_URL = "CLOZEFILL_BACKEND_URL"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_BACKEND = 4


def _lambda_value(raw: str):
    if raw == TUNE:
        return TUNE
    try:
        return float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or '{TUNE}', got {raw!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clozefill")
    commands = parser.add_subparsers(dest="command", required=True)

    runp = commands.add_parser("run", help="run extraction end to end")
    runp.add_argument("--templates", required=True, type=Path)
    runp.add_argument("--dataset", required=True, type=Path)
    runp.add_argument("--dev-dataset", type=Path, default=None)
    runp.add_argument("--embeddings", required=True, type=Path)
    runp.add_argument("--backend", choices=("reference", "remote"), default="reference")
    runp.add_argument("--fixture", type=Path, default=None, help="reference backend fixture JSON")
    runp.add_argument("--backend-url", default=None, help="remote sidecar base URL")
    runp.add_argument("--k", type=int, default=16)
    runp.add_argument("--rejection-lambda", type=_lambda_value, default=1.0, metavar="LAMBDA|tune")
    runp.add_argument("--expansion", choices=("never", "always", TUNE), default="never")
    runp.add_argument("--no-rejection", action="store_true", help="ablation: skip context rejection")
    runp.add_argument("--workers", type=int, default=1)
    runp.add_argument("--output-dir", required=True, type=Path)
    runp.add_argument("--dump-diagnostics", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    backend_url = os.environ.get(ENV_BACKEND_URL) or args.backend_url
    if args.backend == "remote" or (backend_url and args.backend != "reference"):
        if not backend_url:
            raise ConfigError("remote backend requires --backend-url or CLOZEFILL_BACKEND_URL")
        backend = RemoteBackendConfig(base_url=backend_url)
    else:
        if args.fixture is None:
            raise ConfigError("reference backend requires --fixture")
        backend = ReferenceBackendConfig(fixture_path=args.fixture)
    return RunConfig(
        templates_path=args.templates,
        dataset_path=args.dataset,
        dev_dataset_path=args.dev_dataset,
        embeddings_path=args.embeddings,
        backend=backend,
        k=args.k,
        rejection_lambda=args.rejection_lambda,
        expansion=args.expansion,
        rejection_enabled=not args.no_rejection,
        workers=args.workers,
        output_dir=args.output_dir,
        dump_diagnostics=args.dump_diagnostics,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = run(config_from_args(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BackendUnavailable as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        print("note: outputs in the output directory, if any, are partial", file=sys.stderr)
        return EXIT_BACKEND
    print(f"extractions: {summary.extractions_path}")
    if summary.report is not None:
        report_txt = summary.output_dir / "report.txt"
        print(report_txt.read_text(encoding="utf-8"), end="")
    print(f"forward passes: {summary.manifest['provider']['forward_passes']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
