# pipelines cli- entrypoint

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from pipelines import file1_schedule, file2_optimize, file3_sample, file4_eval, file5_compare

COMMANDS = [file1_schedule, file2_optimize, file3_sample, file4_eval, file5_compare]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ays",
        description="Sampling-schedule optimization on analytic Gaussian / GMM models",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for module in COMMANDS:
        module.add_parser(sub)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Exit codes:
    - 0 success
    - 2 usage or validation error (argparse, ValueError, pydantic)
    - 1 any other runtime failure
    """
    load_dotenv()
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv

    try:
        return int(args.handler(args))
    except (ValueError, ValidationError) as exc:
        print(f"❌ {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"❌ {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
