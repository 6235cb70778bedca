"""``snlab <acausality|linearity|omega-g|oracle-check> --config PATH [--out DIR]``.

Exit codes: 0 PASS, 1 FAIL verdict, 2 configuration error, 3 numerical
invariant abort.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigError, InvariantViolation
from .config import load_config
from .runs import COMMANDS

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("snlab")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snlab",
        description="Schrödinger-Newton numerical laboratory: acausality, linearity and "
                    "mean-field experiments.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").strip().splitlines()[0])
        p.add_argument("--config", required=True, metavar="PATH", help="TOML experiment config")
        p.add_argument("--out", metavar="DIR", default=None,
                       help="output directory (overrides [output] directory)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        result = COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"snlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"snlab: numerical invariant violated ({type(exc).__name__}): {exc}",
              file=sys.stderr)
        return EXIT_NUMERICAL
    for check in result.checks:
        line = f"[{'PASS' if check.passed else 'FAIL'}] {check.name}: {check.detail}"
        if check.passed:
            log.info(line)
        else:
            print(line, file=sys.stderr)
    verdict = "PASS" if result.passed else "FAIL"
    print(f"{args.command}: {verdict} ({result.out_dir})")
    return EXIT_PASS if result.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
