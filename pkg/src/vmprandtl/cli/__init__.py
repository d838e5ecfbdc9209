"""Command-line front end: ``vmprandtl <mode> --config run.toml [--out DIR] [--workers N]``.

Exit codes: 0 success, 1 configuration error, 2 standing hypotheses violated, 3 solver
failure, 4 I/O error, 5 barrier verification failed, 6 every sweep row failed.

Any config key can be overridden from the environment as ``VMP_<BLOCK>__<KEY>``
(for example ``VMP_SOLVER__EPS=2e-3``); values are parsed with TOML syntax.
"""

from __future__ import annotations

import argparse
import sys

from ..errors import ConfigError
from .config import MODES, load_config
from .runs import EXIT_CONFIG, EXIT_IO, execute


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors share the configuration exit code; 2 is reserved for hypothesis failures
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="vmprandtl", description=__doc__.splitlines()[0])
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, help="TOML run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides [output] dir)")
    parser.add_argument("--workers", type=int, default=None, help="worker processes for sweeps")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.mode)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.workers is not None and args.workers < 1:
        print("configuration error: --workers must be positive", file=sys.stderr)
        return EXIT_CONFIG
    return execute(cfg, args.out, args.workers)
