"""Command line entry point: ``geogame run`` and ``geogame validate``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .model import ParameterError
from .reporting import (
    EXIT_INVARIANT,
    EXIT_IO,
    EXIT_OK,
    EXIT_PARSE,
    ConfigError,
    load_config,
    run_scenario,
)


def _load(path: str):
    """Config or an exit code; bad structure is a parse error, bad values an invariant one."""
    try:
        return load_config(path), EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return None, EXIT_PARSE
    except ParameterError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return None, EXIT_INVARIANT
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return None, EXIT_IO


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="geogame", description=__doc__)
    ap.add_argument("--version", action="version", version=f"geogame {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario and write its reports")
    run.add_argument("config", help="TOML scenario file")
    run.add_argument("--check", action="store_true", help="exit 3 if any scenario tolerance is breached")
    run.add_argument("--out", metavar="DIR", help="output directory (overrides [output] dir)")
    val = sub.add_parser("validate", help="parse and validate a scenario file")
    val.add_argument("config")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    cfg, code = _load(args.config)
    if cfg is None:
        return code
    if args.command == "validate":
        print(f"ok: {cfg.scenario}, N={cfg.params.n}, config_sha256={cfg.config_hash}")
        return EXIT_OK
    out = Path(args.out) if args.out else None
    code, written = run_scenario(cfg, out_dir=out, check=args.check)
    for path in written:
        print(path)
    return code


if __name__ == "__main__":
    sys.exit(main())
