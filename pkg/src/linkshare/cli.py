"""``linkshare COMMAND [--config PATH] [--seed N] [--out DIR]``.

Exit codes: 0 ok, 2 configuration error, 3 data error. Log verbosity comes
from ``LINKSHARE_LOG_LEVEL`` (default INFO).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import ConfigError, load
from .pipeline import STAGES, DataError, run

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="linkshare", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=[*STAGES, "all"])
    p.add_argument("--config", help="YAML run configuration (all keys optional)")
    p.add_argument("--seed", type=int, help="master seed, overrides the config")
    p.add_argument("--out", default="run", help="run directory (default: ./run)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = os.environ.get("LINKSHARE_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log = logging.getLogger("linkshare")
    try:
        cfg = load(args.config, seed=args.seed)
        paths = run(args.command, cfg, args.out)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
