"""Command line entry point.

    corrflow run <config.json> [--field.path value ...]
    corrflow verify <config.json> [--field.path value ...]
    corrflow cache ls
    corrflow cache rm [--prefix HASH]

Exit codes: 0 ok, 2 invariant violation, 3 config error.
"""
from __future__ import annotations

import argparse
import json
import sys

from .cache import CacheError, cache_dir, list_cache, remove_cache
from .experiments import ConfigError, InvariantViolation, RunConfig, parse_value, run_experiment, verify

EXIT_OK = 0
EXIT_INVARIANT = 2
EXIT_CONFIG = 3


def parse_overrides(tokens: list[str]) -> dict:
    """``--a.b 3`` or ``--a.b=3`` pairs into {"a.b": 3}."""
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or len(tok) == 2:
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, raw = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"override {tok} needs a value")
            raw = tokens[i + 1]
            i += 2
        out[key] = parse_value(raw)
    return out


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corrflow", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("config")
    ver = sub.add_parser("verify", help="run invariant checks for a config's spin chain")
    ver.add_argument("config")
    cache = sub.add_parser("cache", help="inspect or clear the spectrum cache")
    csub = cache.add_subparsers(dest="action", required=True)
    csub.add_parser("ls")
    rm = csub.add_parser("rm")
    rm.add_argument("--prefix", default=None, help="only remove entries whose hash starts with this")
    return p


def _run(cfg: RunConfig) -> int:
    meta = run_experiment(cfg)
    print(json.dumps({"status": meta["status"], "output": cfg.output, "results": meta["results"]},
                     indent=2, default=str))
    return EXIT_OK


def _verify(cfg: RunConfig) -> int:
    checks = verify(cfg)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
    return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_INVARIANT


def _cache(args) -> int:
    if args.action == "ls":
        entries = list_cache()
        print(f"cache directory: {cache_dir()}")
        for path, hdr in entries:
            if "error" in hdr:
                print(f"{path.name}  ERROR {hdr['error']}")
            else:
                print(f"{path.name}  L={hdr['length']} dim={hdr['dim']} bytes={hdr['size']}")
        return EXIT_OK
    removed = remove_cache(prefix=args.prefix)
    print(f"removed {len(removed)} file(s)")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    args, rest = _parser().parse_known_args(argv)
    try:
        if args.command == "cache":
            if rest:
                raise ConfigError(f"unexpected arguments {rest}")
            return _cache(args)
        cfg = RunConfig.load(args.config, parse_overrides(rest))
        return _run(cfg) if args.command == "run" else _verify(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except CacheError as exc:
        print(f"cache error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
