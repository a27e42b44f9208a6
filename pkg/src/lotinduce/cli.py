"""Command-line entry point."""
from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .runner import cmd_curve, cmd_experiment, cmd_induce, inspect_store


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--profile", choices=("desk", "paper"))
    p.add_argument("--out", help="output directory")
    p.add_argument("--language", help="target language id, e.g. AnBn or AnFinite(3)")
    p.add_argument("--workers", type=int, help="worker processes for chains")
    p.add_argument("--timing", action="store_true", help="print progress and wall clock to stderr")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lotinduce", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("induce", help="learn from one generated dataset")
    _common(p)
    p.add_argument("--data-size", type=int)
    p = sub.add_parser("curve", help="learning curve over the data schedule")
    _common(p)
    p = sub.add_parser("experiment", help="run a named experiment")
    p.add_argument("name", choices=("infinite", "lai", "gomez", "english"))
    _common(p)
    p = sub.add_parser("inspect", help="print the top entries of a hypothesis store file")
    p.add_argument("store")
    p.add_argument("--top", type=int, default=10)
    return ap


def _overrides(items) -> list:
    out = []
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out.append((k, v))
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "inspect":
            sys.stdout.write(inspect_store(args.store, args.top))
            return 0
        flags = {"seed": args.seed, "profile": args.profile, "out": args.out,
                 "language": args.language, "workers": args.workers}
        if args.command == "induce":
            flags["data_size"] = args.data_size
        cfg = load_config(args.config, _overrides(args.set), **flags)
        if args.command == "induce":
            res = cmd_induce(cfg, args.timing)
            row = res["row"]
            print(f"weighted_f={row['weighted_f']:.4f} map_f={row['map_f']:.4f} "
                  f"store={res['paths']['store']}")
        elif args.command == "curve":
            print(cmd_curve(cfg, args.timing))
        else:
            print(cmd_experiment(cfg, args.name, args.timing))
    except (ConfigError, OSError, ValueError) as e:
        print(f"lotinduce: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
