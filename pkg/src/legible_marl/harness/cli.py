"""Command line: run, plot, verify."""
import argparse
import logging
import sys

from .._validation import ConfigurationError
from . import plotting, runner, verify
from .config import ExperimentConfig, preset_names


def build_parser():
    ap = argparse.ArgumentParser(prog="legible-marl",
                                 description="Legibility-shaped multiagent RL experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train every (beta, seed) cell of a config")
    r.add_argument("--config", required=True,
                   help=f"JSON file or preset name ({', '.join(preset_names())})")
    r.add_argument("--beta", type=float, nargs="+", help="override the beta list")
    r.add_argument("--seed", type=int, nargs="+", help="override the seed list")
    r.add_argument("--out", help="output directory")
    r.add_argument("--episodes", type=int, help="override the episode budget")

    p = sub.add_parser("plot", help="render SVG charts for a run directory")
    p.add_argument("dir")
    p.add_argument("--window", type=int, help="rolling window (default: 5%% of episodes)")

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", choices=verify.SUITES)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        try:
            cfg = ExperimentConfig.load(args.config, betas=args.beta, seeds=args.seed,
                                        out=args.out, episodes=args.episodes)
            paths = runner.run(cfg)
        except ConfigurationError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        except KeyboardInterrupt:
            print("interrupted; partial CSVs are marked incomplete", file=sys.stderr)
            return 130
        except Exception as exc:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return 1
        for p in paths:
            print(p)
        return 0
    if args.command == "plot":
        try:
            paths = plotting.plot(args.dir, window=args.window)
        except plotting.NoDataError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        for p in paths:
            print(p)
        return 0
    return verify.verify(args.suite)


if __name__ == "__main__":
    sys.exit(main())
