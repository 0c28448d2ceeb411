"""Command-line entry point.

Usage::

    mfkl <kind> --config path.json [--seed U64] [--out DIR] [--threads K]
    mfkl report --out DIR

Kinds are the experiment kinds of :mod:`mfkl.harness`; ``report``
summarizes a finished experiment directory.  ``--seed`` overrides the
config seed and ``MFKL_THREADS`` is the fallback for ``--threads``.
Exit codes: 2 bad config, 3 numerical domain error, 4 non-convergence,
5 missing result files.
"""

import argparse
import sys

from .errors import MfklError
from .harness import EXPERIMENT_KINDS, emit_report, load_config, run_experiment


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mfkl",
        description="mean-field kinetic Langevin experiments",
    )
    parser.add_argument("kind", choices=EXPERIMENT_KINDS + ("report",))
    parser.add_argument("--config", help="path to a JSON experiment config")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int, help="worker threads for replicas")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.kind == "report":
            if not args.out:
                raise MfklError("report needs --out pointing at a results directory")
            sys.stdout.write(emit_report(args.out))
            return 0
        if not args.config:
            raise MfklError(f"kind {args.kind!r} needs --config")
        config = load_config(args.config)
        if config["kind"] != args.kind:
            from .errors import ConfigurationError

            raise ConfigurationError(
                f"config kind {config['kind']!r} does not match CLI kind {args.kind!r}"
            )
        run_experiment(config, out_dir=args.out, seed=args.seed, threads=args.threads)
        return 0
    except MfklError as err:
        sys.stderr.write(f"mfkl: {err}\n")
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
