"""Command-line entry point: ``pairtrap <experiment> --config FILE --output DIR``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiments
from .errors import ConfigError, DomainError, NumericalError, PairtrapError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("pairtrap")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _jobs(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("--jobs must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairtrap", description="Particle-pair creation in a trapped-ion oscillator: simulations and analysis.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in experiments.EXPERIMENTS:
        sp = sub.add_parser(name.replace("_", "-"), help=f"run the {name.replace('_', ' ')} experiment")
        sp.add_argument("--config", help="JSON experiment config (defaults are used when omitted)")
        sp.add_argument("--output", help="output directory (overrides the config's output_dir)")
        sp.add_argument("--jobs", type=_jobs, default=1, help="worker processes for sweeps")
        sp.add_argument("--seed", type=_u64, default=None, help="random seed (overrides the config)")
    return parser


def _load(args, experiment: str) -> experiments.ExperimentConfig:
    if args.config:
        cfg = experiments.load_config(args.config)
        if cfg.experiment != experiment:
            raise ConfigError(f"config is for '{cfg.experiment}', not '{experiment}'")
    else:
        cfg = experiments.validate_config({"schema_version": experiments.SCHEMA_VERSION, "experiment": experiment})
    if args.seed is not None:
        cfg = experiments.ExperimentConfig(cfg.experiment, cfg.parameters, args.seed, cfg.output_dir, cfg.base_dir)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    experiment = args.command.replace("-", "_")
    try:
        cfg = _load(args, experiment)
        out = args.output or cfg.output_dir
        if not out:
            raise ConfigError("no output directory: pass --output or set output_dir")
        log.info("running %s into %s", experiment, out)
        record = experiments.run(cfg, out, args.jobs)
    except (ConfigError, DomainError) as exc:
        print(f"pairtrap: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"pairtrap: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"pairtrap: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PairtrapError as exc:
        print(f"pairtrap: error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    log.info("done in %.2f s: %s", record.wall_time_s, ", ".join(record.outputs))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
