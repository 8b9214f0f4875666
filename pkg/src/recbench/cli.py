"""Command-line entry point.

Subcommands: `run` executes an experiment config and writes the result
CSV atomically, `synth` generates a synthetic dataset, `gradcheck` runs
the finite-difference gradient suite, `version` prints the version.
Progress goes to stderr; machine-readable output is the CSV only.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .corpus import generate_synthetic
from .errors import ConfigError, RecbenchError
from .evalharness import ExperimentConfig, format_csv, run_experiment, validate_config
from .neural import gradient_check

GRADCHECK_TOLERANCE = 1e-4

_CONFIG_KEYS = ("ratings", "meta", "split_year", "alphas", "models", "modality",
                "runs", "seed", "epochs", "embeddings", "out")


def parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="recbench",
        description="implicit-feedback recommendation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiment described by a config file")
    p_run.add_argument("--config", required=True, help="path to a key = value config file")

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--mode", required=True, choices=("relatedness", "diversity"))
    p_synth.add_argument("--clusters", required=True, type=int)
    p_synth.add_argument("--docs-per-cluster", required=True, type=int)
    p_synth.add_argument("--items-per-cluster", required=True, type=int)
    p_synth.add_argument("--items-per-doc", required=True, type=int)
    p_synth.add_argument("--seed", required=True, type=int)
    p_synth.add_argument("--out", required=True, help="output directory")

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p_grad.add_argument("--seed", type=int, default=0)

    sub.add_parser("version", help="print the package version")
    return parser.parse_args(argv)


def load_config(path) -> ExperimentConfig:
    """Parse a flat `key = value` config file into an ExperimentConfig.

    Unknown keys, unreadable values, and model/modality mismatches fail
    with the offending key and line. Blank lines and lines starting with
    '#' are skipped. Defaults: runs=3, epochs=20, modality=both, seed=0,
    alphas=1, models=all, embeddings=builtin:hash:50:0.
    """
    path = Path(path)
    raw: dict[str, tuple[str, int]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _CONFIG_KEYS:
                raise ConfigError(
                    f"{path}:{line_no}: unknown key {key!r}; valid keys: "
                    + ", ".join(_CONFIG_KEYS)
                )
            if key in raw:
                raise ConfigError(f"{path}:{line_no}: duplicate key {key!r}")
            raw[key] = (value, line_no)

    def require(key):
        if key not in raw:
            raise ConfigError(f"{path}: missing required key {key!r}")
        return raw[key][0]

    def parse_int(key, default=None):
        if key not in raw:
            return default
        value, line_no = raw[key]
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{path}:{line_no}: key {key!r} needs an integer, "
                              f"got {value!r}") from None

    config = ExperimentConfig(
        ratings=require("ratings"),
        meta=require("meta"),
        split_year=parse_int("split_year") if "split_year" in raw else None,
        out=require("out"),
        modality=raw.get("modality", ("both", 0))[0],
        n_runs=parse_int("runs", 3),
        base_seed=parse_int("seed", 0),
        epochs=parse_int("epochs", 20),
        embeddings=raw.get("embeddings", ("builtin:hash:50:0", 0))[0],
    )
    if config.split_year is None:
        raise ConfigError(f"{path}: missing required key 'split_year'")
    if "alphas" in raw:
        value, line_no = raw["alphas"]
        try:
            config.alphas = tuple(int(v.strip()) for v in value.split(","))
        except ValueError:
            raise ConfigError(f"{path}:{line_no}: key 'alphas' needs a comma list of "
                              f"integers, got {value!r}") from None
    if "models" in raw:
        value, _ = raw["models"]
        config.models = tuple(v.strip() for v in value.split(",") if v.strip())
    try:
        validate_config(config)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config


def _write_csv_atomically(text: str, out_path: Path) -> None:
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out_path.parent, prefix=out_path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        if args.command == "version":
            print(__version__)
            return 0
        if args.command == "gradcheck":
            worst = gradient_check(seed=args.seed)
            print(f"max relative error: {worst:.3e}")
            return 0 if worst < GRADCHECK_TOLERANCE else 1
        if args.command == "synth":
            ratings, meta = generate_synthetic(
                args.mode, args.clusters, args.docs_per_cluster,
                args.items_per_cluster, args.items_per_doc, args.seed, args.out)
            print(f"wrote {ratings} and {meta}", file=sys.stderr)
            return 0
        if args.command == "run":
            config = load_config(args.config)
            results = run_experiment(
                config, log=lambda line: print(line, file=sys.stderr))
            _write_csv_atomically(format_csv(results), Path(config.out))
            print(f"wrote {config.out}", file=sys.stderr)
            return 0
        raise ConfigError(f"unknown command {args.command!r}")
    except (RecbenchError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
