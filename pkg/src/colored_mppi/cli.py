"""Command line entry point: ``colored-mppi {sample-noise,run,sweep,analyze}``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .experiments import (
    ExperimentConfig,
    analyze_directory,
    run_experiment,
    run_sweep,
    sample_noise_artifacts,
)
from .noise import ColoredSpec


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="colored-mppi",
        description="Colored-noise MPPI experiments: noise samples, closed-loop runs and sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, needs_config: bool = True) -> None:
        if needs_config:
            p.add_argument("--config", required=True, type=Path, help="experiment JSON file")
        p.add_argument("--out", type=Path, help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=_positive_int, default=1,
                       help="workers filling noise blocks; never changes results")

    noise = sub.add_parser("sample-noise", help="write a colored noise batch and its periodogram")
    noise.add_argument("--config", type=Path,
                       help="JSON with horizon, gamma, sigma, f_min, samples, dt (flags override)")
    noise.add_argument("--horizon", type=int)
    noise.add_argument("--gamma", type=float)
    noise.add_argument("--sigma", type=float)
    noise.add_argument("--f-min", type=float)
    noise.add_argument("--samples", type=_positive_int)
    noise.add_argument("--dt", type=float, help="seconds per step for the frequency axis")
    common(noise, needs_config=False)

    run = sub.add_parser("run", help="seeded closed-loop repetitions for every sampler")
    common(run)

    sweep = sub.add_parser("sweep", help="repeat `run` over values of one parameter")
    common(sweep)
    sweep.add_argument("--axis", required=True,
                       help="sigma, gamma, or a field such as controller.lambda_")
    sweep.add_argument("--values", required=True, type=float, nargs="+")

    analyze = sub.add_parser("analyze", help="recompute metrics from a stored run directory")
    analyze.add_argument("--out", required=True, type=Path, help="directory written by `run`")
    return parser


def _load_experiment(args: argparse.Namespace) -> tuple[ExperimentConfig, Path]:
    config = ExperimentConfig.load(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    out = args.out if args.out is not None else Path(config.output_dir)
    return config, out


def _sample_noise(args: argparse.Namespace) -> Path:
    settings = {"horizon": None, "gamma": 0.0, "sigma": 1.0, "f_min": None,
                "samples": 100, "dt": 1.0, "seed": 0, "output_dir": "noise"}
    if args.config is not None:
        loaded = json.loads(args.config.read_text())
        unknown = set(loaded) - set(settings)
        if unknown:
            raise ValueError(f"unknown sample-noise keys: {sorted(unknown)}")
        settings.update(loaded)
    for key in ("horizon", "gamma", "sigma", "f_min", "samples", "dt", "seed"):
        value = getattr(args, key)
        if value is not None:
            settings[key] = value
    if settings["horizon"] is None:
        raise ValueError("sample-noise needs a horizon (--horizon or config)")
    spec = ColoredSpec(int(settings["horizon"]), gamma=float(settings["gamma"]),
                       sigma=float(settings["sigma"]), f_min=settings["f_min"])
    out = args.out if args.out is not None else Path(settings["output_dir"])
    return sample_noise_artifacts(spec, int(settings["samples"]), int(settings["seed"]), out,
                                  dt=float(settings["dt"]), threads=args.threads)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "sample-noise":
            out = _sample_noise(args)
        elif args.command == "run":
            config, out = _load_experiment(args)
            run_experiment(config, out, threads=args.threads)
        elif args.command == "sweep":
            config, out = _load_experiment(args)
            run_sweep(config, args.axis, args.values, out, threads=args.threads)
        else:
            out = analyze_directory(args.out)
    except (OSError, ValueError, KeyError, TypeError, FloatingPointError, json.JSONDecodeError) as exc:
        print(f"colored-mppi {args.command}: error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
