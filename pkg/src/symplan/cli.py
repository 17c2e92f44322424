"""Command-line entry point: ``symplan --task {experiment,scaling,verify} ...``."""
from __future__ import annotations

import argparse
import sys

from .bench import ConfigError, ExperimentConfig, run_dimension_scaling, run_experiment, verify_theory

EXIT_OK, EXIT_CONFIG, EXIT_THEORY = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="symplan", description="Paired symmetry-aware planning benchmarks.")
    p.add_argument("--task", choices=("experiment", "scaling", "verify"), default="experiment")
    p.add_argument("--dim", type=int, choices=(2, 3), default=2)
    p.add_argument("--object", default="octagon",
                   help="triangle|square|pentagon|hexagon|octagon|rectangle|asymmetric|rectangle-stack(M)|"
                        "N-pyramid|N-prism|tetrahedron|cube|icosahedron")
    p.add_argument("--planner", default="rrt",
                   choices=("rrt", "birrt", "rrt_star", "prm_star_knn", "prm_star_radius"))
    p.add_argument("--worlds", type=int, default=10)
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--mode", choices=("equal", "reduced"), default="equal")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-samples", type=int, default=None)
    p.add_argument("--max-objects", type=int, default=5, help="largest m for --task scaling")
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        cfg = ExperimentConfig(dim=args.dim, object=args.object, planner=args.planner, worlds=args.worlds,
                               pairs=args.pairs, mode=args.mode, seed=args.seed,
                               max_samples=args.max_samples, max_objects=args.max_objects,
                               out=args.out, format=args.format)
        if args.task == "experiment":
            report = run_experiment(cfg)
        elif args.task == "scaling":
            report = run_dimension_scaling(cfg)
        else:
            report = verify_theory(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    text = report.to_csv() if cfg.format == "csv" else report.dumps()
    if cfg.out:
        with open(cfg.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text + ("" if text.endswith("\n") else "\n"))
    if args.task == "verify" and not report.aggregates["passed"]:
        return EXIT_THEORY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
