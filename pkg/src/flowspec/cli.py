"""Command-line entry point.

    flowspec run CONFIG [--out DIR] [--seed N] [--backend fd|fourier]
    flowspec models

Exit codes: 0 success, 2 configuration/validation failure, 3 numerical
failure (missing zero mode, defective eigenproblem, indeterminate index...).
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .exceptions import FlowspecError, NumericalError, ValidationError
from .models import build_model, list_models
from .operators import normalize_backend
from .reporting import RunConfig, run


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowspec",
        description="Spectral and trajectory diagnostics of noisy flows on meshes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the tasks in a JSON run config")
    p_run.add_argument("config", help="path to the run configuration (JSON)")
    p_run.add_argument("--out", default=None, help="output directory override")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the simulation seed")
    p_run.add_argument("--backend", default=None, choices=["fd", "fourier"],
                       help="override the operator backend")

    sub.add_parser("models", help="list the registered model names")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "models":
            for name in list_models():
                print(name)
            return 0

        config = RunConfig.from_file(args.config)
        if args.backend is not None:
            config = _replace(config, backend=normalize_backend(args.backend))
        if args.seed is not None:
            config = _replace(config, sim={**config.sim, "seed": int(args.seed)})
        doc = run(config, out_dir=args.out)
        print(doc.path)
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except FlowspecError as exc:
        # remaining library errors are configuration-shaped (bad degree,
        # unsupported mesh for the requested task, deterministic limit)
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _replace(config: RunConfig, **kw) -> RunConfig:
    import dataclasses

    return dataclasses.replace(config, **kw)


if __name__ == "__main__":
    sys.exit(main())
