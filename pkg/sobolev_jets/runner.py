#!/usr/bin/env python3
"""
Sobolev Jets Runner Script
Command-line driver: builds the requested artifacts and prints the result as JSON on stdout
Logging goes to stderr; failures print a JSON error object and exit with the error's code
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

# Add the project root to Python path
project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.append(str(project_root))

from pydantic import ValidationError

from sobolev_jets.core.jets import load_field
from sobolev_jets.errors import ConfigError, SobolevJetsError
from sobolev_jets.settings import RunConfig, Settings, load_settings
from sobolev_jets.tools.construction_tool import decompose_tool, graph_tool, lacunae_tool
from sobolev_jets.tools.extension_tool import extend_tool, wmp_tool
from sobolev_jets.tools.instance_tool import gen_tool
from sobolev_jets.tools.metric_tool import mcshane_tool, metric_tool
from sobolev_jets.tools.report_tool import dumps, error_result
from sobolev_jets.tools.seminorm_tool import seminorm_tool
from sobolev_jets.tools.sweep_tool import sweep_tool
from sobolev_jets.tools.verification_tool import verify_tool

logger = logging.getLogger("sobolev_jets.runner")

FIELD_COMMANDS: Dict[str, Callable[..., Dict[str, Any]]] = {
    "decompose": decompose_tool,
    "lacunae": lacunae_tool,
    "graph": graph_tool,
    "seminorm": seminorm_tool,
    "extend": extend_tool,
    "wmp": wmp_tool,
    "mcshane": mcshane_tool,
}

EXIT_INVARIANT = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sobolev-jets", description="Sobolev extension of jets on finite sets")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML settings file")
    common.add_argument("--output-dir", type=Path, help="directory for artifacts")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tau", type=float)
    common.add_argument("--gamma", type=float, help="graph certificate constant")
    common.add_argument("--depth-cap", type=int)
    common.add_argument("--inflate", type=float)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--quad-order", type=int)
    common.add_argument("--log-level", help="overrides logging.level")

    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "decompose": "Whitney cover JSON",
        "lacunae": "lacuna report",
        "graph": "graph JSON/DOT and sparsity report",
        "seminorm": "all trace functionals",
        "extend": "grid CSV of F and its derivatives",
        "wmp": "F_eps grid and W^m_p parts",
        "mcshane": "McShane-type extension grid of m = 1 data",
        "verify": "full invariant suite",
    }
    for name, text in helps.items():
        cmd = sub.add_parser(name, parents=[common], help=text)
        cmd.add_argument("input", type=Path, help="jet field JSON")

    metric = sub.add_parser("metric", parents=[common], help="rho_q / d_q dumps")
    metric.add_argument("--density", type=Path, help="density JSON (default: constant 1 on [-1, 1]^n)")
    metric.add_argument("--n", type=int, default=2)
    metric.add_argument("--pairs", type=int, default=100)

    gen = sub.add_parser("gen", parents=[common], help="random instance generator")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--points", type=int, required=True)
    gen.add_argument("--p", type=float)
    gen.add_argument("--polynomial", action="store_true", help="jets of one global polynomial")
    gen.add_argument("--output", type=Path, help="jet file to write")

    sweep = sub.add_parser("sweep", parents=[common], help="ratio windows over instance banks")
    sweep.add_argument("--dims", type=int, nargs="+", default=[1, 2])
    sweep.add_argument("--orders", type=int, nargs="+", default=[1, 2, 3])
    sweep.add_argument("--instances", type=int, default=5)
    sweep.add_argument("--points", type=int, default=6)
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _run_config(args: argparse.Namespace) -> RunConfig:
    try:
        return RunConfig(
            command=args.command,
            input_path=getattr(args, "input", None),
            output_dir=args.output_dir,
            seed=args.seed,
            tau=args.tau,
            gamma=args.gamma,
            depth_cap=args.depth_cap,
            inflate=args.inflate,
            epsilon=args.epsilon,
            quad_order=args.quad_order,
        )
    except ValidationError as e:
        raise ConfigError(f"Invalid arguments: {e}") from e


def dispatch(args: argparse.Namespace, run: RunConfig, settings: Settings) -> Dict[str, Any]:
    output_dir = Path(settings.output_dir)
    if run.command in FIELD_COMMANDS:
        return FIELD_COMMANDS[run.command](load_field(run.input_path), settings, output_dir)
    if run.command == "verify":
        return verify_tool(load_field(run.input_path), settings, output_dir, run.seed)
    if run.command == "metric":
        return metric_tool(settings, output_dir, run.seed, args.density, args.n, args.pairs)
    if run.command == "gen":
        target = args.output or output_dir / f"instance_n{args.n}_m{args.m}_seed{run.seed}.json"
        return gen_tool(run.seed, args.n, args.m, args.points, target, args.p, args.polynomial)
    if run.command == "sweep":
        return sweep_tool(settings, output_dir, run.seed, args.dims, args.orders, args.instances, args.points)
    raise ConfigError(f"unknown command '{run.command}'")


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand and return its exit code"""
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or "WARNING")

    try:
        run = _run_config(args)
        settings = run.apply(load_settings(args.config))
        configure_logging(args.log_level or settings.logging.level)
        result = dispatch(args, run, settings)
        sys.stdout.write(dumps(result).decode("utf-8") + "\n")
        if run.command == "verify" and not result["passed"]:
            logger.error("verification failed")
            return EXIT_INVARIANT
        return 0

    except SobolevJetsError as e:
        logger.error("%s: %s", type(e).__name__, e)
        sys.stdout.write(dumps(error_result(e, e.exit_code)).decode("utf-8") + "\n")
        return e.exit_code

    except ValueError as e:
        logger.error("invalid input: %s", e)
        sys.stdout.write(dumps(error_result(e, ConfigError.exit_code)).decode("utf-8") + "\n")
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
