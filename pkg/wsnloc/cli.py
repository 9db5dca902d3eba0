"""Command line interface: gen, run, eval and inspect."""

import argparse
import sys
from collections.abc import Sequence
from typing import Any

import anyio
import numpy as np

from .channel import bias_constant, estimator_variance
from .config import ExperimentConfig, async_load_config, async_load_options, sweep_values
from .const import (
    ALGORITHMS,
    ALIGN_AUTO,
    ALIGN_MODES,
    ALIGN_PROCRUSTES,
    CONF_ALGORITHM,
    CONF_ALIGN,
    CONF_Q_ATS,
    CONF_Q_OBS,
    CONF_REPLICAS,
    CONF_SEED,
    EXIT_OK,
    MAX_ENUMERATION_NODES,
    SCENARIO_FILENAME,
    STREAM_INIT,
    VARIANT_DECOUPLED,
    VERSION,
)
from .coordinator import ExperimentCoordinator
from .domds import literal_y_bias
from .domle import build_graph, log_residual_variance
from .exceptions import ConfigurationError, WsnlocError
from .harness import mean_curve
from .mds_core import rmse, similarity_from_positions
from .utils.logger import _LOGGER, setup_console_logging
from .utils.report import async_read_text, emit_scenario, parse_positions, table_renderer
from .utils.utils import StreamFactory


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one sub-command per action."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key/value configuration file")
    common.add_argument("--seed", type=int, help="master seed (overrides run.seed)")
    common.add_argument("--out", default=".", help="output directory (default: .)")
    common.add_argument("--algorithm", choices=ALGORITHMS, help="overrides `algorithm`")
    common.add_argument("--replicas", type=int, help="overrides run.replicas")
    common.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any configuration key (repeatable)",
    )
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="wsnloc", description="Distributed on-line localization of sensor networks."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", parents=[common], help="write the scenario CSV")
    run = sub.add_parser("run", parents=[common], help="run the experiment and write CSVs")
    run.add_argument(
        "--sweep",
        action="store_true",
        help="treat observation.q and ats.q as comma-separated lists",
    )
    ev = sub.add_parser("eval", parents=[common], help="RMSE between two position CSVs")
    ev.add_argument("estimate", help="positions CSV (node,x_m,y_m[,z_m])")
    ev.add_argument("truth", help="scenario CSV (node,x_m,y_m[,z_m],is_anchor)")
    ev.add_argument("--align", choices=ALIGN_MODES, help="overrides eval.align")
    sub.add_parser("inspect", parents=[common], help="print resolved config and constants")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    overrides: dict[str, Any] = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides[CONF_SEED] = args.seed
    if args.algorithm is not None:
        overrides[CONF_ALGORITHM] = args.algorithm
    if args.replicas is not None:
        overrides[CONF_REPLICAS] = args.replicas
    if getattr(args, "align", None) is not None:
        overrides[CONF_ALIGN] = args.align
    return overrides


async def _options(args: argparse.Namespace) -> dict[str, Any]:
    options: dict[str, Any] = await async_load_options(args.config) if args.config else {}
    options.update(_overrides(args))
    return options


async def async_gen(args: argparse.Namespace) -> int:
    """Write the scenario of a config."""
    config = await async_load_config(args.config, _overrides(args))
    coordinator = ExperimentCoordinator(config)
    scenario = await coordinator.async_setup()
    path = anyio.Path(args.out) / SCENARIO_FILENAME
    await emit_scenario(scenario.positions, scenario.anchors, path)
    _LOGGER.info("Scenario with %d nodes written to %s", scenario.n, path)
    return EXIT_OK


async def async_run(args: argparse.Namespace) -> int:
    """Run a config, or a sweep over reception probabilities."""
    options = await _options(args)
    if args.sweep:
        pairs = sweep_values(options)
        first_obs, first_ats = pairs[0]
        config = ExperimentConfig.from_options(
            {**options, CONF_Q_OBS: first_obs, CONF_Q_ATS: first_ats}
        )
        coordinator = ExperimentCoordinator(config)
        rows = await coordinator.async_sweep(pairs)
        path = await coordinator.async_write_sweep(rows, args.out)
        _LOGGER.info("Sweep over %d point(s) written to %s", len(pairs), path)
        return EXIT_OK

    config = ExperimentConfig.from_options(options)
    coordinator = ExperimentCoordinator(config)
    records = await coordinator.async_run()
    written = await coordinator.async_write(args.out)
    curve = mean_curve(records)
    if curve:
        print(table_renderer(["tick", "broadcasts", "mean rmse_m"], [curve[0], curve[-1]]))
    for path in written:
        _LOGGER.info("Wrote %s", path)
    return EXIT_OK


async def async_eval(args: argparse.Namespace) -> int:
    """Print the RMSE between an estimate and the ground truth."""
    config = await async_load_config(args.config, _overrides(args))
    estimate, _ = parse_positions(await async_read_text(args.estimate), args.estimate)
    truth, anchors = parse_positions(await async_read_text(args.truth), args.truth)
    if estimate.shape != truth.shape:
        raise ConfigurationError(
            f"Estimate has shape {estimate.shape}, ground truth has {truth.shape}"
        )
    align = ALIGN_PROCRUSTES if config.align == ALIGN_AUTO else config.align
    value = rmse(estimate, truth, align, anchors)
    print(table_renderer(["estimate", "truth", "align", "rmse_m"], [[args.estimate, args.truth, align, value]]))
    return EXIT_OK


def inspect_rows(config: ExperimentConfig, positions: np.ndarray, anchors: Sequence[int]) -> list[list[Any]]:
    """Resolved keys followed by derived constants."""
    rows: list[list[Any]] = [[key, value] for key, value in sorted(config.options.items())]
    c = bias_constant(config.channel)
    p = positions.shape[1]
    scalars = (p + 1) + p * p + (1 if config.variant == VARIANT_DECOUPLED else 0)
    rows += [
        ["bias constant C", c],
        ["C^4", c**4],
        ["estimator variance factor C^8-1", estimator_variance(1.0, config.channel)],
        ["log-residual variance", log_residual_variance(config.channel)],
        ["scalars per doMDS tick", scalars],
        ["doMLE edges", len(build_graph(positions, anchors, config.radius).edges)],
    ]
    if len(positions) <= MAX_ENUMERATION_NODES:
        u = StreamFactory(config.seed).stream(0, STREAM_INIT).uniform(-1.0, 1.0, (len(positions), p))
        bias = literal_y_bias(u, similarity_from_positions(positions).s, config.q_ats)
        rows.append(["literal-variant Y bias norm", float(np.linalg.norm(bias))])
    return rows


async def async_inspect(args: argparse.Namespace) -> int:
    """Print the resolved configuration and derived constants."""
    config = await async_load_config(args.config, _overrides(args))
    coordinator = ExperimentCoordinator(config)
    scenario = await coordinator.async_setup()
    rows = inspect_rows(config, scenario.positions, scenario.anchors)
    print(table_renderer(["key", "value"], rows))
    return EXIT_OK


COMMANDS = {
    "gen": async_gen,
    "run": async_run,
    "eval": async_eval,
    "inspect": async_inspect,
}


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    setup_console_logging(args.verbose)
    try:
        return anyio.run(COMMANDS[args.command], args)
    except WsnlocError as exc:
        _LOGGER.error("%s failed: %s", args.command, exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
