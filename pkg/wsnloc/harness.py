"""Scenario generation and the per-replica experiment pipelines."""

import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .channel import ObservationModel, sample_observation
from .config import ExperimentConfig
from .const import (
    ALGO_BATCH_MDS,
    ALGO_DOMDS,
    ALGO_DOMDS_DOMLE,
    ALGO_DOMLE,
    ALGO_OJA,
    ALIGN_ANCHOR,
    ALIGN_AUTO,
    ALIGN_NONE,
    FIRST_CHECKPOINT,
    LAYOUT_GRID,
    LAYOUT_UNIFORM,
    READOUT_AXES,
    STREAM_INIT,
    STREAM_OBSERVATION,
    STREAM_SCENARIO,
)
from .domds import CommStats, domds_round, init_network, network_positions
from .domle import build_graph, domle_round, init_bank, owner_positions
from .exceptions import ConfigurationError, DegenerateGeometryError, DomainError
from .mds_core import Scenario, batch_mds, column_rank, double_center, procrustes_align, rmse
from .oja_central import assemble_positions, axis_positions, init_state, run_oja
from .utils.logger import _LOGGER, INDENT
from .utils.utils import StreamFactory


@dataclass(frozen=True)
class Checkpoint:
    """One row of a replica's RMSE trajectory."""

    tick: int
    broadcasts: int
    rmse: float
    wall_ms: float = 0.0


@dataclass(frozen=True)
class RefinementSummary:
    """Before/after doMLE refinement over the unknown nodes."""

    rmse_before: float
    rmse_after: float
    improvement_pct: float
    positions_improved_pct: float

    def as_row(self) -> list[float]:
        """Values in output column order."""
        return [self.rmse_before, self.rmse_after, self.improvement_pct, self.positions_improved_pct]


@dataclass(eq=False)
class RunRecord:
    """Result of one replica."""

    replica: int
    checkpoints: list[Checkpoint] = field(default_factory=list)
    final_positions: np.ndarray | None = None
    refinement: RefinementSummary | None = None

    def add(self, checkpoint: Checkpoint) -> None:
        """Append a checkpoint; ticks must strictly increase."""
        if self.checkpoints and checkpoint.tick <= self.checkpoints[-1].tick:
            raise DomainError(
                f"Checkpoint ticks must increase, got {checkpoint.tick} after "
                f"{self.checkpoints[-1].tick}"
            )
        self.checkpoints.append(checkpoint)


def checkpoints(iterations: int) -> list[int]:
    """Ticks 0, 10, 20, 40, … below `iterations`, then `iterations` itself."""
    if iterations < 1:
        raise ConfigurationError(f"Iterations must be ≥ 1, got {iterations}")
    ticks = [0]
    tick = FIRST_CHECKPOINT
    while tick < iterations:
        ticks.append(tick)
        tick *= 2
    ticks.append(iterations)
    return ticks


def _grid_shape(n: int, rows: int, cols: int) -> tuple[int, int]:
    if rows and cols:
        return rows, cols
    if rows:
        return rows, math.ceil(n / rows)
    if cols:
        return math.ceil(n / cols), cols
    cols = math.ceil(math.sqrt(n))
    return math.ceil(n / cols), cols


def generate_scenario(
    config: ExperimentConfig,
    rng: np.random.Generator,
    explicit: tuple[np.ndarray, Sequence[int]] | None = None,
) -> Scenario:
    """Build the ground truth from the scenario section of a config.

    explicit carries (positions, anchors) read from a scenario CSV.
    """
    p = config.p
    sizes = [config.width, config.height, config.depth][:p]
    area = tuple((0.0, float(size)) for size in sizes)
    anchors = config.anchors
    if config.explicit:
        if explicit is None:
            raise ConfigurationError("Explicit layout needs scenario.positions")
        positions, csv_anchors = explicit
        positions = np.asarray(positions, dtype=float)
        if positions.shape[1] != p:
            raise ConfigurationError(
                f"Scenario file has {positions.shape[1]} coordinates, scenario.p is {p}"
            )
        area = ()
        anchors = tuple(csv_anchors)
    elif config.layout == LAYOUT_UNIFORM:
        positions = rng.uniform(0.0, 1.0, size=(config.n, p)) * np.array(sizes)
    elif config.layout == LAYOUT_GRID:
        rows, cols = _grid_shape(config.n, config.rows, config.cols)
        layers = 1 if p == 2 else math.ceil(config.n / (rows * cols))
        if p == 2 and rows * cols < config.n:
            raise ConfigurationError(
                f"Grid {rows}×{cols} holds {rows * cols} nodes, scenario.n is {config.n}"
            )
        axes = [np.linspace(0.0, config.width, cols), np.linspace(0.0, config.height, rows)]
        if p == 3:
            axes.append(np.linspace(0.0, config.depth, layers) if layers > 1 else np.zeros(1))
        # x varies fastest, then y, then z
        grids = np.meshgrid(*reversed(axes), indexing="ij")
        points = np.stack([g.ravel() for g in reversed(grids)], axis=1)
        positions = points[: config.n]
    else:
        raise ConfigurationError(f"Unknown layout: {config.layout}")

    if any(a >= len(positions) for a in anchors):
        raise ConfigurationError(
            f"Anchor indices {anchors} exceed the {len(positions)} nodes of the scenario"
        )
    try:
        scenario = Scenario(positions, anchors, area)
    except DomainError as exc:
        raise ConfigurationError(f"Invalid scenario: {exc}") from exc
    _LOGGER.debug(
        "::generate_scenario:: %s layout, N=%d, p=%d, %d anchors",
        config.layout,
        scenario.n,
        p,
        len(scenario.anchors),
    )
    return scenario


def scenario_for(
    config: ExperimentConfig, explicit: tuple[np.ndarray, Sequence[int]] | None = None
) -> Scenario:
    """The scenario shared by every replica of a run."""
    return generate_scenario(config, StreamFactory(config.seed).stream(0, STREAM_SCENARIO), explicit)


def observation_model(
    config: ExperimentConfig, scenario: Scenario, q_matrix: np.ndarray | None = None
) -> ObservationModel:
    """Uniform q_ij unless a per-link matrix is supplied."""
    if q_matrix is None:
        return ObservationModel.uniform(scenario.n, config.q_obs)
    if q_matrix.shape != (scenario.n, scenario.n):
        raise ConfigurationError(
            f"q matrix is {q_matrix.shape[0]}×{q_matrix.shape[1]}, scenario has {scenario.n} nodes"
        )
    return ObservationModel.from_matrix(q_matrix)


def align_to_anchors(est: np.ndarray, scenario: Scenario) -> np.ndarray:
    """Move an estimate into absolute coordinates and pin the anchors."""
    if len(scenario.anchors) == 0:
        raise ConfigurationError("Absolute coordinates need at least one anchor")
    anchors = list(scenario.anchors)
    aligned = procrustes_align(est, scenario.positions, anchor_mode=True, anchors=anchors).aligned
    aligned[anchors] = scenario.positions[anchors]
    return aligned


def refinement_summary(
    before: np.ndarray, after: np.ndarray, truth: np.ndarray, unknown: Sequence[int]
) -> RefinementSummary:
    """RMSE before and after refinement over the unknown nodes."""
    idx = list(unknown)
    if not idx:
        raise ConfigurationError("Refinement summary needs at least one unknown node")
    err_before = np.linalg.norm(before[idx] - truth[idx], axis=1)
    err_after = np.linalg.norm(after[idx] - truth[idx], axis=1)
    rmse_before = float(np.sqrt(np.mean(err_before**2)))
    rmse_after = float(np.sqrt(np.mean(err_after**2)))
    improvement = 100.0 * (rmse_before - rmse_after) / rmse_before if rmse_before > 0 else 0.0
    improved = 100.0 * float(np.mean(err_after < err_before))
    return RefinementSummary(rmse_before, rmse_after, improvement, improved)


def mean_curve(records: Sequence[RunRecord]) -> list[list[float]]:
    """Per-checkpoint mean of broadcasts and RMSE across replicas."""
    if not records:
        return []
    ticks = [cp.tick for cp in records[0].checkpoints]
    for record in records[1:]:
        if [cp.tick for cp in record.checkpoints] != ticks:
            raise DomainError("Replicas have different checkpoint ticks")
    curve = []
    for k, tick in enumerate(ticks):
        broadcasts = float(np.mean([r.checkpoints[k].broadcasts for r in records]))
        value = float(np.mean([r.checkpoints[k].rmse for r in records]))
        curve.append([tick, broadcasts, value])
    return curve


class _Clock:
    def __init__(self, enabled: bool) -> None:
        self.enabled = enabled
        self.start = time.perf_counter()

    def ms(self) -> float:
        return 1e3 * (time.perf_counter() - self.start) if self.enabled else 0.0


def _with_context(
    exc: DegenerateGeometryError, scenario: Scenario, replica: int, tick: int
) -> DegenerateGeometryError:
    return DegenerateGeometryError(
        f"{exc} (scenario N={scenario.n}, p={scenario.p}, replica {replica}, tick {tick})",
        eigenvalue=exc.eigenvalue,
    )


def _warn_if_collapsed(u: np.ndarray, label: str, replica: int) -> None:
    rank = column_rank(u)
    if rank < u.shape[1]:
        # Π_K clamps both columns to ±α at once and u, −u is then an invariant set
        _LOGGER.warning(
            "%s replica %d ended with U of rank %d < %d; one position axis is lost",
            label,
            replica,
            rank,
            u.shape[1],
        )


def _run_batch(
    config: ExperimentConfig,
    scenario: Scenario,
    obs: ObservationModel,
    streams: StreamFactory,
    record: RunRecord,
    clock: _Clock,
) -> np.ndarray:
    total = np.zeros((scenario.n, scenario.n))
    marks = set(checkpoints(config.iterations)[1:])
    align = config.alignment(absolute=False)
    est = None
    for tick in range(1, config.iterations + 1):
        total += sample_observation(
            scenario, obs, config.channel, streams.stream(tick, STREAM_OBSERVATION)
        ).s
        if tick in marks:
            try:
                est = batch_mds(total / tick, scenario.p)
            except DegenerateGeometryError as exc:
                raise _with_context(exc, scenario, streams.replica, tick) from exc
            record.add(
                Checkpoint(tick, 0, rmse(est, scenario.positions, align, scenario.anchors), clock.ms())
            )
    return est


def _run_oja(
    config: ExperimentConfig,
    scenario: Scenario,
    obs: ObservationModel,
    streams: StreamFactory,
    record: RunRecord,
    clock: _Clock,
) -> np.ndarray:
    def m_source(tick: int) -> np.ndarray:
        s = sample_observation(
            scenario, obs, config.channel, streams.stream(tick, STREAM_OBSERVATION)
        ).s
        return double_center(s).m

    readout = axis_positions if config.readout == READOUT_AXES else assemble_positions
    align = config.alignment(absolute=False)
    state = init_state(scenario.n, scenario.p, streams.stream(0, STREAM_INIT))
    for tick in checkpoints(config.iterations):
        state = run_oja(m_source, state, config.schedule, config.box, tick - state.iter)
        est = readout(state)
        record.add(
            Checkpoint(tick, 0, rmse(est, scenario.positions, align, scenario.anchors), clock.ms())
        )
    _warn_if_collapsed(state.u, "Oja", streams.replica)
    return est


def _run_domds(
    config: ExperimentConfig,
    scenario: Scenario,
    obs: ObservationModel,
    streams: StreamFactory,
    record: RunRecord,
    clock: _Clock,
    absolute: bool = False,
) -> np.ndarray:
    align = ALIGN_ANCHOR if absolute and config.align == ALIGN_AUTO else config.alignment(False)
    axes = config.readout == READOUT_AXES
    network = init_network(scenario.n, scenario.p, streams.stream(0, STREAM_INIT))
    stats = CommStats()
    for mark in checkpoints(config.iterations):
        while network.tick < mark:
            gamma = config.schedule.gamma(network.tick + 1)
            network, tick_stats = domds_round(
                network,
                scenario,
                config.channel,
                obs,
                config.q_ats,
                gamma,
                streams,
                config.variant,
                config.box,
            )
            stats = stats + tick_stats
        est = network_positions(network, axes)
        record.add(
            Checkpoint(
                mark,
                stats.broadcasts_sent,
                rmse(est, scenario.positions, align, scenario.anchors),
                clock.ms(),
            )
        )
    _LOGGER.debug(
        f"{INDENT}doMDS replica {streams.replica}: {stats.broadcasts_sent} broadcasts, "
        f"{stats.scalars_transmitted} scalars"
    )
    _warn_if_collapsed(network.u, "doMDS", streams.replica)
    return est


def _run_domle(
    config: ExperimentConfig,
    scenario: Scenario,
    streams: StreamFactory,
    record: RunRecord,
    clock: _Clock,
    start: np.ndarray,
    offset: int = 0,
    broadcasts: int = 0,
) -> np.ndarray:
    graph = build_graph(scenario.positions, scenario.anchors, config.radius)
    bank = init_bank(graph, start)
    align = config.alignment(absolute=True)
    stats = CommStats()
    for mark in checkpoints(config.mle_iterations):
        while bank.tick < mark:
            gamma = config.mle_schedule.gamma(bank.tick + 1)
            bank, tick_stats = domle_round(
                bank, graph, scenario, config.channel, gamma, streams, config.d_min
            )
            stats = stats + tick_stats
        if offset and mark == 0:
            continue
        est = owner_positions(bank, graph)
        record.add(
            Checkpoint(
                offset + mark,
                broadcasts + stats.broadcasts_sent,
                rmse(est, scenario.positions, align, scenario.anchors),
                clock.ms(),
            )
        )
    return owner_positions(bank, graph)


def run_replica(
    config: ExperimentConfig, scenario: Scenario, obs: ObservationModel, replica: int
) -> RunRecord:
    """Run one replica of the configured algorithm."""
    streams = StreamFactory(config.seed, replica)
    record = RunRecord(replica)
    clock = _Clock(config.wall_time)
    algo = config.algorithm
    _LOGGER.debug(f"::run_replica:: {algo} replica {replica}")

    if algo == ALGO_BATCH_MDS:
        final = _run_batch(config, scenario, obs, streams, record, clock)
        final = _final_alignment(config, final, scenario, absolute=False)
    elif algo == ALGO_OJA:
        final = _run_oja(config, scenario, obs, streams, record, clock)
        final = _final_alignment(config, final, scenario, absolute=False)
    elif algo == ALGO_DOMDS:
        final = _run_domds(config, scenario, obs, streams, record, clock)
        final = _final_alignment(config, final, scenario, absolute=False)
    elif algo == ALGO_DOMLE:
        start = streams.stream(0, STREAM_INIT).uniform(0.0, 1.0, size=scenario.positions.shape)
        lows = np.array([lo for lo, _ in scenario.area])
        highs = np.array([hi for _, hi in scenario.area])
        start = lows + start * (highs - lows)
        start[list(scenario.anchors)] = scenario.positions[list(scenario.anchors)]
        final = _run_domle(config, scenario, streams, record, clock, start)
        final = _final_alignment(config, final, scenario, absolute=True)
    elif algo == ALGO_DOMDS_DOMLE:
        if not scenario.anchors:
            raise ConfigurationError("domds+domle needs anchors to fix absolute coordinates")
        mds = _run_domds(config, scenario, obs, streams, record, clock, absolute=True)
        before = align_to_anchors(mds, scenario)
        sent = record.checkpoints[-1].broadcasts
        final = _run_domle(
            config, scenario, streams, record, clock, before, config.iterations, sent
        )
        record.refinement = refinement_summary(before, final, scenario.positions, scenario.unknown)
        _LOGGER.debug(
            f"{INDENT}refinement {record.refinement.rmse_before:.4g} -> "
            f"{record.refinement.rmse_after:.4g} m"
        )
        final = _final_alignment(config, final, scenario, absolute=True)
    else:
        raise ConfigurationError(f"Unknown algorithm: {algo}")
    record.final_positions = final
    return record


def _final_alignment(
    config: ExperimentConfig, est: np.ndarray, scenario: Scenario, absolute: bool
) -> np.ndarray:
    align = config.alignment(absolute)
    if align == ALIGN_NONE:
        return est
    if align == ALIGN_ANCHOR:
        return procrustes_align(est, scenario.positions, anchor_mode=True, anchors=scenario.anchors).aligned
    return procrustes_align(est, scenario.positions).aligned


def run_experiment(
    config: ExperimentConfig,
    scenario: Scenario | None = None,
    obs: ObservationModel | None = None,
) -> list[RunRecord]:
    """Run every replica in order, in the calling thread."""
    scenario = scenario if scenario is not None else scenario_for(config)
    obs = obs if obs is not None else observation_model(config, scenario)
    _LOGGER.info(
        "Running %s: %d replica(s), N=%d, seed %d",
        config.algorithm,
        config.replicas,
        scenario.n,
        config.seed,
    )
    return [run_replica(config, scenario, obs, r) for r in range(config.replicas)]
