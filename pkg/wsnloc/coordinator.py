"""Experiment coordinator for wsnloc."""

from functools import partial
import sys

import anyio
from anyio import to_thread
import numpy as np

if sys.version_info < (3, 11):
    from exceptiongroup import BaseExceptionGroup

from .channel import ObservationModel
from .config import ExperimentConfig
from .const import (
    ALGO_DOMDS_DOMLE,
    MEAN_FILENAME,
    POSITIONS_FILENAME,
    REFINEMENT_FILENAME,
    RMSE_FILENAME,
    SWEEP_FILENAME,
)
from .exceptions import WsnlocError
from .harness import RunRecord, mean_curve, observation_model, run_replica, scenario_for
from .mds_core import Scenario
from .utils.logger import _LOGGER, INDENT
from .utils.report import (
    async_read_text,
    emit_csv,
    emit_mean,
    emit_positions,
    emit_refinement,
    emit_sweep,
    parse_matrix,
    parse_positions,
)


class ExperimentCoordinator:
    """Resolve the inputs of a config and run its replicas."""

    def __init__(self, config: ExperimentConfig) -> None:
        """Initialize the coordinator."""
        self.config = config
        self.scenario: Scenario | None = None
        self.obs: ObservationModel | None = None
        self.records: list[RunRecord] = []
        self._lock = anyio.Lock()

    async def async_setup(self) -> Scenario:
        """Load explicit inputs and build the scenario and observation model."""
        _LOGGER.debug("::coordinator.async_setup::")
        explicit = None
        if self.config.explicit:
            text = await async_read_text(self.config.positions_path)
            explicit = parse_positions(text, self.config.positions_path)
        self.scenario = scenario_for(self.config, explicit)

        q_matrix = None
        if self.config.q_matrix_path:
            text = await async_read_text(self.config.q_matrix_path)
            q_matrix = parse_matrix(text, self.config.q_matrix_path)
            _LOGGER.debug(f"{INDENT}per-link probabilities from {self.config.q_matrix_path}")
        self.obs = observation_model(self.config, self.scenario, q_matrix)
        return self.scenario

    async def async_run(self, config: ExperimentConfig | None = None) -> list[RunRecord]:
        """Run all replicas in worker threads; results come back in replica order."""
        config = config or self.config
        if self.scenario is None:
            await self.async_setup()
        obs = self.obs if config is self.config else observation_model(config, self.scenario)
        results: list[RunRecord | None] = [None] * config.replicas
        limiter = anyio.CapacityLimiter(config.workers)

        async def worker(replica: int) -> None:
            results[replica] = await to_thread.run_sync(
                partial(run_replica, config, self.scenario, obs, replica), limiter=limiter
            )

        async with self._lock:
            _LOGGER.info(
                "Running %s: %d replica(s) on %d worker(s), N=%d, seed %d",
                config.algorithm,
                config.replicas,
                config.workers,
                self.scenario.n,
                config.seed,
            )
            try:
                async with anyio.create_task_group() as tg:
                    for replica in range(config.replicas):
                        tg.start_soon(worker, replica)
            except BaseExceptionGroup as group:
                # surface the first package error so callers see its exit code
                errors = [exc for exc in group.exceptions if isinstance(exc, WsnlocError)]
                if errors:
                    raise errors[0] from group
                raise
        records = [record for record in results if record is not None]
        if config is self.config:
            self.records = records
        return records

    async def async_sweep(self, pairs: list[tuple[float, float]]) -> list[list[float]]:
        """Mean curve of every (q_obs, q_ats) pair."""
        rows = []
        for q_obs, q_ats in pairs:
            _LOGGER.debug(f"{INDENT}sweep point q_obs={q_obs} q_ats={q_ats}")
            records = await self.async_run(self.config.with_probabilities(q_obs, q_ats))
            rows.extend([q_obs, q_ats, *row] for row in mean_curve(records))
        return rows

    async def async_write(self, out_dir: str) -> list[str]:
        """Write the output files of the last run; returns their paths."""
        out = anyio.Path(out_dir)
        written = []
        rmse_path = out / RMSE_FILENAME.format(algorithm=self.config.algorithm)
        await emit_csv(self.records, rmse_path)
        written.append(str(rmse_path))
        await emit_mean(mean_curve(self.records), out / MEAN_FILENAME)
        written.append(str(out / MEAN_FILENAME))
        if self.records and self.records[0].final_positions is not None:
            await emit_positions(self.records[0].final_positions, out / POSITIONS_FILENAME)
            written.append(str(out / POSITIONS_FILENAME))
        if self.config.algorithm == ALGO_DOMDS_DOMLE:
            summaries = np.array([r.refinement.as_row() for r in self.records if r.refinement])
            await emit_refinement(summaries.mean(axis=0).tolist(), out / REFINEMENT_FILENAME)
            written.append(str(out / REFINEMENT_FILENAME))
        _LOGGER.debug(f"::coordinator.async_write:: {len(written)} file(s) in {out_dir}")
        return written

    async def async_write_sweep(self, rows: list[list[float]], out_dir: str) -> str:
        """Write sweep.csv."""
        path = anyio.Path(out_dir) / SWEEP_FILENAME
        await emit_sweep(rows, path)
        return str(path)
