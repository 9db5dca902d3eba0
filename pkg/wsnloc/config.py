"""Experiment configuration: key/value files, schema and the frozen config."""

from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from typing import Any

import voluptuous as vol

from .channel import ChannelParams
from .const import (
    ALGO_DOMDS_DOMLE,
    ALGO_DOMLE,
    ALGORITHMS,
    ALIGN_AUTO,
    ALIGN_MODES,
    ALIGN_NONE,
    ALIGN_PROCRUSTES,
    CONF_ALGORITHM,
    CONF_ALIGN,
    CONF_ALPHA,
    CONF_ANCHORS,
    CONF_COLS,
    CONF_D_MIN,
    CONF_DEPTH,
    CONF_ETA,
    CONF_HEIGHT,
    CONF_ITERATIONS,
    CONF_LAYOUT,
    CONF_MLE_A,
    CONF_MLE_BETA,
    CONF_MLE_ITERATIONS,
    CONF_N,
    CONF_P,
    CONF_PL0,
    CONF_POSITIONS,
    CONF_Q_ATS,
    CONF_Q_MATRIX,
    CONF_Q_OBS,
    CONF_RADIUS,
    CONF_READOUT,
    CONF_REPLICAS,
    CONF_ROWS,
    CONF_SEED,
    CONF_SIGMA2,
    CONF_STEP_A,
    CONF_STEP_BETA,
    CONF_T_SAMPLES,
    CONF_VARIANT,
    CONF_WALL_TIME,
    CONF_WIDTH,
    CONF_WORKERS,
    DEFAULT_OPTIONS,
    LAYOUT_EXPLICIT,
    LAYOUTS,
    READOUTS,
    VARIANTS,
)
from .exceptions import ConfigurationError
from .oja_central import ProjectionBox, StepSchedule
from .utils.logger import _LOGGER, INDENT
from .utils.report import async_read_text
from .utils.utils import to_listf, to_listi

MAX_SEED = 2**64 - 1


def _int_list(value: Any) -> tuple[int, ...]:
    try:
        return tuple(to_listi(value))
    except ConfigurationError as exc:
        raise vol.Invalid(str(exc)) from exc


def _positive(kind: type) -> vol.All:
    return vol.All(vol.Coerce(kind), vol.Range(min=0, min_included=False))


PROBABILITY = vol.All(vol.Coerce(float), vol.Range(min=0, max=1, min_included=False))
OPEN_PROBABILITY = vol.All(
    vol.Coerce(float), vol.Range(min=0, max=1, min_included=False, max_included=False)
)
EXPONENT = vol.All(vol.Coerce(float), vol.Range(min=0.5, max=1.0))

OPTIONS_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_LAYOUT): vol.In(LAYOUTS),
        vol.Required(CONF_N): vol.All(vol.Coerce(int), vol.Range(min=3)),
        vol.Required(CONF_P): vol.All(vol.Coerce(int), vol.In([2, 3])),
        vol.Required(CONF_WIDTH): _positive(float),
        vol.Required(CONF_HEIGHT): _positive(float),
        vol.Required(CONF_DEPTH): _positive(float),
        vol.Required(CONF_ROWS): vol.All(vol.Coerce(int), vol.Range(min=0)),
        vol.Required(CONF_COLS): vol.All(vol.Coerce(int), vol.Range(min=0)),
        vol.Required(CONF_ANCHORS): _int_list,
        vol.Required(CONF_POSITIONS): vol.Coerce(str),
        vol.Required(CONF_RADIUS): _positive(float),
        vol.Required(CONF_PL0): vol.Coerce(float),
        vol.Required(CONF_ETA): _positive(float),
        vol.Required(CONF_SIGMA2): vol.All(vol.Coerce(float), vol.Range(min=0)),
        vol.Required(CONF_T_SAMPLES): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Required(CONF_Q_OBS): PROBABILITY,
        vol.Required(CONF_Q_MATRIX): vol.Coerce(str),
        vol.Required(CONF_Q_ATS): OPEN_PROBABILITY,
        vol.Required(CONF_ALGORITHM): vol.In(ALGORITHMS),
        vol.Required(CONF_STEP_A): _positive(float),
        vol.Required(CONF_STEP_BETA): EXPONENT,
        vol.Required(CONF_ALPHA): vol.All(
            vol.Coerce(float), vol.Range(min=1, min_included=False)
        ),
        vol.Required(CONF_ITERATIONS): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Required(CONF_REPLICAS): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Required(CONF_SEED): vol.All(vol.Coerce(int), vol.Range(min=0, max=MAX_SEED)),
        vol.Required(CONF_WORKERS): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Required(CONF_VARIANT): vol.In(VARIANTS),
        vol.Required(CONF_READOUT): vol.In(READOUTS),
        vol.Required(CONF_MLE_A): _positive(float),
        vol.Required(CONF_MLE_BETA): EXPONENT,
        vol.Required(CONF_MLE_ITERATIONS): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Required(CONF_D_MIN): _positive(float),
        vol.Required(CONF_ALIGN): vol.In(ALIGN_MODES),
        vol.Required(CONF_WALL_TIME): vol.Boolean(),
    }
)


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse `section.key = value` lines; `#` starts a comment."""
    options: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigurationError(f"{source}:{lineno}: expected `key = value`, got {raw!r}")
        options[key] = value.strip()
    return options


async def async_load_options(path: str) -> dict[str, str]:
    """Read and parse a configuration file."""
    _LOGGER.debug(f"::async_load_options:: reading {path}")
    return parse_text(await async_read_text(path), path)


def validate_options(options: Mapping[str, Any]) -> dict[str, Any]:
    """Merge options over the defaults and validate them."""
    unknown = sorted(set(options) - set(DEFAULT_OPTIONS))
    if unknown:
        raise ConfigurationError(f"Unknown configuration key(s): {', '.join(unknown)}")
    merged = {**DEFAULT_OPTIONS, **options}
    try:
        return OPTIONS_SCHEMA(merged)
    except vol.MultipleInvalid as exc:
        error = exc.errors[0]
        key = ".".join(str(part) for part in error.path)
        raise ConfigurationError(
            f"Invalid value for `{key}`: {error.msg}, got {merged.get(key)!r}"
        ) from exc


def sweep_values(options: Mapping[str, Any]) -> list[tuple[float, float]]:
    """(q_obs, q_ats) pairs of a sweep; comma-separated lists multiply out."""
    q_obs = to_listf(options.get(CONF_Q_OBS, DEFAULT_OPTIONS[CONF_Q_OBS]))
    q_ats = to_listf(options.get(CONF_Q_ATS, DEFAULT_OPTIONS[CONF_Q_ATS]))
    if not q_obs or not q_ats:
        raise ConfigurationError("Sweep needs at least one value of observation.q and ats.q")
    return [(a, b) for a in q_obs for b in q_ats]


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment knobs."""

    layout: str
    n: int
    p: int
    width: float
    height: float
    depth: float
    rows: int
    cols: int
    anchors: tuple[int, ...]
    positions_path: str
    radius: float
    channel: ChannelParams
    q_obs: float
    q_matrix_path: str
    q_ats: float
    algorithm: str
    schedule: StepSchedule
    box: ProjectionBox
    iterations: int
    replicas: int
    seed: int
    workers: int
    variant: str
    readout: str
    mle_schedule: StepSchedule
    mle_iterations: int
    d_min: float
    align: str
    wall_time: bool
    options: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_options(cls, options: Mapping[str, Any]) -> "ExperimentConfig":
        """Validate raw options and build the config."""
        opts = validate_options(options)
        _LOGGER.debug("::ExperimentConfig.from_options:: algorithm %s", opts[CONF_ALGORITHM])
        for key in sorted(options):
            _LOGGER.debug(f"{INDENT}{key} = {opts[key]}")
        return cls(
            layout=opts[CONF_LAYOUT],
            n=opts[CONF_N],
            p=opts[CONF_P],
            width=opts[CONF_WIDTH],
            height=opts[CONF_HEIGHT],
            depth=opts[CONF_DEPTH],
            rows=opts[CONF_ROWS],
            cols=opts[CONF_COLS],
            anchors=opts[CONF_ANCHORS],
            positions_path=opts[CONF_POSITIONS],
            radius=opts[CONF_RADIUS],
            channel=ChannelParams(
                pl0=opts[CONF_PL0],
                eta=opts[CONF_ETA],
                sigma2=opts[CONF_SIGMA2],
                t_samples=opts[CONF_T_SAMPLES],
            ),
            q_obs=opts[CONF_Q_OBS],
            q_matrix_path=opts[CONF_Q_MATRIX],
            q_ats=opts[CONF_Q_ATS],
            algorithm=opts[CONF_ALGORITHM],
            schedule=StepSchedule(opts[CONF_STEP_A], opts[CONF_STEP_BETA]),
            box=ProjectionBox(opts[CONF_ALPHA]),
            iterations=opts[CONF_ITERATIONS],
            replicas=opts[CONF_REPLICAS],
            seed=opts[CONF_SEED],
            workers=opts[CONF_WORKERS],
            variant=opts[CONF_VARIANT],
            readout=opts[CONF_READOUT],
            mle_schedule=StepSchedule(opts[CONF_MLE_A], opts[CONF_MLE_BETA]),
            mle_iterations=opts[CONF_MLE_ITERATIONS],
            d_min=opts[CONF_D_MIN],
            align=opts[CONF_ALIGN],
            wall_time=opts[CONF_WALL_TIME],
            options=opts,
        )

    def with_probabilities(self, q_obs: float, q_ats: float) -> "ExperimentConfig":
        """Copy with other observation and reception probabilities."""
        checked = validate_options({**self.options, CONF_Q_OBS: q_obs, CONF_Q_ATS: q_ats})
        return replace(self, q_obs=checked[CONF_Q_OBS], q_ats=checked[CONF_Q_ATS], options=checked)

    @property
    def explicit(self) -> bool:
        """Positions come from a CSV file."""
        return self.layout == LAYOUT_EXPLICIT

    @property
    def refines(self) -> bool:
        """The run ends with doMLE in absolute coordinates."""
        return self.algorithm in (ALGO_DOMLE, ALGO_DOMDS_DOMLE)

    def alignment(self, absolute: bool | None = None) -> str:
        """Alignment used for RMSE; `auto` depends on the coordinate frame."""
        if self.align != ALIGN_AUTO:
            return self.align
        if absolute is None:
            absolute = self.refines
        return ALIGN_NONE if absolute else ALIGN_PROCRUSTES


async def async_load_config(
    path: str | None, overrides: Mapping[str, Any] | None = None
) -> ExperimentConfig:
    """Load a config file (optional), apply overrides and validate."""
    options: dict[str, Any] = await async_load_options(path) if path else {}
    options.update(overrides or {})
    return ExperimentConfig.from_options(options)

