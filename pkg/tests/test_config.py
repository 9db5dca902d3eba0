"""Test configuration parsing and validation."""

import pytest

from wsnloc.config import (
    ExperimentConfig,
    async_load_config,
    async_load_options,
    parse_text,
    sweep_values,
    validate_options,
)
from wsnloc.const import (
    ALGO_DOMDS_DOMLE,
    ALGO_DOMLE,
    ALIGN_ANCHOR,
    ALIGN_NONE,
    ALIGN_PROCRUSTES,
    CONF_N,
    CONF_Q_ATS,
    CONF_Q_OBS,
    DEFAULT_OPTIONS,
)
from wsnloc.exceptions import ConfigurationError, OutputError

from . import INPUT_DIR, from_list, make_config


def test_parse_text():
    """Comments and blank lines are skipped; values are trimmed."""
    text = "# header\n\nscenario.n = 12  # nodes\nalgorithm=oja\n"
    assert parse_text(text) == {"scenario.n": "12", "algorithm": "oja"}


def test_parse_text_malformed():
    """A line without `=` names its location."""
    with pytest.raises(ConfigurationError) as err:
        parse_text("scenario.n = 3\njust words\n", "my.conf")
    assert "my.conf:2" in str(err.value)


async def test_load_options():
    """A configuration file is read into raw strings."""
    options = await async_load_options(f"{INPUT_DIR}/test_config.conf")
    assert options[CONF_N] == "8"
    assert options["scenario.anchors"] == "0, 1, 2"
    assert options["channel.sigma2"] == "0"


async def test_load_options_missing_file():
    """A missing file is an I/O error."""
    with pytest.raises(OutputError):
        await async_load_options(f"{INPUT_DIR}/no_such_file.conf")


async def test_load_options_malformed_file():
    """A malformed file is a configuration error."""
    with pytest.raises(ConfigurationError):
        await async_load_options(f"{INPUT_DIR}/test_bad_config.conf")


async def test_load_options_non_utf8_file():
    """Files that are not UTF-8 are configuration errors."""
    with pytest.raises(ConfigurationError) as err:
        await async_load_options(f"{INPUT_DIR}/test_non_utf8.conf")
    assert "UTF-8" in str(err.value)


async def test_load_config_with_overrides():
    """Overrides win over the file; everything else falls back to defaults."""
    config = await async_load_config(f"{INPUT_DIR}/test_config.conf", {"run.seed": "99"})
    assert config.n == 8
    assert config.anchors == (0, 1, 2)
    assert config.channel.sigma2 == 0.0
    assert config.iterations == 40
    assert config.replicas == 2
    assert config.seed == 99
    assert config.q_ats == DEFAULT_OPTIONS[CONF_Q_ATS]


def test_defaults():
    """An empty option set is the default configuration."""
    config = ExperimentConfig.from_options({})
    assert config.n == 50
    assert config.anchors == (0, 1, 2, 3, 4, 5)
    assert config.schedule.a == 0.015
    assert config.schedule.beta == 0.7
    assert config.box.alpha == 2.0
    assert config.channel.eta == 2.44
    assert config.wall_time is False


def test_unknown_key():
    """Unknown keys are rejected by name."""
    with pytest.raises(ConfigurationError) as err:
        validate_options({"scenario.colour": "red"})
    assert "scenario.colour" in str(err.value)


@pytest.mark.parametrize(
    "key, value",
    [
        ("observation.q", "1.5"),
        ("observation.q", "0"),
        ("ats.q", "1"),
        ("schedule.beta", "0.4"),
        ("schedule.a", "-0.1"),
        ("box.alpha", "1"),
        ("scenario.n", "2"),
        ("scenario.p", "4"),
        ("scenario.anchors", "a, b"),
        ("algorithm", "simulated-annealing"),
        ("run.seed", "-1"),
        ("channel.t_samples", "0"),
        ("output.wall_time", "maybe"),
    ],
)
def test_invalid_values(key, value):
    """Out-of-range values are configuration errors naming the key."""
    with pytest.raises(ConfigurationError) as err:
        make_config(**{key.replace(".", "__"): value})
    assert key in str(err.value)


def test_boolean_and_lists():
    """Booleans and integer lists are coerced."""
    config = make_config(output__wall_time="yes", scenario__anchors=from_list([4, 2]))
    assert config.wall_time is True
    assert config.anchors == (4, 2)


def test_sweep_values():
    """Comma-separated probabilities multiply out in order."""
    pairs = sweep_values({CONF_Q_OBS: "0.6, 0.8", CONF_Q_ATS: "0.7,0.9"})
    assert pairs == [(0.6, 0.7), (0.6, 0.9), (0.8, 0.7), (0.8, 0.9)]
    assert sweep_values({}) == [(0.8, 0.85)]
    with pytest.raises(ConfigurationError):
        sweep_values({CONF_Q_OBS: "high"})


def test_with_probabilities():
    """Copies are revalidated."""
    config = make_config()
    other = config.with_probabilities(0.5, 0.6)
    assert (other.q_obs, other.q_ats) == (0.5, 0.6)
    assert other.n == config.n
    with pytest.raises(ConfigurationError):
        config.with_probabilities(0.5, 1.0)


def test_alignment_modes():
    """`auto` is Procrustes for relative runs and none for absolute ones."""
    assert make_config().alignment() == ALIGN_PROCRUSTES
    assert make_config(algorithm=ALGO_DOMLE).alignment() == ALIGN_NONE
    assert make_config(algorithm=ALGO_DOMDS_DOMLE).alignment(absolute=False) == ALIGN_PROCRUSTES
    assert make_config(eval__align=ALIGN_ANCHOR).alignment() == ALIGN_ANCHOR


def test_refines_flag():
    """Only the doMLE runs end in absolute coordinates."""
    assert not make_config(algorithm="batch-mds").refines
    assert make_config(algorithm=ALGO_DOMLE).refines
    assert not make_config().refines
