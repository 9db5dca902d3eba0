"""Definition of constants."""

import math

VERSION = "0.3.0"

PACKAGE_NAME = "wsnloc"

# reference distance of the path-loss model, meters
REFERENCE_DISTANCE = 1.0

# distances are floored here inside log-distance terms, meters
DEFAULT_D_MIN = 1e-3

# eigensolver symmetry tolerance (absolute, relative to max |m|)
SYMMETRY_TOLERANCE = 1e-9

# random sub-stream purposes, used as a counter word of the Philox key space
STREAM_SCENARIO = 0
STREAM_INIT = 1
STREAM_OBSERVATION = 2
STREAM_ATS = 3
STREAM_ATS_SECOND = 4
STREAM_ATS_DELTA = 5
STREAM_GOSSIP = 6
STREAM_RSSI = 7

# process exit codes
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_IO = 4

LAYOUT_UNIFORM = "uniform"
LAYOUT_GRID = "grid"
LAYOUT_EXPLICIT = "explicit"
LAYOUTS = [LAYOUT_UNIFORM, LAYOUT_GRID, LAYOUT_EXPLICIT]

ALGO_BATCH_MDS = "batch-mds"
ALGO_OJA = "oja"
ALGO_DOMDS = "domds"
ALGO_DOMLE = "domle"
ALGO_DOMDS_DOMLE = "domds+domle"
ALGORITHMS = [ALGO_BATCH_MDS, ALGO_OJA, ALGO_DOMDS, ALGO_DOMLE, ALGO_DOMDS_DOMLE]

VARIANT_LITERAL = "literal"
VARIANT_DECOUPLED = "decoupled"
VARIANTS = [VARIANT_LITERAL, VARIANT_DECOUPLED]

READOUT_AXES = "axes"
READOUT_DIAGONAL = "diagonal"
READOUTS = [READOUT_AXES, READOUT_DIAGONAL]

ALIGN_AUTO = "auto"
ALIGN_NONE = "none"
ALIGN_PROCRUSTES = "procrustes"
ALIGN_ANCHOR = "anchor"
ALIGN_MODES = [ALIGN_AUTO, ALIGN_NONE, ALIGN_PROCRUSTES, ALIGN_ANCHOR]

CONF_LAYOUT = "scenario.layout"
CONF_N = "scenario.n"
CONF_P = "scenario.p"
CONF_WIDTH = "scenario.width"
CONF_HEIGHT = "scenario.height"
CONF_DEPTH = "scenario.depth"
CONF_ROWS = "scenario.rows"
CONF_COLS = "scenario.cols"
CONF_ANCHORS = "scenario.anchors"
CONF_POSITIONS = "scenario.positions"
CONF_RADIUS = "scenario.radius"
CONF_PL0 = "channel.pl0"
CONF_ETA = "channel.eta"
CONF_SIGMA2 = "channel.sigma2"
CONF_T_SAMPLES = "channel.t_samples"
CONF_Q_OBS = "observation.q"
CONF_Q_MATRIX = "observation.q_matrix"
CONF_Q_ATS = "ats.q"
CONF_ALGORITHM = "algorithm"
CONF_STEP_A = "schedule.a"
CONF_STEP_BETA = "schedule.beta"
CONF_ALPHA = "box.alpha"
CONF_ITERATIONS = "run.iterations"
CONF_REPLICAS = "run.replicas"
CONF_SEED = "run.seed"
CONF_WORKERS = "run.workers"
CONF_VARIANT = "domds.variant"
CONF_READOUT = "domds.readout"
CONF_MLE_A = "domle.a"
CONF_MLE_BETA = "domle.beta"
CONF_MLE_ITERATIONS = "domle.iterations"
CONF_D_MIN = "domle.d_min"
CONF_ALIGN = "eval.align"
CONF_WALL_TIME = "output.wall_time"

# simulated-data preset keeps the sigma/eta = 1.7 ratio at the testbed eta
SIMULATED_ETA = 2.44
SIMULATED_SIGMA2 = (1.7 * SIMULATED_ETA) ** 2

DEFAULT_OPTIONS = {
    CONF_LAYOUT: LAYOUT_UNIFORM,
    CONF_N: 50,
    CONF_P: 2,
    CONF_WIDTH: 5.0,
    CONF_HEIGHT: 9.0,
    CONF_DEPTH: 3.0,
    CONF_ROWS: 0,
    CONF_COLS: 0,
    CONF_ANCHORS: "0, 1, 2, 3, 4, 5",
    CONF_POSITIONS: "",
    CONF_RADIUS: math.inf,
    CONF_PL0: -61.71,
    CONF_ETA: SIMULATED_ETA,
    CONF_SIGMA2: SIMULATED_SIGMA2,
    CONF_T_SAMPLES: 1,
    CONF_Q_OBS: 0.8,
    CONF_Q_MATRIX: "",
    CONF_Q_ATS: 0.85,
    CONF_ALGORITHM: ALGO_DOMDS,
    CONF_STEP_A: 0.015,
    CONF_STEP_BETA: 0.7,
    CONF_ALPHA: 2.0,
    CONF_ITERATIONS: 10000,
    CONF_REPLICAS: 1,
    CONF_SEED: 0,
    CONF_WORKERS: 4,
    CONF_VARIANT: VARIANT_LITERAL,
    CONF_READOUT: READOUT_AXES,
    CONF_MLE_A: 0.05,
    CONF_MLE_BETA: 0.7,
    CONF_MLE_ITERATIONS: 5000,
    CONF_D_MIN: DEFAULT_D_MIN,
    CONF_ALIGN: ALIGN_AUTO,
    CONF_WALL_TIME: False,
}

# output files
RMSE_FILENAME = "rmse_{algorithm}.csv"
MEAN_FILENAME = "rmse_mean.csv"
POSITIONS_FILENAME = "positions_final.csv"
REFINEMENT_FILENAME = "refinement_summary.csv"
SWEEP_FILENAME = "sweep.csv"
SCENARIO_FILENAME = "scenario.csv"

RMSE_HEADER = ["replica", "tick", "broadcasts", "rmse_m", "wall_ms"]
MEAN_HEADER = ["tick", "broadcasts", "rmse_m"]
SWEEP_HEADER = ["q_obs", "q_ats", "tick", "broadcasts", "rmse_m"]
REFINEMENT_HEADER = [
    "rmse_before_m",
    "rmse_after_m",
    "improvement_pct",
    "positions_improved_pct",
]
COORD_COLUMNS = ["x_m", "y_m", "z_m"]

SIGNIFICANT_DIGITS = 9

# first checkpoint tick; later ones double until the last iteration
FIRST_CHECKPOINT = 10

# exhaustive ATS enumeration is limited to this many nodes in diagnostics
MAX_ENUMERATION_NODES = 8
