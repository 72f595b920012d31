"""Configuration constants for dreammpc planners, models and training."""

# Checkpoint format
CHECKPOINT_MAGIC = b"DMPC"
CHECKPOINT_FORMAT_VERSION = 1
CHECKPOINT_SUFFIX = ".dmpc"

# Numerics
LAYERNORM_EPS = 1e-5
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Architecture (desk scale)
LATENT_DIM = 64
SIMNORM_DIM = 8
HIDDEN_DIM = 128
ENCODER_DIM = 128
NUM_Q = 5
Q_DROPOUT = 0.01
LOG_STD_MIN = -10.0
LOG_STD_MAX = 2.0
DISCOUNT = 0.99

# Optimisation
LEARNING_RATE = 3e-4
ENCODER_LEARNING_RATE = 1e-4
GRAD_CLIP_NORM = 20.0
CONSISTENCY_COEF = 20.0
REWARD_COEF = 0.1
VALUE_COEF = 0.1
TEMPORAL_COEF = 0.5
TARGET_MOMENTUM = 0.99
ENTROPY_COEF = 1e-4
POLICY_SCALE_PERCENTILES = (5.0, 95.0)
POLICY_SCALE_MOMENTUM = 0.99

# Dream-MPC planner
HORIZON = 3
ITERATIONS = 1
NUM_CANDIDATES = 5
STEP_SIZE = 0.1
REUSE_COEF = 0.1
UNCERTAINTY_COEF = 0.01
PERTURB_STD = 0.05
PROPOSAL_STD = 1.0

# MPPI planner
MPPI_POPULATION = 512
MPPI_POLICY_SAMPLES = 24
MPPI_ELITES = 64
MPPI_TEMPERATURE = 0.5
MPPI_STD_MIN = 0.05
MPPI_STD_MAX = 2.0
MPPI_ITERATIONS = 6

# Environments
ACTION_REPEAT = 2
PENDULUM_EPISODE_LENGTH = 200
CARTPOLE_EPISODE_LENGTH = 250

# Training (desk scale)
TOTAL_STEPS = 30_000
SEED_STEPS = 1_000
BATCH_SIZE = 128
BUFFER_CAPACITY = 50_000
UPDATE_TO_DATA_RATIO = 1.0
EVAL_INTERVAL = 2_500
EVAL_EPISODES = 10
NON_FINITE_STREAK_LIMIT = 10

# Analysis
GRADIENT_SAMPLES_PER_CELL = 64
DEFAULT_STUDY_HORIZONS = (1, 5, 10, 20, 30)
TIMING_WARMUP_STEPS = 1

# Run directory layout
RUNS_DIRECTORY = "runs"
MANIFEST_FILENAME = "manifest.json"
CONFIG_SNAPSHOT_FILENAME = "config.ini"
METRICS_FILENAME = "metrics.csv"
EVAL_FILENAME = "eval.csv"
TIMING_FILENAME = "timing.csv"
CHECKPOINT_DIRECTORY = "checkpoints"

# Validation limits
MAX_PATH_LENGTH = 4096
MAX_CONFIG_FILE_SIZE = 100000
MAX_WORKERS_LIMIT = 32
