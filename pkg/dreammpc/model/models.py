"""Data models for dreammpc configuration, diagnostics and reports."""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from dreammpc.config import constants as C

# ===== ENUMS FOR STRICT VALIDATION =====


class ErrorType(str, Enum):
    """
    Structured error types with clear categorization.

    Categories:
    - Configuration issues (exit code 2): bad config files, bad arguments, run dir conflicts
    - Numerical issues (exit code 3): non-finite values, aborted training
    - Everything else: internal failures
    """

    # --- Configuration Errors ---
    CONFIG_ERROR = "config_error"
    VALIDATION_ERROR = "validation_error"
    RUN_DIR_CONFLICT = "run_dir_conflict"
    CHECKPOINT_ERROR = "checkpoint_error"

    # --- Numerical Errors ---
    DIMENSION_MISMATCH = "dimension_mismatch"
    NON_FINITE = "non_finite"
    NUMERICAL_ABORT = "numerical_abort"

    # --- Internal ---
    TAPE_CONSUMED = "tape_consumed"
    INTERNAL_ERROR = "internal_error"

    @classmethod
    def is_config_error(cls, error_type: "ErrorType") -> bool:
        """Check if error type is caused by user-supplied configuration."""
        return error_type in {
            cls.CONFIG_ERROR,
            cls.VALIDATION_ERROR,
            cls.RUN_DIR_CONFLICT,
            cls.CHECKPOINT_ERROR,
        }

    @classmethod
    def is_numerical_error(cls, error_type: "ErrorType") -> bool:
        """Check if error type represents a numerical failure."""
        return error_type in {cls.NON_FINITE, cls.NUMERICAL_ABORT}


class PlannerKind(str, Enum):
    """Action selection strategies."""

    POLICY = "policy"
    MPPI = "mppi"
    DREAM_MPC = "dream_mpc"


class ProposalKind(str, Enum):
    """Initial candidate distribution of the gradient planner."""

    POLICY = "policy"
    GAUSSIAN = "gaussian"


class EnvName(str, Enum):
    """Available analytic environments."""

    PENDULUM_SWINGUP = "pendulum_swingup"
    CARTPOLE_SWINGUP = "cartpole_swingup"
    CARTPOLE_SWINGUP_SPARSE = "cartpole_swingup_sparse"


class StudyKind(str, Enum):
    """Diagnostic studies exposed by the CLI."""

    GRADIENTS = "gradients"
    VALUE = "value"
    EXPLOITATION = "exploitation"
    TIMING = "timing"


class GradientSource(str, Enum):
    """Dynamics used when differentiating the return."""

    GROUND_TRUTH = "ground_truth"
    LEARNED_MODEL = "learned_model"


class GradientPlanner(str, Enum):
    """Initial candidate scheme used by the gradient study."""

    GRAD_MPC_GAUSSIAN = "grad_mpc_gaussian"
    DREAM_MPC = "dream_mpc"


# ===== CONFIGURATION MODELS =====


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class MPPIConfig(_Section):
    """Sampling planner knobs."""

    population: int = Field(default=C.MPPI_POPULATION, ge=1, description="Sequences per iteration")
    policy_samples: int = Field(
        default=C.MPPI_POLICY_SAMPLES, ge=0, description="Policy rollouts mixed into the population"
    )
    elites: int = Field(default=C.MPPI_ELITES, ge=1, description="Top sequences used for the refit")
    temperature: float = Field(default=C.MPPI_TEMPERATURE, gt=0, description="Softmax temperature")
    std_min: float = Field(default=C.MPPI_STD_MIN, gt=0, description="Lower bound of sampling std")
    std_max: float = Field(default=C.MPPI_STD_MAX, gt=0, description="Upper bound of sampling std")
    iterations: int = Field(default=C.MPPI_ITERATIONS, ge=1, description="Refit iterations")
    use_uncertainty: bool = Field(
        default=False, description="Include the ensemble uncertainty penalty in scores"
    )

    @model_validator(mode="after")
    def validate_bounds(self):
        if self.elites > self.population:
            raise ValueError("elites must not exceed population")
        if self.policy_samples > self.population:
            raise ValueError("policy_samples must not exceed population")
        if self.std_min > self.std_max:
            raise ValueError("std_min must not exceed std_max")
        return self


class PlannerConfig(_Section):
    """Knobs of the gradient planner; MPPI knobs live in ``mppi``."""

    horizon: int = Field(default=C.HORIZON, ge=1, description="Planning horizon H")
    iterations: int = Field(default=C.ITERATIONS, ge=0, description="Gradient iterations I")
    num_candidates: int = Field(default=C.NUM_CANDIDATES, ge=1, description="Candidates N")
    step_size: float = Field(default=C.STEP_SIZE, ge=0, description="Action step size alpha")
    reuse_coef: float = Field(default=C.REUSE_COEF, ge=0, le=1, description="Action reuse rho")
    uncertainty_coef: float = Field(
        default=C.UNCERTAINTY_COEF, ge=0, description="Uncertainty coefficient lambda_unc"
    )
    perturb_std: float = Field(
        default=C.PERTURB_STD, ge=0, description="Noise added to deterministic-policy candidates"
    )
    stochastic_candidates: bool = Field(
        default=True, description="Sample candidates from the stochastic policy"
    )
    proposal: ProposalKind = Field(default=ProposalKind.POLICY, description="Candidate source")
    proposal_std: float = Field(
        default=C.PROPOSAL_STD, gt=0, description="Std of the Gaussian candidate proposal"
    )
    uncertainty_abs_mean: bool = Field(
        default=False, description="Scale the ensemble std by |mean| instead of mean"
    )
    uncertainty_stop_grad: bool = Field(
        default=False, description="Exclude the uncertainty term from the action gradient"
    )
    use_target_q: bool = Field(default=False, description="Query target Q networks when planning")
    mppi: MPPIConfig = Field(default_factory=MPPIConfig)


class ModelConfig(_Section):
    """World model architecture."""

    latent_dim: int = Field(default=C.LATENT_DIM, ge=1)
    simnorm_dim: int = Field(default=C.SIMNORM_DIM, ge=1)
    hidden_dim: int = Field(default=C.HIDDEN_DIM, ge=1)
    encoder_dim: int = Field(default=C.ENCODER_DIM, ge=1)
    num_q: int = Field(default=C.NUM_Q, ge=2, description="Q ensemble size M")
    q_dropout: float = Field(default=C.Q_DROPOUT, ge=0, lt=1)
    log_std_min: float = Field(default=C.LOG_STD_MIN)
    log_std_max: float = Field(default=C.LOG_STD_MAX)
    discount: float = Field(default=C.DISCOUNT, gt=0, lt=1, description="gamma")

    @model_validator(mode="after")
    def validate_dims(self):
        if self.latent_dim % self.simnorm_dim != 0:
            raise ValueError("latent_dim must be divisible by simnorm_dim")
        if self.log_std_min >= self.log_std_max:
            raise ValueError("log_std_min must be below log_std_max")
        return self


class EnvConfig(_Section):
    """Environment selection."""

    name: EnvName = Field(default=EnvName.PENDULUM_SWINGUP)
    action_repeat: int = Field(default=C.ACTION_REPEAT, ge=1)
    episode_length: int | None = Field(
        default=None, ge=1, description="Decision steps per episode; None uses the env default"
    )


class TrainConfig(_Section):
    """Online training loop knobs."""

    total_steps: int = Field(default=C.TOTAL_STEPS, ge=0, description="Environment decision steps")
    seed_steps: int = Field(default=C.SEED_STEPS, ge=0, description="Uniform-random steps")
    update_to_data_ratio: float = Field(default=C.UPDATE_TO_DATA_RATIO, ge=0)
    batch_size: int = Field(default=C.BATCH_SIZE, ge=1)
    buffer_capacity: int = Field(default=C.BUFFER_CAPACITY, ge=1)
    train_horizon: int = Field(default=C.HORIZON, ge=1, description="Sequence length minus one")
    planner: PlannerKind = Field(default=PlannerKind.DREAM_MPC)
    learning_rate: float = Field(default=C.LEARNING_RATE, gt=0)
    encoder_learning_rate: float = Field(default=C.ENCODER_LEARNING_RATE, gt=0)
    grad_clip_norm: float = Field(default=C.GRAD_CLIP_NORM, gt=0)
    consistency_coef: float = Field(default=C.CONSISTENCY_COEF, ge=0)
    reward_coef: float = Field(default=C.REWARD_COEF, ge=0)
    value_coef: float = Field(default=C.VALUE_COEF, ge=0)
    temporal_coef: float = Field(default=C.TEMPORAL_COEF, ge=0, le=1)
    target_momentum: float = Field(default=C.TARGET_MOMENTUM, ge=0, le=1)
    entropy_coef: float = Field(default=C.ENTROPY_COEF, ge=0)
    eval_interval: int = Field(default=C.EVAL_INTERVAL, ge=0, description="0 disables")
    eval_episodes: int = Field(default=C.EVAL_EPISODES, ge=0)
    non_finite_streak_limit: int = Field(default=C.NON_FINITE_STREAK_LIMIT, ge=1)

    @model_validator(mode="after")
    def validate_seed_steps(self):
        # Seed phase must yield at least one full training sequence.
        if self.total_steps > self.seed_steps and self.seed_steps < self.train_horizon:
            raise ValueError("seed_steps must be at least train_horizon")
        return self


class EvalConfig(_Section):
    """Evaluation defaults."""

    episodes: int = Field(default=C.EVAL_EPISODES, ge=0)
    seed: int = Field(default=0, ge=0)
    planner: PlannerKind = Field(default=PlannerKind.DREAM_MPC)


class RunSection(_Section):
    """Run identity."""

    name: str = Field(default="run", min_length=1)
    seed: int = Field(default=0, ge=0)
    runs_dir: str = Field(default=C.RUNS_DIRECTORY, min_length=1)

    @field_validator("name")
    @classmethod
    def validate_name(cls, v: str) -> str:
        if "/" in v or "\\" in v or v in {".", ".."} or "\0" in v:
            raise ValueError("run name must be a plain directory name")
        return v


# ===== DIAGNOSTICS AND REPORTS =====


class LossReport(BaseModel):
    """Result of one world model update."""

    consistency: float = Field(description="Weighted latent consistency loss")
    reward: float = Field(description="Weighted reward loss")
    value: float = Field(description="Weighted value loss")
    total: float = Field(description="Coefficient-weighted total")
    grad_norm: float = Field(default=0.0, description="Global gradient norm before clipping")
    applied: bool = Field(default=True, description="False when the update was skipped")


class PolicyLossReport(BaseModel):
    """Result of one policy update."""

    loss: float = Field(description="Minimised policy objective")
    q_term: float = Field(description="Mean normalised Q at sampled actions")
    entropy: float = Field(description="Mean policy entropy estimate")
    scale: float = Field(description="Percentile span used for Q normalisation")
    grad_norm: float = Field(default=0.0)
    applied: bool = Field(default=True)


class PlanDiagnostics(BaseModel):
    """Per-step planner diagnostics."""

    planner: PlannerKind
    chosen_index: int = Field(default=0, ge=0)
    chosen_objective: float = Field(default=float("nan"))
    initial_objectives: list[float] = Field(default_factory=list)
    final_objectives: list[float] = Field(default_factory=list)
    candidate_dynamics_evals: int = Field(default=0, ge=0)
    optimization_dynamics_evals: int = Field(default=0, ge=0)
    rescoring_dynamics_evals: int = Field(default=0, ge=0)
    reward_evals: int = Field(default=0, ge=0)
    q_evals: int = Field(default=0, ge=0)
    policy_evals: int = Field(default=0, ge=0)
    grad_norm_mean: float = Field(default=0.0)
    grad_norm_max: float = Field(default=0.0)
    nonfinite_candidates: int = Field(default=0, ge=0)
    fallback: bool = Field(default=False, description="Planner fell back to the policy action")

    @property
    def total_dynamics_evals(self) -> int:
        return (
            self.candidate_dynamics_evals
            + self.optimization_dynamics_evals
            + self.rescoring_dynamics_evals
        )


class EvaluationReport(BaseModel):
    """Aggregate of deterministic evaluation episodes."""

    planner: PlannerKind
    seed: int
    episodes: int = Field(ge=0)
    mean_return: float
    std_return: float
    returns: list[float]
    mean_plan_ms: float
    std_plan_ms: float


class TimingEntry(BaseModel):
    """Per-planner planning latency."""

    planner: PlannerKind
    mean_ms: float
    std_ms: float
    steps: int = Field(ge=0)
    episodes: int = Field(ge=0)


class TimingReport(BaseModel):
    """Planning latency of several planners on one model."""

    entries: list[TimingEntry] = Field(default_factory=list)


class RunManifest(BaseModel):
    """Everything needed to reproduce a CLI invocation."""

    run_name: str = Field(min_length=1)
    command: str = Field(description="Subcommand that produced the directory")
    config_snapshot: str = Field(description="Rendered configuration, byte-stable")
    artifacts: dict[str, str] = Field(default_factory=dict, description="Artifact -> path")
    tool_version: str
    seed: int
    status: str = Field(default="created", description="created, completed or aborted")


class RunRecord(BaseModel):
    """One decision step of the training loop, one row of metrics.csv."""

    step: int
    episode: int
    episode_step: int
    phase: str
    reward: float
    episode_return: float = float("nan")
    updates: int = 0
    consistency_loss: float = float("nan")
    reward_loss: float = float("nan")
    value_loss: float = float("nan")
    total_loss: float = float("nan")
    policy_loss: float = float("nan")
    model_grad_norm: float = float("nan")
    policy_grad_norm: float = float("nan")
    plan_objective: float = float("nan")
    candidate_dynamics_evals: int = 0
    optimization_dynamics_evals: int = 0
    rescoring_dynamics_evals: int = 0
    q_evals: int = 0
    policy_evals: int = 0
    plan_grad_norm_mean: float = float("nan")
    planner_fallback: bool = False


# ===== ANALYSIS STUDIES =====


class GradientCell(BaseModel):
    """Gradient statistics of one (horizon, seed) cell."""

    horizon: int = Field(ge=1)
    seed: int
    samples: int = Field(ge=2, description="Gradient samples behind the statistics")
    mean: list[float] = Field(description="Per-coordinate mean of the action gradient")
    variance: list[float] = Field(description="Per-coordinate sample variance (ddof=1)")
    signal: float = Field(description="Sum of squared means")
    noise: float = Field(description="Sum of variances")
    esnr: float = Field(description="signal / noise; inf for zero noise, nan for 0/0")


class GradientStudy(BaseModel):
    """Planner gradient quality across horizons."""

    env: str
    source: GradientSource
    planner: GradientPlanner
    cells: list[GradientCell] = Field(default_factory=list)


class ValueEpisode(BaseModel):
    """Value estimate against the realised discounted return of one episode."""

    episode: int
    episode_return: float = Field(description="Discounted return G of the episode")
    estimate: float = Field(description="Ensemble value at the first state and action")
    abs_error: float
    q_std: float = Field(description="Episode mean of the per-step ensemble std")
    error_bin: int = Field(default=-1, description="Quartile of abs_error, 0-3")


class ValueStudy(BaseModel):
    """Per-episode value errors and their rank correlations."""

    planner: PlannerKind
    episodes: list[ValueEpisode] = Field(default_factory=list)
    spearman_std_return: float | None = Field(default=None, description="None when undefined")
    spearman_error_return: float | None = None
    spearman_std_error: float | None = None


class ExploitationStep(BaseModel):
    """Predicted against realised H-step return of the chosen plan."""

    episode: int
    step: int
    predicted: float
    realized: float
    gap: float = Field(description="predicted - realized")


class ExploitationStudy(BaseModel):
    planner: PlannerKind
    horizon: int
    steps: list[ExploitationStep] = Field(default_factory=list)
    mean_gap: float = float("nan")
