from enum import Enum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator


class Verdict(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    NOT_AVAILABLE = "NOT_AVAILABLE"


class CheckEvaluation(BaseModel):
    """Outcome of one named check, with the tightest slack observed."""
    name: str
    verdict: Verdict
    evaluation: str
    worst_slack: float | None = None
    samples: int = 0


class ProblemKind(str, Enum):
    QUADRATIC = "quadratic"
    LOG_SUM_EXP = "log_sum_exp"


class ScheduleKind(str, Enum):
    BFGS = "bfgs"
    DFP = "dfp"
    CONSTANT = "constant"
    SEQUENCE = "sequence"


class EnvelopeName(str, Enum):
    QUAD_LINEAR = "quad_linear"
    QUAD_SUPERLINEAR = "quad_superlinear"
    QUAD_SUPERLINEAR_PSI = "quad_superlinear_psi"
    QUAD_SHARPENED = "quad_sharpened"
    GENERAL_LINEAR = "general_linear"
    GENERAL_SUPERLINEAR = "general_superlinear"


QUADRATIC_ONLY_ENVELOPES = frozenset({
    EnvelopeName.QUAD_LINEAR,
    EnvelopeName.QUAD_SUPERLINEAR,
    EnvelopeName.QUAD_SUPERLINEAR_PSI,
    EnvelopeName.QUAD_SHARPENED,
})

# Matches the tolerance QuadraticProblem allows on its relative spectrum.
SPECTRUM_RTOL = 1e-10


class InstanceSpec(BaseModel):
    """JSON definition of a problem instance (reproducible from its seed)."""
    model_config = ConfigDict(extra="forbid")

    kind: ProblemKind
    n: int = Field(..., ge=1, description="Dimension of the primal space")
    mu: float = Field(..., gt=0, description="Strong convexity constant relative to B")
    ell: float | None = Field(None, gt=0, description="Quadratic only: certified L; defaults to max(spectrum)")
    spectrum: list[float] | None = Field(None, description="Quadratic only: eigenvalues of A relative to B")
    b: list[float] | None = Field(
        None,
        description="Quadratic: linear term (n entries). Log-sum-exp: shifts b_i (m entries). Seeded random if omitted",
    )
    m: int | None = Field(None, ge=1, description="Log-sum-exp only: number of exponential terms")
    a_rows: list[list[float]] | None = Field(None, description="Log-sum-exp only: the m dual vectors a_i")
    gamma: float | None = Field(None, gt=0, description="Log-sum-exp only: max dual norm of the a_i")
    b_ref: list[list[float]] | None = Field(None, description="Reference operator B; identity if omitted")
    seed: int | None = Field(None, description="Generator seed; the experiment seed is used if omitted")

    @model_validator(mode="after")
    def _check_shape(self) -> "InstanceSpec":
        if self.b_ref is not None:
            if len(self.b_ref) != self.n or any(len(row) != self.n for row in self.b_ref):
                raise ValueError("b_ref must be an n x n matrix")
        if self.kind is ProblemKind.QUADRATIC:
            if self.spectrum is None and self.ell is None:
                raise ValueError("quadratic instance needs a spectrum or ell")
            if self.spectrum is not None:
                if len(self.spectrum) != self.n:
                    raise ValueError("spectrum must have n entries")
                if min(self.spectrum) <= 0:
                    raise ValueError("spectrum entries must be positive")
                if min(self.spectrum) < self.mu * (1 - SPECTRUM_RTOL):
                    raise ValueError("mu must not exceed the smallest spectrum entry")
                if self.ell is not None and max(self.spectrum) > self.ell * (1 + SPECTRUM_RTOL):
                    raise ValueError("ell must not be below the largest spectrum entry")
            if self.ell is not None and self.ell < self.mu:
                raise ValueError("ell must be at least mu")
            if self.b is not None and len(self.b) != self.n:
                raise ValueError("quadratic b must have n entries")
        else:
            if self.a_rows is None and (self.m is None or self.gamma is None):
                raise ValueError("log-sum-exp instance needs a_rows, or m and gamma")
            if self.a_rows is not None:
                if self.m is not None and len(self.a_rows) != self.m:
                    raise ValueError("a_rows must have m rows")
                if any(len(row) != self.n for row in self.a_rows):
                    raise ValueError("each a_i must have n entries")
            rows = len(self.a_rows) if self.a_rows is not None else self.m
            if self.b is not None and len(self.b) != rows:
                raise ValueError("log-sum-exp b must have m entries")
        return self


class ScheduleSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: ScheduleKind
    tau: float | None = Field(None, ge=0.0, le=1.0, description="Constant schedule only")
    taus: list[float] | None = Field(None, description="Sequence schedule only; the last entry repeats")

    @model_validator(mode="after")
    def _check_kind(self) -> "ScheduleSpec":
        if self.kind is ScheduleKind.CONSTANT and self.tau is None:
            raise ValueError("constant schedule needs tau")
        if self.kind is ScheduleKind.SEQUENCE:
            if not self.taus:
                raise ValueError("sequence schedule needs a nonempty taus list")
            if any(not 0.0 <= t <= 1.0 for t in self.taus):
                raise ValueError("every tau must lie in [0, 1]")
        return self


class StartSpec(BaseModel):
    """How x0 is chosen."""
    model_config = ConfigDict(extra="forbid")

    mode: Literal["explicit", "ball", "region"] = "ball"
    coords: list[float] | None = None
    radius: float = Field(1.0, gt=0, description="Ball mode: radius of the seeded random ball")
    center: Literal["origin", "minimizer"] = "origin"
    region_fraction: float | None = Field(
        None, gt=0, le=1, description="Region mode: M * lambda_0 as a fraction of the region radius",
    )

    @model_validator(mode="after")
    def _check_mode(self) -> "StartSpec":
        if self.mode == "explicit" and self.coords is None:
            raise ValueError("explicit start needs coords")
        if self.mode == "region" and self.region_fraction is None:
            raise ValueError("region start needs region_fraction")
        return self


class SolverConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    max_iter: int = Field(500, ge=1)
    grad_tol: float = Field(1e-12, ge=0, description="Stop when lambda_k <= grad_tol")
    quad_order: int = Field(16, ge=2, description="Gauss-Legendre nodes for the integral Hessian")
    quad_rel_tol: float = Field(1e-9, gt=0, description="Admissible quadrature error relative to ||J||")
    record_operators: bool = Field(False, description="Keep G_k, G_k^-1 and J_k snapshots in the trace")
    compute_lambda: bool = Field(True, description="Evaluate lambda_k (needs the true Hessian)")


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    instance: InstanceSpec
    method: ScheduleSpec
    x0: StartSpec = Field(default_factory=StartSpec)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    envelopes: list[EnvelopeName] = Field(
        default_factory=list, description="Envelopes to check; a kind-specific default set if empty",
    )
    output_dir: str | None = None
    seed: int = 0
    envelope_mu_scale: float = Field(
        1.0, gt=0, description="Multiplies the mu seen by the envelopes (negative controls)",
    )

    @model_validator(mode="after")
    def _check_envelopes(self) -> "ExperimentConfig":
        if self.instance.kind is ProblemKind.LOG_SUM_EXP:
            bad = [e.value for e in self.envelopes if e in QUADRATIC_ONLY_ENVELOPES]
            if bad:
                raise ValueError(f"envelopes {bad} only apply to quadratic instances")
        if self.x0.mode == "explicit" and len(self.x0.coords or []) != self.instance.n:
            raise ValueError("x0 coords must have n entries")
        return self


class EnvelopeSummary(BaseModel):
    name: str
    enforced: bool
    first_violation: int | None = None
    min_slack: float | None = None
    k0: int | None = None
    region_radius: float | None = None


class ExperimentResult(BaseModel):
    name: str
    passed: bool
    iterations: int = 0
    converged: bool = False
    diverged: bool = False
    first_violation: int | None = None
    min_slack: float | None = None
    wall_time: float = 0.0
    message: str = ""
    files: list[str] = Field(default_factory=list)
    envelopes: list[EnvelopeSummary] = Field(default_factory=list)
    checks: list[CheckEvaluation] = Field(default_factory=list)


class SuiteResult(BaseModel):
    experiments: list[ExperimentResult]

    @computed_field
    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.experiments)


class VerifyRequest(BaseModel):
    """Input schema for the randomized identity and lemma suites"""
    n_max: int = Field(8, ge=1, description="Largest dimension sampled")
    trials: int = Field(1000, ge=1, description="Random instances per suite")
    seed: int = Field(0, description="Base seed; every suite derives its own stream")


class VerificationReport(BaseModel):
    evaluations: dict[str, CheckEvaluation]
    global_evaluation: CheckEvaluation


class SweepGrid(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dims: list[int] = Field(..., min_length=1)
    condition_numbers: list[float] = Field(..., min_length=1)
    methods: list[Literal["bfgs", "dfp"]] = Field(..., min_length=1)
    seed: int = 0
    tol: float = Field(1e-10, gt=0)
    max_iter: int = Field(5000, ge=1)

    @model_validator(mode="after")
    def _check_values(self) -> "SweepGrid":
        if any(n < 1 for n in self.dims):
            raise ValueError("dims must be positive")
        if any(c < 1 for c in self.condition_numbers):
            raise ValueError("condition numbers must be at least 1")
        return self


class SweepRow(BaseModel):
    n: int
    L_over_mu: float
    method: str
    iters_to_tol: int | None
    K0_new: float
    K0_prev: float
    first_k_superlinear_env_below_linear_env: int | None
    passed: bool


class K0Request(BaseModel):
    n: int = Field(..., ge=1)
    mu: float = Field(..., gt=0)
    ell: float = Field(..., gt=0)
    sup_tau: float = Field(0.0, ge=0.0, le=1.0)
    m_const: float = Field(0.0, ge=0.0, description="Strong self-concordance constant M")
