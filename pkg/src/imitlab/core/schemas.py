"""
Wire models for experiment configuration and campaign reports.

Non-finite reals are written as the strings "+inf", "-inf" and "nan" and
read back from the same strings, in JSON and CSV alike.
"""
import math
from enum import Enum
from pathlib import Path
from typing import Annotated, Any

from pydantic import BaseModel, BeforeValidator, Field, PlainSerializer, PositiveInt, field_serializer, field_validator


def format_extended(value: float) -> float | str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "+inf" if value > 0 else "-inf"
    return value


def parse_extended(value: Any) -> Any:
    if isinstance(value, str):
        text = value.strip().lower()
        if text in {"+inf", "inf", "infinity", "+infinity"}:
            return math.inf
        if text in {"-inf", "-infinity"}:
            return -math.inf
        if text == "nan":
            return math.nan
    return value


ExtendedFloat = Annotated[
    float,
    BeforeValidator(parse_extended),
    PlainSerializer(format_extended, return_type=float | str, when_used="json"),
]


class Campaign(str, Enum):
    BC_POLICY = "bc_policy"
    GAIL_POLICY = "gail_policy"
    ENV_BC = "env_bc"
    ENV_GAIL = "env_gail"
    BOUNDS_ALL = "bounds_all"
    WORSTCASE = "worstcase"
    PAC_COR1 = "pac_cor1"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


# ── Configuration ────────────────────────────────────────────

class MdpFamily(BaseModel):
    n_states: PositiveInt
    n_actions: PositiveInt
    gammas: list[float] = Field(default_factory=lambda: [0.9], min_length=1)
    dirichlet_alpha: float = Field(default=1.0, gt=0)
    reward_scale: float = Field(default=1.0, ge=0)

    @field_validator("gammas")
    @classmethod
    def _discounts_in_range(cls, value: list[float]) -> list[float]:
        for gamma in value:
            if not 0.0 <= gamma < 1.0:
                raise ValueError(f"gamma must satisfy 0 <= gamma < 1, got {gamma}")
        return value


class OutputSpec(BaseModel):
    path: Path
    format: OutputFormat = OutputFormat.CSV


class LearnerOptions(BaseModel):
    """Step counts and sizes for the iterative learners used by campaigns."""

    js_steps: PositiveInt = 2000
    js_step_size: float = Field(default=10.0, gt=0)
    env_steps: PositiveInt = 2000
    env_step_size: float = Field(default=20.0, gt=0)
    env_outer: PositiveInt = 20
    env_model_iters: PositiveInt = 5
    class_members: PositiveInt = 8
    rademacher_draws: PositiveInt = 2000


class ExperimentConfig(BaseModel):
    seed: int = Field(ge=0)
    mdp_family: MdpFamily
    campaign: Campaign
    trials: PositiveInt
    sample_sizes: list[PositiveInt] = Field(default_factory=lambda: [100], min_length=1)
    delta: float = 0.1
    output: OutputSpec
    learners: LearnerOptions = Field(default_factory=LearnerOptions)

    @field_validator("delta")
    @classmethod
    def _confidence_in_range(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError(f"delta must satisfy 0 < delta < 1, got {value}")
        return value


# ── Reports ──────────────────────────────────────────────────

REPORT_COLUMNS = (
    "campaign",
    "trial",
    "seed",
    "gamma",
    "bound_id",
    "lhs",
    "rhs",
    "slack",
    "holds",
    "m",
    "delta",
    "algorithm",
    "train_metric",
)


def extended_tree(value: Any) -> Any:
    """Apply format_extended to every float in a nested dict/list."""
    if isinstance(value, dict):
        return {key: extended_tree(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [extended_tree(item) for item in value]
    if isinstance(value, float):
        return format_extended(value)
    return value


class ReportRow(BaseModel):
    campaign: str
    trial: int
    seed: int
    gamma: float
    bound_id: str
    lhs: ExtendedFloat
    rhs: ExtendedFloat
    slack: ExtendedFloat
    holds: bool
    m: int | None = None
    delta: float | None = None
    algorithm: str = ""
    train_metric: ExtendedFloat | None = None
    inputs: dict[str, Any] = Field(default_factory=dict)

    @field_serializer("inputs", when_used="json")
    def _inputs_extended(self, value: dict[str, Any]) -> dict[str, Any]:
        return extended_tree(value)

    @field_validator("inputs", mode="before")
    @classmethod
    def _inputs_parsed(cls, value: Any) -> Any:
        if isinstance(value, dict):
            return {key: parse_extended(item) for key, item in value.items()}
        return value


class ProbabilisticTally(BaseModel):
    bound_id: str
    trials: int
    misses: int
    frequency: float
    allowed: float
    exceeded: bool


class CampaignAggregate(BaseModel):
    trials: int = 0
    reports: int = 0
    violations: int = 0
    deterministic_violations: int = 0
    vacuous: int = 0
    errors: int = 0
    max_abs_slack_on_failure: float = 0.0
    runtime_s: float = 0.0
    probabilistic: list[ProbabilisticTally] = Field(default_factory=list)

    @property
    def failed(self) -> bool:
        """True when a trial crashed or a bound verdict fails the campaign."""
        return (
            self.errors > 0
            or self.deterministic_violations > 0
            or any(t.exceeded for t in self.probabilistic)
        )


class CampaignReport(BaseModel):
    config: ExperimentConfig
    rows: list[ReportRow] = Field(default_factory=list)
    aggregate: CampaignAggregate = Field(default_factory=CampaignAggregate)
