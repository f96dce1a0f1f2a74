"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field, model_validator


class DistributionModel(BaseModel):
    """Finite distribution of one outcome coordinate."""

    support: list[float]
    probs: list[float]

    @model_validator(mode="after")
    def _lengths_match(self):
        if len(self.support) != len(self.probs):
            raise ValueError("support and probs must have equal length")
        return self


class ArmModel(BaseModel):
    reward: DistributionModel
    drifts: list[DistributionModel]


class InstanceModel(BaseModel):
    T: int = Field(ge=1)
    B: float = Field(ge=0)
    arms: list[ArmModel]


class BwkArmModel(BaseModel):
    reward: DistributionModel
    consumptions: list[DistributionModel]


class BwkInstanceModel(BaseModel):
    T: int = Field(ge=1)
    B: float = Field(ge=0)
    delta_drift: float = Field(gt=0)
    arms: list[BwkArmModel]


class InstanceSource(BaseModel):
    """Either a fixture id or an inline instance; exactly one must be set."""

    fixture: str | None = None
    instance: InstanceModel | None = None

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.fixture is None) == (self.instance is None):
            raise ValueError("provide exactly one of 'fixture' or 'instance'")
        return self


class SolveRequest(InstanceSource):
    horizon: int | None = Field(default=None, ge=1)
    include_constants: bool = True
    c: float | None = None


class ConstantsModel(BaseModel):
    delta_drift: float
    sigma_min: float
    delta_support: float
    delta_slack: float | None  # None encodes +inf (every resource binding)
    gamma_star: float
    gap: float | None
    c: float


class SolveResponse(BaseModel):
    value: float
    probabilities: list[float]
    support: list[int]
    binding: list[int]
    degenerate: bool
    gap: float | None = None
    constants: ConstantsModel | None = None
    assumption_violations: list[str] = []


class PolicyParams(BaseModel):
    c: float | None = None
    gamma_star: float | None = None
    phase1_min_pulls: int | None = Field(default=None, ge=1)


class EpisodeRequest(InstanceSource):
    policy: str
    seed: int = 0
    master_seed: int = 0
    horizon: int | None = Field(default=None, ge=1)
    params: PolicyParams = PolicyParams()


class EpisodeModel(BaseModel):
    T: int
    seed: int | str
    policy: str
    total_reward: float
    opt_lp: float
    regret: float
    null_pulls: float | None
    leftover_budgets: list[float | None]
    phase1_end: float | None = None
    phase2_end: float | None = None
    phase3_infeasible: float | None = None


class SweepRequest(InstanceSource):
    policy: str
    horizons: list[int]
    seeds: list[int]
    master_seed: int = 0
    params: PolicyParams = PolicyParams()
    jobs: int = Field(default=1, ge=1)
    config_id: str | None = None


class SweepResponse(BaseModel):
    config_id: str
    episodes: list[EpisodeModel]
    aggregates: list[EpisodeModel]
    failures: list[str]
    csv: str


class ReduceRequest(BaseModel):
    instance: BwkInstanceModel
    policy: str
    seeds: list[int]
    master_seed: int = 0
    params: PolicyParams = PolicyParams()
    config_id: str | None = None


class ReduceEpisodeModel(BaseModel):
    seed: int
    total_reward: float
    pulls: int
    idle_recommendations: int
    budget_actual: list[float]
    budget_sim: list[float]
    stop_triggered: bool


class ReduceResponse(BaseModel):
    value_bwk: float
    value_lifted: float
    lp_equivalent: bool
    episodes: list[ReduceEpisodeModel]
    csv: str


class FitRequest(BaseModel):
    points: list[tuple[float, float]]
    model: str
    fixed_exponent: float | None = None


class FitResponse(BaseModel):
    model: str
    coefficient: float
    exponent: float | None
    ci: tuple[float, float] | None
    rss: float
    intercept: float


class FixturesResponse(BaseModel):
    fixtures: list[str]
    policies: list[str]
