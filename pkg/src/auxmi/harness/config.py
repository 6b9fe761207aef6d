"""Harness configuration document (YAML or JSON), validated with pydantic."""

import json
from pathlib import Path
from typing import Dict, List, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from auxmi.errors import SpecError
from auxmi.missingness import MissingnessSpec
from auxmi.mice import POLICIES
from auxmi.simgen import DEFAULT_BETA, PopulationConfig

SCHEMA_VERSION = 1


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PopulationSection(_Section):
    n: int = Field(2000, ge=100)
    true_beta: List[float] = list(DEFAULT_BETA)
    base_r2: float = 0.14
    aux_tiers: Dict[str, float] = {"moderate": 0.45, "strong": 0.62}
    resample: bool = False
    pilot_n: int = Field(1_000_000, ge=1000)

    def population(self, n=None):
        return PopulationConfig(
            n=n or self.n,
            true_beta=tuple(self.true_beta),
            base_r2=self.base_r2,
            aux_tiers=tuple(self.aux_tiers.items()),
        )


class MissingnessSection(_Section):
    mechanism: Literal["mcar", "mar"] = "mcar"
    target: str = "x1"
    rates: List[float] = [0.3, 0.2, 0.1]
    # ordered mapping variable -> weight; only used by MAR
    score: Dict[str, float] = {}

    @field_validator("rates")
    @classmethod
    def _rates(cls, rates):
        if not rates:
            raise ValueError("at least one rate is required")
        for r in rates:
            if not 0 < r < 1:
                raise ValueError(f"rate {r} outside (0, 1)")
        return rates

    def spec(self, rate):
        return MissingnessSpec(
            target=self.target,
            rate=rate,
            mechanism=self.mechanism,
            score=tuple(self.score.items()) if self.mechanism == "mar" else (),
        )


class ImputationSection(_Section):
    m: int = Field(20, ge=2)
    iterations: int = Field(10, ge=1)
    perfect_prediction_policy: str = "error"
    tiers: List[str] = ["none", "moderate", "strong"]

    @field_validator("perfect_prediction_policy")
    @classmethod
    def _policy(cls, v):
        if v not in POLICIES:
            raise ValueError(f"must be one of {POLICIES}")
        return v


class OutputSection(_Section):
    dir: str = "results"
    formats: List[Literal["csv", "markdown", "json"]] = ["csv", "markdown", "json"]
    stem: str = "report"


class HarnessConfig(_Section):
    schema_version: Literal[1]
    seed: int = Field(20120335, ge=0)
    replications: int = Field(100, ge=2)
    focal_term: str = "x1"
    analysis: Literal["logistic", "linear"] = "logistic"
    reference: Literal["ld", "complete"] = "ld"
    estimators: List[Literal["ld", "mi", "complete"]] = ["ld", "mi", "complete"]
    threads: int = Field(1, ge=1)
    population: PopulationSection = PopulationSection()
    missingness: MissingnessSection = MissingnessSection()
    imputation: ImputationSection = ImputationSection()
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def _cross_check(self):
        pop = self.population.population()
        known = set(pop.analysis_predictors) | {"y"}
        if self.missingness.target not in known:
            raise ValueError(f"missingness target {self.missingness.target!r} is not an analysis variable")
        if self.focal_term not in ("(Intercept)",) + pop.analysis_predictors:
            raise ValueError(f"focal term {self.focal_term!r} is not in the analysis model")
        for tier in self.imputation.tiers:
            if tier != "none" and tier not in self.population.aux_tiers:
                raise ValueError(f"imputation tier {tier!r} has no auxiliary in the population")
        for var in self.missingness.score:
            if var == self.missingness.target:
                raise ValueError("MAR score may not use the target variable")
            if var not in known and not var.startswith("z_"):
                raise ValueError(f"MAR score variable {var!r} is unknown")
        return self

    def to_json(self):
        return json.dumps(self.model_dump(mode="json"), sort_keys=True)


def parse_config(data):
    if not isinstance(data, dict):
        raise SpecError("config must be a mapping")
    if "schema_version" not in data:
        raise SpecError("config is missing the mandatory 'schema_version' field")
    try:
        return HarnessConfig.model_validate(data)
    except ValidationError as exc:
        raise SpecError(f"invalid config: {exc}") from exc


def load_config(path):
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith(".json"):
        data = json.loads(text)
    else:
        data = yaml.safe_load(text)
    return parse_config(data)


def with_overrides(cfg, **changes):
    """Copy of ``cfg`` with top-level fields (or ``section__field``) replaced."""
    data = cfg.model_dump()
    for key, value in changes.items():
        if value is None:
            continue
        if "__" in key:
            section, field = key.split("__", 1)
            data[section][field] = value
        else:
            data[key] = value
    return parse_config(data)
