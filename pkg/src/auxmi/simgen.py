"""Synthetic populations with auxiliary variables of calibrated strength.

Standardised covariates ``x2..xk`` (alternating continuous and 0/1 binary)
drive part of the focal covariate ``x1``:

    x1 = signal(x2..xk) + U + e,   Var(signal) = base_r2,
                                   Var(U) = r2_max - base_r2,
                                   Var(e) = 1 - r2_max

Each auxiliary tier gets one column ``z_<tier>`` correlated with ``U`` just
enough that regressing ``x1`` on the covariates plus that column explains
``target_r2`` of its variance. The outcome ``y`` is Bernoulli with logit
linear in ``x1..xk``, so it depends on the auxiliaries only through ``x1``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from auxmi.data import BINARY, CONTINUOUS, Dataset
from auxmi.errors import SpecError

DEFAULT_TIERS = (("moderate", 0.45), ("strong", 0.62))
DEFAULT_BETA = (0.4, 0.3, 0.3, -0.4, 0.2, 0.3, -0.2, 0.2)


@dataclass(frozen=True)
class PopulationConfig:
    """``true_beta`` lists intercept, x1, x2, ... on the scale of the stored
    columns (binary covariates coded 0/1)."""

    n: int = 2000
    true_beta: tuple = DEFAULT_BETA
    base_r2: float = 0.14
    aux_tiers: tuple = DEFAULT_TIERS
    seed: int = None

    def __post_init__(self):
        object.__setattr__(self, "true_beta", tuple(float(b) for b in self.true_beta))
        tiers = self.aux_tiers.items() if isinstance(self.aux_tiers, dict) else self.aux_tiers
        object.__setattr__(self, "aux_tiers", tuple((str(t), float(r)) for t, r in tiers))
        if self.n < 100:
            raise SpecError("population needs at least 100 rows")
        if len(self.true_beta) < 3:
            raise SpecError("true_beta needs an intercept, x1 and at least one covariate")
        if not 0 < self.base_r2 < 1:
            raise SpecError("base_r2 must lie in (0, 1)")
        names = [t for t, _ in self.aux_tiers]
        if len(set(names)) != len(names) or "none" in names:
            raise SpecError(f"tier names must be distinct and not 'none': {names}")
        for name, r2 in self.aux_tiers:
            if not self.base_r2 < r2 < 1:
                raise SpecError(
                    f"tier {name!r}: target R2 {r2} must lie in (base_r2={self.base_r2}, 1)"
                )

    @property
    def n_covariates(self):
        return len(self.true_beta) - 2

    @property
    def covariates(self):
        return tuple(f"x{j}" for j in range(2, self.n_covariates + 2))

    @property
    def analysis_predictors(self):
        return ("x1",) + self.covariates

    def aux_name(self, tier):
        return f"z_{tier}"

    def imputation_predictors(self, tier):
        """Predictors for imputing x1 under ``tier`` ('none' adds no auxiliary)."""
        base = self.covariates + ("y",)
        if tier == "none":
            return base
        if tier not in dict(self.aux_tiers):
            raise SpecError(f"unknown auxiliary tier {tier!r}")
        return base + (self.aux_name(tier),)

    def target_r2(self, tier):
        return self.base_r2 if tier == "none" else dict(self.aux_tiers)[tier]


@dataclass(frozen=True)
class Truth:
    true_beta: tuple
    terms: tuple
    loadings: dict = field(default_factory=dict)


def calibrate_aux_strength(base_r2, target_r2):
    """Loading of a standardised auxiliary that lifts the population R2 of
    the x1 regression from ``base_r2`` to ``target_r2``."""
    if not 0 < base_r2 < 1 or not 0 < target_r2 < 1:
        raise SpecError("R2 values must lie in (0, 1)")
    if target_r2 < base_r2:
        raise SpecError(f"target R2 {target_r2} is below base R2 {base_r2}")
    return math.sqrt(target_r2 - base_r2)


def _covariate_kinds(k):
    return [CONTINUOUS if j % 2 == 0 else BINARY for j in range(k)]


def generate_population(cfg, rng):
    n, k = cfg.n, cfg.n_covariates
    kinds = _covariate_kinds(k)
    raw = np.empty((n, k))
    std = np.empty((n, k))
    for j, kind in enumerate(kinds):
        if kind is CONTINUOUS:
            raw[:, j] = rng.standard_normal(n)
            std[:, j] = raw[:, j]
        else:
            raw[:, j] = (rng.random(n) < 0.5).astype(float)
            std[:, j] = 2.0 * raw[:, j] - 1.0
    signal = std @ np.full(k, math.sqrt(cfg.base_r2 / k))

    r2_max = max((r for _, r in cfg.aux_tiers), default=cfg.base_r2)
    u_sd = math.sqrt(r2_max - cfg.base_r2)
    u_std = rng.standard_normal(n)
    x1 = signal + u_sd * u_std + math.sqrt(1 - r2_max) * rng.standard_normal(n)

    columns = {}
    loadings = {}
    aux = {}
    for tier, r2 in cfg.aux_tiers:
        lam = calibrate_aux_strength(cfg.base_r2, r2)
        loadings[tier] = lam
        rho = lam / u_sd
        aux[cfg.aux_name(tier)] = rho * u_std + math.sqrt(max(1 - rho**2, 0.0)) * rng.standard_normal(n)

    beta = np.asarray(cfg.true_beta)
    eta = beta[0] + beta[1] * x1 + raw @ beta[2:]
    y = (rng.random(n) < expit(eta)).astype(float)

    columns["y"] = y
    columns["x1"] = x1
    kind_map = {"y": BINARY, "x1": CONTINUOUS}
    for j, name in enumerate(cfg.covariates):
        columns[name] = raw[:, j]
        kind_map[name] = kinds[j]
    for name, col in aux.items():
        columns[name] = col
        kind_map[name] = CONTINUOUS
    d = Dataset.from_columns(columns, kind_map)
    truth = Truth(
        true_beta=cfg.true_beta,
        terms=("(Intercept)",) + cfg.analysis_predictors,
        loadings=loadings,
    )
    return d, truth
