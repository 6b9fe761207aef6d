"""Amputation: delete observed values of one variable under MCAR or MAR."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from auxmi.errors import CalibrationError, SpecError

CALIBRATION_TOL = 1e-4


@dataclass(frozen=True)
class MissingnessSpec:
    """Which variable to delete, how much, and how.

    ``score`` is empty for MCAR. For MAR it is a tuple of ``(variable,
    weight)`` pairs; a row's deletion probability is
    ``expit(a + sum(weight * value))`` with ``a`` calibrated to ``rate``.
    """

    target: str
    rate: float
    mechanism: str = "mcar"
    score: tuple = ()

    def __post_init__(self):
        mechanism = self.mechanism.lower()
        object.__setattr__(self, "mechanism", mechanism)
        object.__setattr__(self, "score", tuple((str(v), float(w)) for v, w in self.score))
        if mechanism not in ("mcar", "mar"):
            raise SpecError(f"unknown missingness mechanism {self.mechanism!r}")
        if not 0 < self.rate < 1:
            raise SpecError(f"missingness rate must lie in (0, 1), got {self.rate}")
        if mechanism == "mcar" and self.score:
            raise SpecError("MCAR deletion takes no score")
        for var, weight in self.score:
            if var == self.target:
                raise SpecError("MAR score may not reference the target variable")
            if not math.isfinite(weight):
                raise SpecError(f"non-finite score weight for {var!r}")

    @property
    def label(self):
        if self.mechanism == "mcar":
            return "MCAR"
        terms = ",".join(f"{v}*{w:g}" for v, w in self.score)
        return f"MAR({terms})" if terms else "MAR"


def _check_target(d, target):
    if not d.is_observed(target).all():
        raise SpecError(f"target {target!r} already has missing values")


def ampute_mcar(d, target, rate, rng):
    """Mask exactly ``round(rate * n)`` cells of ``target``, chosen uniformly."""
    if not 0 < rate < 1:
        raise SpecError(f"missingness rate must lie in (0, 1), got {rate}")
    _check_target(d, target)
    n = d.n_rows
    k = int(math.floor(rate * n + 0.5))
    if k == 0:
        return d
    rows = rng.choice(n, size=k, replace=False)
    observed = np.ones(n, dtype=bool)
    observed[rows] = False
    return d.replace(target, observed=observed)


def mar_score(d, spec):
    score = np.zeros(d.n_rows)
    for var, weight in spec.score:
        if not d.is_observed(var).all():
            raise SpecError(f"MAR score variable {var!r} must be fully observed")
        score = score + weight * d.column(var)
    return score


def calibrate_intercept(score, rate, tol=1e-12):
    """Intercept ``a`` with ``mean(expit(a + score)) == rate`` by bisection."""
    if not np.all(np.isfinite(score)):
        raise CalibrationError("MAR score has non-finite values")
    lo = math.log(rate / (1 - rate)) - float(np.max(score)) - 1.0
    hi = math.log(rate / (1 - rate)) - float(np.min(score)) + 1.0
    f = lambda a: float(np.mean(expit(a + score))) - rate  # noqa: E731
    if not (f(lo) < 0 < f(hi)):
        raise CalibrationError("could not bracket the MAR selection intercept")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = f(mid)
        if abs(val) < tol:
            break
        if val < 0:
            lo = mid
        else:
            hi = mid
    if abs(f(mid)) >= CALIBRATION_TOL:
        raise CalibrationError(
            f"calibrated deletion rate misses target {rate} by {abs(f(mid)):.2e}"
        )
    return mid


def deletion_probabilities(d, spec):
    score = mar_score(d, spec)
    return expit(calibrate_intercept(score, spec.rate) + score)


def ampute_mar(d, spec, rng):
    """Independent per-row Bernoulli deletion with calibrated logistic
    selection probabilities."""
    if spec.mechanism != "mar":
        raise SpecError("ampute_mar needs a MAR spec")
    _check_target(d, spec.target)
    prob = deletion_probabilities(d, spec)
    delete = rng.random(d.n_rows) < prob
    return d.replace(spec.target, observed=~delete)


def ampute(d, spec, rng):
    if spec.mechanism == "mcar":
        return ampute_mcar(d, spec.target, spec.rate, rng)
    return ampute_mar(d, spec, rng)
