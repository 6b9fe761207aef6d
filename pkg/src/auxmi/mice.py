"""Multiple imputation by chained equations.

Each of the ``m`` chains starts from a random hot-deck fill and then cycles
through the incomplete variables in declaration order: refit that
variable's model on the rows where it was originally observed, draw the
model parameters from their approximate posterior, and redraw its missing
cells. Chains use independent RNG substreams keyed by imputation index, so
serial and threaded runs give identical output.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from auxmi import rng as rngmod
from auxmi.data import Binary, Continuous, Dataset, Ordinal
from auxmi.errors import ConvergenceError, PerfectPredictionError, SpecError
from auxmi.regressors import draw_parameters, fit_arrays, impute_draw

POLICIES = ("error", "drop_predictor", "abort_variable")
_METHOD_KIND = {"linear": Continuous, "logistic": Binary, "ordinal": Ordinal}


@dataclass(frozen=True)
class VariableModel:
    method: str
    predictors: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "predictors", tuple(self.predictors))
        if self.method not in _METHOD_KIND:
            raise SpecError(f"unknown imputation method {self.method!r}")


@dataclass(frozen=True)
class ImputationSpec:
    """``models`` maps each incomplete variable to its conditional model; its
    order is the update order within a cycle."""

    models: dict
    m: int = 5
    iterations: int = 10
    perfect_prediction_policy: str = "error"

    def __post_init__(self):
        models = {}
        for var, model in dict(self.models).items():
            if not isinstance(model, VariableModel):
                model = VariableModel(**model) if isinstance(model, dict) else VariableModel(*model)
            models[var] = model
        object.__setattr__(self, "models", models)
        if self.m < 2:
            raise SpecError("m must be at least 2")
        if self.iterations < 1:
            raise SpecError("iterations must be at least 1")
        if self.perfect_prediction_policy not in POLICIES:
            raise SpecError(
                f"perfect_prediction_policy must be one of {POLICIES}, "
                f"got {self.perfect_prediction_policy!r}"
            )

    def validate(self, d):
        for name in d.names:
            if not d.is_observed(name).all() and name not in self.models:
                raise SpecError(f"variable {name!r} has missing cells but no imputation model")
        for var, model in self.models.items():
            kind = d.kind(var)
            if not isinstance(kind, _METHOD_KIND[model.method]):
                raise SpecError(
                    f"method {model.method!r} does not match {kind} variable {var!r}"
                )
            if var in model.predictors:
                raise SpecError(f"{var!r} cannot predict itself")
            if len(set(model.predictors)) != len(model.predictors):
                raise SpecError(f"duplicate predictors for {var!r}")
            for p in model.predictors:
                d.kind(p)
        return self


@dataclass
class WorkingTable:
    """Mutable state of one chain."""

    source: Dataset
    values: dict
    dropped: dict = field(default_factory=dict)
    fit_stats: dict = field(default_factory=dict)
    aborted: list = field(default_factory=list)

    def observed(self, name):
        return self.source.observed[name]


@dataclass(frozen=True)
class CompletedDataset:
    dataset: Dataset
    imputed: dict
    index: int
    fit_stats: dict
    dropped: dict
    aborted: tuple = ()


def initialize_fill(d, rng):
    """Fill each missing cell with a random draw from that variable's
    observed values."""
    values = {}
    for name in d.names:
        col = d.values[name].copy()
        obs = d.observed[name]
        if not obs.all():
            pool = col[obs]
            if pool.size == 0:
                raise SpecError(f"variable {name!r} has no observed values to start from")
            col[~obs] = rng.choice(pool, size=int(np.count_nonzero(~obs)), replace=True)
        values[name] = col
    return WorkingTable(source=d, values=values)


def _fit_with_policy(work, var, model, policy):
    """Fit ``var``'s model, applying the perfect-prediction policy.

    Returns ``(fit, predictors)`` or ``(None, predictors)`` when the policy
    aborts the variable.
    """
    obs = work.observed(var)
    y = work.values[var][obs]
    levels = getattr(work.source.kind(var), "levels", None)
    dropped = work.dropped.setdefault(var, [])
    while True:
        preds = [p for p in model.predictors if p not in dropped]
        X = np.column_stack([work.values[p] for p in preds]) if preds else np.empty(
            (work.source.n_rows, 0)
        )
        try:
            fit = fit_arrays(model.method, X[obs], y, preds, levels)
            failed = getattr(fit, "separation_detected", False)
        except ConvergenceError:
            if policy == "error":
                raise
            failed = True
        if not failed:
            return fit, preds, X
        if policy == "error":
            raise PerfectPredictionError(var, preds)
        if policy == "abort_variable":
            if var not in work.aborted:
                work.aborted.append(var)
            return None, preds, X
        if not preds:
            raise PerfectPredictionError(
                var,
                preds,
                f"perfect prediction while imputing {var!r} persists with no predictors left",
            )
        dropped.append(preds[-1])


def mice_cycle(work, spec, rng):
    """One pass over the incomplete variables; updates ``work`` in place and
    returns it."""
    for var, model in spec.models.items():
        obs = work.observed(var)
        if obs.all():
            continue
        fit, preds, X = _fit_with_policy(work, var, model, spec.perfect_prediction_policy)
        if fit is None:
            continue
        params = draw_parameters(fit, rng)
        col = work.values[var]
        col[~obs] = impute_draw(params, X[~obs], rng)
        work.fit_stats[var] = float(fit.fit_stat)
    return work


def _run_chain(d, spec, seed, index):
    rng = rngmod.substream(seed, "chain", index)
    work = initialize_fill(d, rng)
    for _ in range(spec.iterations):
        mice_cycle(work, spec, rng)
    completed = Dataset(
        d.variables,
        work.values,
        {n: np.ones(d.n_rows, dtype=bool) for n in d.names},
    )
    return CompletedDataset(
        dataset=completed,
        imputed={n: ~d.observed[n] for n in d.names if not d.observed[n].all()},
        index=index,
        fit_stats=dict(work.fit_stats),
        dropped={k: list(v) for k, v in work.dropped.items() if v},
        aborted=tuple(work.aborted),
    )


def impute(d, spec, rng, threads=1):
    """Return ``spec.m`` completed copies of ``d``.

    ``rng`` may be an int seed, a SeedSequence, or a Generator (one master
    seed is drawn from it). Chain ``i`` always uses substream ``(seed, i)``.
    """
    spec.validate(d)
    if isinstance(rng, np.random.Generator):
        seed = int(rng.integers(2**63))
    else:
        seed = rng
    indices = range(spec.m)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda i: _run_chain(d, spec, seed, i), indices))
    return [_run_chain(d, spec, seed, i) for i in indices]
