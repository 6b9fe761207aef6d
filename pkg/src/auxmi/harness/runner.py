"""Monte Carlo replication of listwise deletion, multiple imputation and
complete-data estimators over a grid of missingness conditions.

RNG keys:
  population   (seed, "population")            fixed regime
               (seed, "population", r)         resampled regime
  amputation   (seed, "amputation", block, r)
  imputation   (seed, "impute", cell, r)
  pilot        (seed, "pilot")

Data are keyed by block rather than by cell so that every estimator in a
block sees the same populations and the same deletions; comparisons between
columns are then paired.
"""

import functools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from auxmi import rng as rngmod
from auxmi.data import ModelFormula
from auxmi.errors import AuxmiError
from auxmi.harness.config import HarnessConfig
from auxmi.mice import ImputationSpec, VariableModel, impute
from auxmi.missingness import ampute
from auxmi.pooling import fit_analysis, ld_estimate, mi_estimates, pool_rubin
from auxmi.regressors import METHOD_FOR_KIND
from auxmi.simgen import generate_population


@dataclass(frozen=True)
class Cell:
    block: str
    mechanism: str
    rate: float
    estimator: str
    tier: str = None

    @property
    def id(self):
        name = self.estimator if self.tier is None else f"{self.estimator}-{self.tier}"
        return f"{self.block}/{name}"

    @property
    def column(self):
        if self.estimator == "ld":
            return "LD"
        if self.estimator == "complete":
            return "Complete data"
        return f"MI: {self.tier}"


@dataclass(frozen=True)
class ReplicationResult:
    point: float
    se: float
    r2: float = None
    n_used: int = 0


@dataclass(frozen=True)
class CellResult:
    cell_id: str
    block: str
    mechanism: str
    rate: float
    estimator: str
    tier: str
    replications: int
    est_mean: float
    est_sd: float
    mean_model_se: float
    mc_se: float
    bias: float
    estimand: float
    mean_r2: float = None

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class GridResult:
    config: HarnessConfig
    estimand: float
    results: tuple


def block_id(mechanism, rate):
    return f"{mechanism.lower()}-{rate:g}"


def grid_cells(cfg):
    cells = []
    for rate in cfg.missingness.rates:
        spec = cfg.missingness.spec(rate)
        block = block_id(cfg.missingness.mechanism, rate)
        for est in cfg.estimators:
            if est == "mi":
                for tier in cfg.imputation.tiers:
                    cells.append(Cell(block, spec.label, rate, "mi", tier))
            else:
                cells.append(Cell(block, spec.label, rate, est))
    return cells


@functools.lru_cache(maxsize=8)
def _config_from_json(text):
    return HarnessConfig.model_validate_json(text)


@functools.lru_cache(maxsize=4)
def _fixed_population(cfg_json):
    cfg = _config_from_json(cfg_json)
    d, _ = generate_population(
        cfg.population.population(), rngmod.substream(cfg.seed, "population")
    )
    return d


@functools.lru_cache(maxsize=4)
def _pilot(cfg_json):
    cfg = _config_from_json(cfg_json)
    pop = cfg.population.population(n=cfg.population.pilot_n)
    d, _ = generate_population(pop, rngmod.substream(cfg.seed, "pilot"))
    est = fit_analysis(d, analysis_formula(cfg), cfg.analysis)
    return est.point(cfg.focal_term)


def analysis_formula(cfg):
    return ModelFormula("y", cfg.population.population().analysis_predictors)


def pilot_estimand(cfg):
    """Focal coefficient from one very large population; the target that
    bias is measured against."""
    return _pilot(cfg.to_json())


def replication_population(cfg, r):
    if cfg.population.resample:
        d, _ = generate_population(
            cfg.population.population(), rngmod.substream(cfg.seed, "population", r)
        )
        return d
    return _fixed_population(cfg.to_json())


def imputation_spec(cfg, tier, d):
    pop = cfg.population.population()
    target = cfg.missingness.target
    base = [v for v in ("y",) + pop.analysis_predictors if v != target]
    preds = base + ([pop.aux_name(tier)] if tier != "none" else [])
    method = METHOD_FOR_KIND[d.kind(target).name]
    return ImputationSpec(
        models={target: VariableModel(method, tuple(preds))},
        m=cfg.imputation.m,
        iterations=cfg.imputation.iterations,
        perfect_prediction_policy=cfg.imputation.perfect_prediction_policy,
    )


def run_replication(cfg, cell, r):
    d = replication_population(cfg, r)
    f = analysis_formula(cfg)
    term = cfg.focal_term
    if cell.estimator == "complete":
        est = fit_analysis(d, f, cfg.analysis)
        return ReplicationResult(est.point(term), est.se(term), None, est.n_used)
    spec = cfg.missingness.spec(cell.rate)
    amputed = ampute(d, spec, rngmod.substream(cfg.seed, "amputation", cell.block, r))
    if cell.estimator == "ld":
        est = ld_estimate(amputed, f, cfg.analysis)
        return ReplicationResult(est.point(term), est.se(term), None, est.n_used)
    ispec = imputation_spec(cfg, cell.tier, amputed)
    completed = impute(amputed, ispec, rngmod.seed_sequence(cfg.seed, "impute", cell.id, r))
    pooled = pool_rubin(mi_estimates(completed, f, cfg.analysis))
    r2 = float(np.mean([c.fit_stats[spec.target] for c in completed]))
    return ReplicationResult(
        float(pooled.q_bar[pooled.index(term)]), pooled.se(term), r2, d.n_rows
    )


def _task(args):
    cfg_json, cell, r = args
    cfg = _config_from_json(cfg_json)
    try:
        return run_replication(cfg, cell, r)
    except AuxmiError as exc:
        raise type(exc)(f"cell {cell.id}, replication {r}: {exc}") from exc


def _run_tasks(cfg, tasks, threads):
    cfg_json = cfg.to_json()
    payload = [(cfg_json, cell, r) for cell, r in tasks]
    if threads and threads > 1 and len(payload) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_task, payload, chunksize=max(1, len(payload) // (4 * threads))))
    return [_task(p) for p in payload]


def aggregate(cell, reps, estimand):
    points = np.array([x.point for x in reps])
    R = len(points)
    est_mean = float(np.mean(points))
    est_sd = float(np.std(points, ddof=1)) if R > 1 else 0.0
    r2s = [x.r2 for x in reps if x.r2 is not None]
    return CellResult(
        cell_id=cell.id,
        block=cell.block,
        mechanism=cell.mechanism,
        rate=cell.rate,
        estimator=cell.estimator,
        tier=cell.tier,
        replications=R,
        est_mean=est_mean,
        est_sd=est_sd,
        mean_model_se=float(np.mean([x.se for x in reps])),
        mc_se=est_sd / math.sqrt(R),
        bias=est_mean - estimand,
        estimand=estimand,
        mean_r2=float(np.mean(r2s)) if r2s else None,
    )


def run_cell(cfg, cell, threads=1, estimand=None):
    if estimand is None:
        estimand = pilot_estimand(cfg)
    reps = _run_tasks(cfg, [(cell, r) for r in range(cfg.replications)], threads)
    return aggregate(cell, reps, estimand)


def run_grid(cfg, threads=None):
    """Run every cell; results come back in grid order whatever the
    parallelism."""
    threads = cfg.threads if threads is None else threads
    estimand = pilot_estimand(cfg)
    cells = grid_cells(cfg)
    tasks = [(cell, r) for cell in cells for r in range(cfg.replications)]
    reps = _run_tasks(cfg, tasks, threads)
    R = cfg.replications
    results = tuple(
        aggregate(cell, reps[i * R : (i + 1) * R], estimand) for i, cell in enumerate(cells)
    )
    return GridResult(cfg, estimand, results)
