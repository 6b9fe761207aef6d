"""Multiple imputation with auxiliary variables, plus a Monte Carlo harness
for measuring how much efficiency the auxiliaries buy back."""

from auxmi.data import (
    Binary,
    Continuous,
    Dataset,
    ModelFormula,
    Ordinal,
    emit_csv,
    listwise_complete,
    load_csv,
    missing_fraction,
)
from auxmi.errors import (
    AuxmiError,
    CalibrationError,
    ConvergenceError,
    CsvFormatError,
    PerfectPredictionError,
    RankDeficiencyError,
    SpecError,
)
from auxmi.mice import ImputationSpec, VariableModel, impute
from auxmi.pooling import Estimate, PooledEstimate, ld_estimate, mi_estimates, pool_rubin

__version__ = "0.1.0"

__all__ = [
    "AuxmiError",
    "Binary",
    "CalibrationError",
    "Continuous",
    "ConvergenceError",
    "CsvFormatError",
    "Dataset",
    "Estimate",
    "ImputationSpec",
    "ModelFormula",
    "Ordinal",
    "PerfectPredictionError",
    "PooledEstimate",
    "RankDeficiencyError",
    "SpecError",
    "VariableModel",
    "emit_csv",
    "impute",
    "ld_estimate",
    "listwise_complete",
    "load_csv",
    "mi_estimates",
    "missing_fraction",
    "pool_rubin",
]
