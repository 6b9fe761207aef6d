"""Replication harness: config, runner, efficiency metrics, reports."""

from auxmi.harness.config import HarnessConfig, load_config, parse_config
from auxmi.harness.metrics import (
    EfficiencyRow,
    analytic_mcar_bounds,
    efficiency_metrics,
    significance_stars,
)
from auxmi.harness.report import emit_report
from auxmi.harness.runner import Cell, CellResult, grid_cells, run_cell, run_grid

__all__ = [
    "Cell",
    "CellResult",
    "EfficiencyRow",
    "HarnessConfig",
    "analytic_mcar_bounds",
    "efficiency_metrics",
    "emit_report",
    "grid_cells",
    "load_config",
    "parse_config",
    "run_cell",
    "run_grid",
    "significance_stars",
]
