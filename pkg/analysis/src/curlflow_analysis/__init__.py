"""Post-processing for curlflow run artifacts: curl-growth plots, shear
layer reports against the analytic erf profile, and convergence tables.
Everything is computed from the documented CSV formats alone."""

from .reports import (convergence_table, fit_growth_slope, plot_curl_growth,
                      stokes_profile, stokes_report)
from .runio import (DIAGNOSTIC_COLUMNS, SNAPSHOT_COLUMNS, Run,
                    RunFormatError, load_run, read_config, read_diagnostics,
                    read_snapshot)

__all__ = [
    "DIAGNOSTIC_COLUMNS", "SNAPSHOT_COLUMNS", "Run", "RunFormatError",
    "convergence_table", "fit_growth_slope", "load_run", "plot_curl_growth",
    "read_config", "read_diagnostics", "read_snapshot", "stokes_profile",
    "stokes_report",
]
