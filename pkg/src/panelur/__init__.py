"""Panel unit root tests for real interest rate differentials.

First-generation (Maddala-Wu, Choi, Levin-Lin-Chu, Im-Pesaran-Shin),
second-generation (Moon-Perron, Pesaran CIPS, Choi 2006) and p-value
combination tests (inverse normal, Hartung/Demetrescu, Simes, covariate ADF),
with simulated null distributions and a CSV-to-report pipeline.
"""
__version__ = "0.1.0"

from .combination import (
    choi_inverse_normal,
    demetrescu_z,
    hartung_rho_hat,
    hartung_z,
    pcadf_family,
    pesaran_cd,
    scadf_family,
    simes_test,
)
from .data import BalanceRequired, IngestionError, MonthIndex, Panel, PanelError, RawSeries, align_panel, load_csv
from .firstgen import choi_z_test, ips_test, llc_test, mw_test
from .regression import AdfSpec, LrvSpec, adf_fit, cadf_fit, long_run_variance
from .results import TestResult
from .rird import Benchmark, InflationMode, compute_rird, real_rate_panel, summary_stats
from .secondgen import choi2006_tests, cips_test, moon_perron_test
from .tables import TableCache, default_tables

__all__ = [
    "__version__",
    "AdfSpec",
    "BalanceRequired",
    "Benchmark",
    "IngestionError",
    "InflationMode",
    "LrvSpec",
    "MonthIndex",
    "Panel",
    "PanelError",
    "RawSeries",
    "TableCache",
    "TestResult",
    "adf_fit",
    "align_panel",
    "cadf_fit",
    "choi2006_tests",
    "choi_inverse_normal",
    "choi_z_test",
    "cips_test",
    "compute_rird",
    "default_tables",
    "demetrescu_z",
    "hartung_rho_hat",
    "hartung_z",
    "ips_test",
    "llc_test",
    "load_csv",
    "long_run_variance",
    "moon_perron_test",
    "mw_test",
    "pcadf_family",
    "pesaran_cd",
    "real_rate_panel",
    "scadf_family",
    "simes_test",
    "summary_stats",
]
