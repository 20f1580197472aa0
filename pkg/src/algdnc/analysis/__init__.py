"""SFA, PMOO and exhaustive-decomposition delay analyses."""

from algdnc.analysis.engine import (
    AnalysisKind,
    AnalysisOptions,
    AnalysisResult,
    FlowAggregate,
    analyze_flow,
    arrival_bound,
    exhaustive_delay_bound,
    exhaustive_left_over_set,
    get_decompositions,
    pmoo_delay_bound,
    sfa_delay_bound,
    xtx_segregation,
)
from algdnc.analysis.tfa import tfa_backlog_bound, tfa_backlog_bounds

__all__ = [
    "AnalysisKind",
    "AnalysisOptions",
    "AnalysisResult",
    "FlowAggregate",
    "analyze_flow",
    "arrival_bound",
    "exhaustive_delay_bound",
    "exhaustive_left_over_set",
    "get_decompositions",
    "pmoo_delay_bound",
    "sfa_delay_bound",
    "tfa_backlog_bound",
    "tfa_backlog_bounds",
    "xtx_segregation",
]
