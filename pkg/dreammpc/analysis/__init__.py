"""Diagnostic studies over frozen models."""

from dreammpc.analysis.exploitation import exploitation_study
from dreammpc.analysis.gradients import gradient_study
from dreammpc.analysis.stats import esnr, quartile_bins, spearman
from dreammpc.analysis.timing import plan_bench, timing_report
from dreammpc.analysis.value import value_study

__all__ = [
    "esnr",
    "exploitation_study",
    "gradient_study",
    "plan_bench",
    "quartile_bins",
    "spearman",
    "timing_report",
    "value_study",
]
