"""Markov-modulated Hawkes process tools (C++ core)."""

from ._core import (
    InstabilityError,
    MmhpError,
    Model,
    bin_counts,
    calibrate,
    em_rate_matrix_step,
    filter_counts,
    filter_events,
    predict,
    robust_filter_events,
    simulate,
    smooth_counts,
    smooth_events,
)

__all__ = [
    "InstabilityError",
    "MmhpError",
    "Model",
    "bin_counts",
    "calibrate",
    "em_rate_matrix_step",
    "filter_counts",
    "filter_events",
    "predict",
    "robust_filter_events",
    "simulate",
    "smooth_counts",
    "smooth_events",
]
