"""Path-dependent stochastic control toolkit."""

from ._pathhjb import (
    InvalidArgument,
    NumericalError,
    analytic_value,
    criteria_count,
    d_infty,
    h_norm_sq,
    run_cli,
    run_criterion,
    sup_norm,
    value_regression,
    value_tree,
)

__all__ = [
    "InvalidArgument",
    "NumericalError",
    "analytic_value",
    "criteria_count",
    "d_infty",
    "h_norm_sq",
    "run_cli",
    "run_criterion",
    "sup_norm",
    "value_regression",
    "value_tree",
]
