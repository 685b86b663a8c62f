"""Weighted kappa agreement, funnel-plot meta-analysis of kappas, and audit
tools for dual bibliometric / peer-review evaluation experiments."""

__version__ = "0.1.0"

from .agreement import (
    AgreementError,
    CategorySet,
    ContingencyTable,
    DegenerateMarginalsError,
    GUIDELINES,
    KappaEstimate,
    WeightScheme,
    build_table,
    confidence_interval,
    interpret,
    linear_weights,
    significance_test,
    standard_error,
    unweighted,
    vqr_weights,
    weighted_kappa,
)
from .audit import AuditError, consensus_estimate, concordance_rate
from .meta import (
    GroupKappa,
    MetaError,
    MetaModel,
    fit,
    funnel_points,
    leave_one_out,
    multi_exceedance_probability,
    prediction_interval,
)
from .simulation import SimConfig, SimulationError, coverage_study, se_calibration
from .vqr import DataError, load_embedded

__all__ = [
    "AgreementError",
    "AuditError",
    "CategorySet",
    "ContingencyTable",
    "DataError",
    "DegenerateMarginalsError",
    "GUIDELINES",
    "GroupKappa",
    "KappaEstimate",
    "MetaError",
    "MetaModel",
    "SimConfig",
    "SimulationError",
    "WeightScheme",
    "build_table",
    "concordance_rate",
    "confidence_interval",
    "consensus_estimate",
    "coverage_study",
    "fit",
    "funnel_points",
    "interpret",
    "leave_one_out",
    "linear_weights",
    "load_embedded",
    "multi_exceedance_probability",
    "prediction_interval",
    "se_calibration",
    "significance_test",
    "standard_error",
    "unweighted",
    "vqr_weights",
    "weighted_kappa",
]
