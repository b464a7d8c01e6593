"""Estimation stack: differencing, drift compensation, pseudo-ranges, ILS, refinement."""
from tsloc.estimate.differencing import (
    DifferenceKind,
    DifferenceObservation,
    diff_same_packet,
    diff_same_receiver,
    dtdoa,
)
from tsloc.estimate.drift import DriftEstimate, compensate_drift, correct_drift, estimate_drift
from tsloc.estimate.ils import PositionEstimate, ils_solve
from tsloc.estimate.outliers import reject_outliers
from tsloc.estimate.pseudoranges import PseudoRangeEntry, PseudoRangeSet, Scheme, extract_pseudoranges
from tsloc.estimate.refine import (
    EstimatorConfig,
    LocalizationResult,
    localize,
    refine_joint,
    refine_sequential,
)

__all__ = [
    "DifferenceKind",
    "DifferenceObservation",
    "DriftEstimate",
    "EstimatorConfig",
    "LocalizationResult",
    "PositionEstimate",
    "PseudoRangeEntry",
    "PseudoRangeSet",
    "Scheme",
    "compensate_drift",
    "correct_drift",
    "diff_same_packet",
    "diff_same_receiver",
    "dtdoa",
    "estimate_drift",
    "extract_pseudoranges",
    "ils_solve",
    "localize",
    "refine_joint",
    "refine_sequential",
    "reject_outliers",
]
