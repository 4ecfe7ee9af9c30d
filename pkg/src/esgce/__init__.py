"""Causal discovery of extended summary graphs from multivariate time series."""

from esgce.dataset import TimeSeriesDataset
from esgce.errors import (
    DataFormatError,
    DegenerateDataError,
    ESGError,
    InsufficientDataError,
    InvalidConditionerError,
    InvalidDimensionError,
    InvariantViolationError,
    MissingEdgeError,
    TooShortError,
    UnknownStructureError,
)
from esgce.estimator import (
    CITestResult,
    EstimatorConfig,
    PermutationCITester,
    conditional_gce,
    gce,
    instantaneous_cmi,
    ksg_cmi,
    local_permutation_test,
)
from esgce.evaluate import OracleCITester, benchmark, dsep_oracle, f1_scores
from esgce.graph import (
    Edge,
    ExtendedSummaryGraph,
    Mark,
    SepsetTable,
    Slice,
    SliceNode,
    collapse_to_summary,
    new_full_graph,
    past,
    present,
)
from esgce.kernels import BACKEND
from esgce.orient_fci import apply_fci_rules, fcigce, possible_dsep, run_fcigce
from esgce.orient_pc import apply_pc_rules, pcgce, run_pcgce
from esgce.simulate import GroundTruth, StructureId, generate, truth_graph
from esgce.skeleton import TestLog, build_skeleton, complexity_bound

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CITestResult", "DataFormatError", "DegenerateDataError", "ESGError", "Edge",
    "EstimatorConfig", "ExtendedSummaryGraph", "GroundTruth", "InsufficientDataError",
    "InvalidConditionerError", "InvalidDimensionError", "InvariantViolationError", "Mark",
    "MissingEdgeError", "OracleCITester", "PermutationCITester", "SepsetTable", "Slice", "SliceNode",
    "StructureId", "TestLog", "TimeSeriesDataset", "TooShortError", "UnknownStructureError",
    "apply_fci_rules", "apply_pc_rules", "benchmark", "build_skeleton", "collapse_to_summary",
    "complexity_bound", "conditional_gce", "dsep_oracle", "f1_scores", "fcigce", "gce", "generate",
    "instantaneous_cmi", "ksg_cmi", "local_permutation_test", "new_full_graph", "past", "pcgce",
    "possible_dsep", "present", "run_fcigce", "run_pcgce", "truth_graph",
]
