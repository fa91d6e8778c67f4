"""Opt-in floating-point accuracy pass for marked expressions."""

from .evaluate import (
    ErrorEstimate,
    NoValidSamples,
    SamplePlan,
    SampleSet,
    VarRange,
    bits_of_error,
    build_samples,
    error_on,
    estimate_error,
    eval_double,
    oracle_value,
)
from .expr import Abstraction, Unsupported, from_ast, to_ast, to_text
from .marks import (
    AnnotationMissing,
    MarkedExpr,
    RecheckFailed,
    analyse_module,
    apply_all,
    apply_annotation,
    collect_marked,
    format_annotations,
    write_annotations,
)
from .rules import RULES, simplify
from .search import AnalysisResult, RewriteCandidate, optimize, search_rewrites, select_and_annotate

__all__ = [
    "Abstraction", "AnalysisResult", "AnnotationMissing", "ErrorEstimate", "MarkedExpr", "NoValidSamples",
    "RULES", "RecheckFailed", "RewriteCandidate", "SamplePlan", "SampleSet", "Unsupported", "VarRange",
    "analyse_module", "apply_all", "apply_annotation", "bits_of_error", "build_samples", "collect_marked",
    "error_on", "estimate_error", "eval_double", "format_annotations", "from_ast", "optimize", "oracle_value",
    "search_rewrites", "select_and_annotate", "simplify", "to_ast", "to_text", "write_annotations",
]
