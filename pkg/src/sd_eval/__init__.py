"""Ground-truth benchmark generation and scoring for causal-map engines."""

from .evaluation import (
    CausalFailureKind,
    ConformanceFailureKind,
    EvalOutcome,
    ScoreCard,
    aggregate,
    classify_causal,
    classify_conformance,
    score_causal_translation,
    score_conformance,
)
from .graph import CausalMap, FeedbackLoop, Polarity, Relationship, diff_maps, enumerate_loops
from .synthesis import ConformanceCase, ConformanceConstraint, GroundTruthCase, canonical_suites

__all__ = [
    "CausalFailureKind",
    "CausalMap",
    "ConformanceCase",
    "ConformanceConstraint",
    "ConformanceFailureKind",
    "EvalOutcome",
    "FeedbackLoop",
    "GroundTruthCase",
    "Polarity",
    "Relationship",
    "ScoreCard",
    "aggregate",
    "canonical_suites",
    "classify_causal",
    "classify_conformance",
    "diff_maps",
    "enumerate_loops",
    "score_causal_translation",
    "score_conformance",
]
