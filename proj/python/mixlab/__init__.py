"""Mixture search for multi-domain RL post-training (C++ core)."""

import json

from . import _mixlab
from ._mixlab import (
    MixlabError,
    Record,
    SurrogateModel,
    World,
    empirical_frequencies,
    extract_answer,
    heuristic,
    iou,
    make_world,
    normalize,
    parse_records,
    propose,
    read_records,
    sample,
    score_output,
    summarize,
    table2_fixture,
    train_with_mixture,
    validate,
)

__all__ = [
    "MixlabError",
    "Record",
    "SurrogateModel",
    "World",
    "empirical_frequencies",
    "extract_answer",
    "fit",
    "heuristic",
    "iou",
    "make_world",
    "normalize",
    "parse_records",
    "propose",
    "read_records",
    "run_pipeline",
    "sample",
    "score_output",
    "summarize",
    "table2_fixture",
    "train_with_mixture",
    "validate",
]


def fit(mixtures, targets, degree=2, splits=5, test_fraction=0.2, seed=0):
    """Cross-validated surrogate fit; returns (model, report dict)."""
    model, report = _mixlab.fit(mixtures, targets, degree, splits, test_fraction, seed)
    return model, json.loads(report)


def run_pipeline(config_path, out_dir=None, seed=None):
    """Full seed/fit/propose/verify loop; returns (report dict, summary text)."""
    report, summary = _mixlab.run_pipeline(str(config_path), None if out_dir is None else str(out_dir), seed)
    return json.loads(report), summary
