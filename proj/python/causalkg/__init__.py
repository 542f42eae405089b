"""Temporal causal knowledge graph, retrieval and evaluation."""

import json as _json

from ._core import (
    Error,
    LocalEncoder,
    PipelineConfig,
    TemporalGraph,
    bleu,
    build_graph,
    clean_text,
    cosine_sim,
    encoding_similarity,
    extract,
    format_timestamp,
    jaccard,
    load_config,
    normalize_timestamp,
    preprocess_text,
)
from . import _core

__all__ = [
    "Error",
    "LocalEncoder",
    "PipelineConfig",
    "TemporalGraph",
    "bleu",
    "build_graph",
    "clean_text",
    "cosine_sim",
    "encoding_similarity",
    "extract",
    "format_timestamp",
    "jaccard",
    "load_config",
    "normalize_timestamp",
    "preprocess_text",
    "report_from_scores",
    "run_stage",
]


def run_stage(stage, config, query="", cases="", mode="both", explain=False, scores=""):
    """Run one pipeline stage ("ingest" .. "eval", or "all") and return its summary."""
    return _json.loads(_core.run_stage(stage, config, query, cases, mode, explain, scores))


def report_from_scores(path):
    """Aggregate a scores.csv into the report dictionary written by eval."""
    return _json.loads(_core.report_from_scores(path))
