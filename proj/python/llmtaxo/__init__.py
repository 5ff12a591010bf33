"""Python bindings for the llmtaxo claim-taxonomy pipeline."""

import json

from ._llmtaxo import (
    Error,
    build_mst,
    hash_embed,
    hdbscan,
    heuristic_score,
    mutual_reachability,
    silhouette,
)
from . import _llmtaxo

__all__ = [
    "Error",
    "aggregate",
    "build_mst",
    "build_prompt",
    "consolidate",
    "hash_embed",
    "hdbscan",
    "heuristic_score",
    "mutual_reachability",
    "parse_response",
    "run_stage",
    "silhouette",
]


def consolidate(triples, merge=True, broad_min=50, medium_min=5, detailed_min=4):
    """Builds the taxonomy from {broad, medium, detailed} dicts (None for absent levels)."""
    text = _llmtaxo._consolidate(json.dumps(list(triples)), broad_min, medium_min, detailed_min, merge)
    return json.loads(text)


def build_prompt(examples, claim, with_seed=True):
    """examples: list of {claim, broad, medium, detailed}."""
    return _llmtaxo._build_prompt(json.dumps({"examples": list(examples)}), claim, with_seed)


def parse_response(raw):
    return json.loads(_llmtaxo._parse_response(raw))


def aggregate(scores):
    """scores: iterable of score records as written to evaluation_scores.jsonl."""
    lines = "".join(json.dumps(s) + "\n" for s in scores)
    return json.loads(_llmtaxo._aggregate(lines))


def run_stage(config, stage, out=None, mock=False):
    """Runs one pipeline stage (or "run") and returns the manifest."""
    return json.loads(_llmtaxo._run_stage(str(config), stage, str(out) if out else "", mock))
