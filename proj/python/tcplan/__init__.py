"""Python bindings for the tcplan planner, trainer and metrics."""

import json as _json

from . import _tcplan
from ._tcplan import (
    Planner,
    TcplanError,
    bleu,
    dist,
    generate_corpus,
    knowledge_f1,
    parse_plan,
    serialize_plan,
    target_success,
    word_f1,
    write_synthetic,
)


def train(corpus, splits, seed, out, planner=None, train=None, log=None):
    """Train a planner and write its checkpoint; returns a summary dict."""
    return _json.loads(
        _tcplan.train(corpus, splits, seed, out, _json.dumps(planner or {}), _json.dumps(train or {}), log or "")
    )


def evaluate(checkpoint, corpus, splits=None, split="dev", templates=None):
    """MetricReport for one split as a dict."""
    return _json.loads(_tcplan.evaluate(checkpoint, corpus, splits or "", split, templates or ""))


__all__ = [
    "Planner",
    "TcplanError",
    "bleu",
    "dist",
    "evaluate",
    "generate_corpus",
    "knowledge_f1",
    "parse_plan",
    "serialize_plan",
    "target_success",
    "train",
    "word_f1",
    "write_synthetic",
]
