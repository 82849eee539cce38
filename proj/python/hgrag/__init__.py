"""Hypergraph retrieval-augmented generation engine."""

import json as _json

from . import _core
from ._core import (
    Config,
    ConfigError,
    ContractError,
    EvalError,
    GenerationError,
    HgragError,
    NotFoundError,
    ParseError,
    ProviderError,
    ReportError,
    StorageError,
    cosine,
    count_tokens,
    entity_id,
    f1,
    g_e_score,
    hyperedge_id,
    load_config,
)

__all__ = [
    "Config",
    "ConfigError",
    "ContractError",
    "Engine",
    "EvalError",
    "GenerationError",
    "HgragError",
    "NotFoundError",
    "ParseError",
    "ProviderError",
    "ReportError",
    "StorageError",
    "cosine",
    "count_tokens",
    "entity_id",
    "f1",
    "facts_round_trip",
    "g_e_score",
    "hyperedge_id",
    "load_config",
    "parse_extraction",
]


class Engine:
    """Engine over one store; results come back as plain dicts."""

    def __init__(self, config, read_only=False):
        self._engine = _core.Engine(config, read_only)

    def build(self, corpus):
        return _json.loads(self._engine.build(str(corpus)))

    def query(self, question, include_prompt=False):
        return _json.loads(self._engine.query(question, include_prompt))

    def evaluate(self, dataset, limit=0):
        return _json.loads(self._engine.evaluate(str(dataset), limit))

    def stats(self):
        return _json.loads(self._engine.stats())

    def to_dot(self):
        return self._engine.to_dot()


def facts_round_trip(facts):
    """Encode facts as a bipartite graph and decode them again."""
    return _json.loads(_core.facts_round_trip(_json.dumps(facts)))


def parse_extraction(raw, strictness="lenient"):
    """Parse and validate one extraction reply."""
    return _json.loads(_core.parse_extraction(raw, strictness))
