"""Set similarity joins and blocking for entity resolution."""

import json

from ._shallowblock import (
    BlockResult,
    ConfigError,
    DataError,
    block,
    block_supervised,
    dedup,
    discriminatory_power,
    join,
    join_quality,
    naive_join,
    tokenize,
)

__all__ = [
    "BlockResult",
    "ConfigError",
    "DataError",
    "block",
    "block_supervised",
    "dedup",
    "discriminatory_power",
    "join",
    "join_quality",
    "naive_join",
    "report",
    "tokenize",
]


def report(result):
    """Run report of a blocking result as a dict."""
    return json.loads(result.report)
