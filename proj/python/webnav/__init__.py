"""Conversational web navigation toolkit.

Python surface over the C++ core: the action grammar, DOM snapshots,
token-budgeted input rendering, element ranking, and turn scoring.
"""

from ._core import (
    Action,
    CoreError,
    Demonstration,
    DomSnapshot,
    Intent,
    ProjectionModel,
    Speaker,
    action_is_valid,
    build_otr_input,
    build_query,
    chrf,
    cosine,
    count_tokens,
    embed,
    intent_name,
    iou,
    load_demonstration,
    load_model,
    load_splits,
    parse_action,
    parse_snapshot,
    rank,
    segment_url,
    serialize_action,
    train,
    truncate_to_budget,
    turn_score,
    urlf,
    window_history,
)

__all__ = [
    "Action",
    "CoreError",
    "Demonstration",
    "DomSnapshot",
    "Intent",
    "ProjectionModel",
    "Speaker",
    "action_is_valid",
    "build_otr_input",
    "build_query",
    "chrf",
    "cosine",
    "count_tokens",
    "embed",
    "intent_name",
    "iou",
    "load_demonstration",
    "load_model",
    "load_splits",
    "parse_action",
    "parse_snapshot",
    "rank",
    "segment_url",
    "serialize_action",
    "train",
    "truncate_to_budget",
    "turn_score",
    "urlf",
    "window_history",
]

__version__ = "0.1.0"
