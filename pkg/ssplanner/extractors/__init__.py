"""
Plan keyword extractors.

``pipeline.PlanExtractor`` and ``attention.extract_attention`` depend on the
planner and are imported from their modules directly.
"""

from .plan import KeywordPlan, ScoredWord, finalize_plan, vote_offtheshelf
from .keywords import (
    extract_graph_rake,
    extract_offtheshelf,
    extract_positionrank,
    extract_random,
    extract_statistical,
    load_stopwords,
)
from .syntactic import extract_syntactic, load_pos_lexicon, tag_pos

__all__ = [
    "KeywordPlan",
    "ScoredWord",
    "finalize_plan",
    "vote_offtheshelf",
    "extract_graph_rake",
    "extract_offtheshelf",
    "extract_positionrank",
    "extract_random",
    "extract_statistical",
    "load_stopwords",
    "extract_syntactic",
    "load_pos_lexicon",
    "tag_pos",
]
