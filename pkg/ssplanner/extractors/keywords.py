"""
Sentence-level keyword extractors used to build gold plans.

The three "off-the-shelf" families are simplified, fully specified variants
of statistical (YAKE-like), word-degree (RAKE-like) and position-biased
PageRank scoring. All outputs are unigrams taken from the input sentence and
ties are broken lexicographically.
"""

import logging
import os
import random
from collections import Counter, defaultdict
from functools import lru_cache
from typing import Dict, FrozenSet, List, Optional, Sequence

import networkx as nx

from ..corpus import Sentence, SPECIAL_TOKENS
from .plan import ScoredWord, vote_offtheshelf

logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "data")


@lru_cache(maxsize=None)
def load_stopwords(path: Optional[str] = None) -> FrozenSet[str]:
    """Load a newline-delimited stopword list (defaults to the shipped list)."""
    path = path or os.path.join(DATA_DIR, "stopwords.txt")
    with open(path, "r", encoding="utf-8") as f:
        words = frozenset(line.strip().lower() for line in f if line.strip() and not line.startswith("#"))
    logger.debug(f"Loaded {len(words)} stopwords from {path}")
    return words


def is_content_token(token: str, stopwords: FrozenSet[str]) -> bool:
    """A candidate keyword: not a stopword, not punctuation, not a special token."""
    return token not in stopwords and token not in SPECIAL_TOKENS and any(ch.isalnum() for ch in token)


def _top_k(scores: Dict[str, float], k: int) -> List[ScoredWord]:
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return [ScoredWord(token, float(score)) for token, score in ranked[:k]]


def score_statistical(sentence: Sentence, stopwords: FrozenSet[str]) -> Dict[str, float]:
    """tf(w) / (1 + first_position(w) / |sentence|) for every candidate word."""
    n = len(sentence.tokens)
    tf: Counter = Counter()
    first_position: Dict[str, int] = {}
    for position, token in enumerate(sentence.tokens):
        if not is_content_token(token, stopwords):
            continue
        tf[token] += 1
        first_position.setdefault(token, position)
    return {token: tf[token] / (1.0 + first_position[token] / n) for token in tf}


def extract_statistical(sentence: Sentence, k: int, stopwords: FrozenSet[str]) -> List[str]:
    """Top-k words by term frequency discounted by first occurrence."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return [w.token for w in _top_k(score_statistical(sentence, stopwords), k)]


def candidate_phrases(sentence: Sentence, stopwords: FrozenSet[str]) -> List[List[str]]:
    """Maximal runs of candidate tokens; stopwords and punctuation split phrases."""
    phrases: List[List[str]] = []
    current: List[str] = []
    for token in sentence.tokens:
        if is_content_token(token, stopwords):
            current.append(token)
        elif current:
            phrases.append(current)
            current = []
    if current:
        phrases.append(current)
    return phrases


def score_rake(sentence: Sentence, stopwords: FrozenSet[str]) -> Dict[str, float]:
    """degree(w) / freq(w) over the within-phrase co-occurrence graph."""
    degree: Counter = Counter()
    freq: Counter = Counter()
    for phrase in candidate_phrases(sentence, stopwords):
        for token in phrase:
            freq[token] += 1
            # co-occurs with every word of its phrase, itself included
            degree[token] += len(phrase)
    return {token: degree[token] / freq[token] for token in freq}


def extract_graph_rake(sentence: Sentence, k: int, stopwords: FrozenSet[str]) -> List[str]:
    """Top-k unigrams by RAKE word score."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return [w.token for w in _top_k(score_rake(sentence, stopwords), k)]


def build_cooccurrence_graph(sentence: Sentence, stopwords: FrozenSet[str], window: int = 2) -> nx.Graph:
    """Undirected graph joining candidates whose positions differ by less than ``window``."""
    graph = nx.Graph()
    tokens = sentence.tokens
    for i, token in enumerate(tokens):
        if not is_content_token(token, stopwords):
            continue
        graph.add_node(token)
        for j in range(i + 1, min(i + window, len(tokens))):
            other = tokens[j]
            if other == token or not is_content_token(other, stopwords):
                continue
            weight = graph.get_edge_data(token, other, default={"weight": 0})["weight"]
            graph.add_edge(token, other, weight=weight + 1)
    return graph


def position_restart_vector(sentence: Sentence, stopwords: FrozenSet[str]) -> Dict[str, float]:
    """Restart weight proportional to the sum of 1/(position+1) over occurrences."""
    weights: Dict[str, float] = defaultdict(float)
    for position, token in enumerate(sentence.tokens):
        if is_content_token(token, stopwords):
            weights[token] += 1.0 / (position + 1)
    total = sum(weights.values())
    return {token: weight / total for token, weight in weights.items()} if total else {}


def personalized_pagerank(graph: nx.Graph, restart: Dict[str, float], damping: float = 0.85, tol: float = 1e-6) -> Dict[str, float]:
    """Personalized PageRank iterated until the L1 change drops below ``tol``."""
    if graph.number_of_nodes() == 0:
        return {}
    # networkx stops once the L1 change is below N * tol
    return nx.pagerank(
        graph,
        alpha=damping,
        personalization=restart,
        tol=tol / graph.number_of_nodes(),
        max_iter=1000,
        weight="weight",
    )


def score_positionrank(sentence: Sentence, stopwords: FrozenSet[str], damping: float = 0.85, tol: float = 1e-6) -> Dict[str, float]:
    graph = build_cooccurrence_graph(sentence, stopwords, window=2)
    return personalized_pagerank(graph, position_restart_vector(sentence, stopwords), damping, tol)


def extract_positionrank(
    sentence: Sentence,
    k: int,
    stopwords: FrozenSet[str],
    damping: float = 0.85,
    tol: float = 1e-6,
) -> List[str]:
    """Top-k words by position-biased PageRank over a window-2 co-occurrence graph."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not 0.0 < damping < 1.0:
        raise ValueError(f"damping must lie in (0, 1), got {damping}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    return [w.token for w in _top_k(score_positionrank(sentence, stopwords, damping, tol), k)]


def extract_random(sentence: Sentence, k: int, rng_seed: int, stopwords: Optional[FrozenSet[str]] = None) -> List[str]:
    """Seeded random pick of k distinct non-punctuation words."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    stopwords = stopwords if stopwords is not None else frozenset()
    candidates = sorted({token for token in sentence.tokens if is_content_token(token, stopwords)})
    rng = random.Random(rng_seed)
    return rng.sample(candidates, min(k, len(candidates)))


def extract_offtheshelf(
    sentence: Sentence,
    k: int,
    stopwords: FrozenSet[str],
    damping: float = 0.85,
    tol: float = 1e-6,
) -> List[str]:
    """Majority vote over the statistical, RAKE and PositionRank extractors."""
    outputs: Sequence[List[str]] = (
        extract_statistical(sentence, k, stopwords),
        extract_graph_rake(sentence, k, stopwords),
        extract_positionrank(sentence, k, stopwords, damping, tol),
    )
    return vote_offtheshelf(outputs, k)
