"""
Syntactic plan keywords: a lexicon-plus-suffix part-of-speech tagger and the
noun / verb / noun+verb extractors built on it.
"""

import logging
import os
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Sequence

from ..corpus import Sentence

logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "data")

NOUN, VERB, NUM, PUNCT = "noun", "verb", "num", "punct"
MODES = {
    "noun": frozenset({NOUN}),
    "verb": frozenset({VERB}),
    "nounverb": frozenset({NOUN, VERB}),
    "noun+verb": frozenset({NOUN, VERB}),
}


@lru_cache(maxsize=None)
def _read_lexicon(path: str) -> Dict[str, str]:
    lexicon: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{line_number}: expected '<token> <tag>', got {line!r}")
            lexicon[parts[0].lower()] = parts[1].lower()
    logger.debug(f"Loaded {len(lexicon)} lexicon entries from {path}")
    return lexicon


def load_pos_lexicon(path: Optional[str] = None) -> Dict[str, str]:
    """Load a newline-delimited ``token tag`` lexicon (defaults to the shipped one)."""
    return dict(_read_lexicon(path or os.path.join(DATA_DIR, "pos_lexicon.txt")))


def _suffix_tag(token: str) -> str:
    if not any(ch.isalnum() for ch in token):
        return PUNCT
    if token.isdigit() or token.replace(".", "", 1).replace(",", "").isdigit():
        return NUM
    if len(token) > 3 and (token.endswith("ed") or token.endswith("ing")):
        return VERB
    # "-s" falls back to noun, as does everything else
    return NOUN


def tag_pos(sentence: Sentence, lexicon: Mapping[str, str]) -> List[str]:
    """Tag each token: lexicon entry first, then suffix rules."""
    return [lexicon.get(token) or _suffix_tag(token) for token in sentence.tokens]


def extract_syntactic(sentence: Sentence, tags: Sequence[str], mode: str, k: int) -> List[str]:
    """Tokens whose tag matches ``mode`` in sentence order, deduplicated and capped at ``k``."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(tags) != len(sentence.tokens):
        raise ValueError(f"got {len(tags)} tags for {len(sentence.tokens)} tokens")
    if mode not in MODES:
        raise ValueError(f"unknown syntactic mode {mode!r}; expected one of {sorted(MODES)}")
    wanted = MODES[mode]
    keywords: List[str] = []
    for token, tag in zip(sentence.tokens, tags):
        if tag in wanted and token not in keywords:
            keywords.append(token)
        if len(keywords) == k:
            break
    return keywords
