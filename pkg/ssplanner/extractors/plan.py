"""
Plan assembly: majority voting across off-the-shelf extractors and the final
per-sentence / flattened keyword plan.
"""

import logging
import random
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoredWord:
    """A candidate keyword and its extractor score"""
    token: str
    score: float


@dataclass(frozen=True)
class KeywordPlan:
    """Per-target-sentence keyword lists plus their shuffled union"""
    per_sentence: Tuple[Tuple[str, ...], ...]
    flat: Tuple[str, ...]
    nkps: int

    def training_keywords(self, train_nkps: int) -> List[str]:
        """Top ``train_nkps`` keywords of every sentence, deduplicated in order."""
        seen: Dict[str, None] = {}
        for keywords in self.per_sentence:
            for keyword in keywords[:train_nkps]:
                seen.setdefault(keyword, None)
        return list(seen)

    def to_dict(self) -> Dict[str, List]:
        return {"per_sentence": [list(words) for words in self.per_sentence], "flat": list(self.flat)}

    @classmethod
    def from_dict(cls, payload: Dict[str, List], nkps: int = 5) -> "KeywordPlan":
        per_sentence = tuple(tuple(words) for words in payload.get("per_sentence", []))
        longest = max((len(words) for words in per_sentence), default=0)
        return cls(per_sentence=per_sentence, flat=tuple(payload.get("flat", [])), nkps=max(nkps, longest))

    @classmethod
    def empty(cls, n_sentences: int = 0, nkps: int = 5) -> "KeywordPlan":
        return cls(per_sentence=tuple(() for _ in range(n_sentences)), flat=(), nkps=nkps)


def vote_offtheshelf(outputs: Sequence[Sequence[str]], k: int) -> List[str]:
    """
    Combine three extractor outputs for one sentence.

    Words found by at least two extractors come first, ordered by how many
    lists contain them and then by their mean rank. Remaining slots are filled
    with the best mean-rank words found by a single extractor.
    """
    if len(outputs) != 3:
        raise ValueError(f"majority voting expects three keyword lists, got {len(outputs)}")

    ranks: Dict[str, List[int]] = defaultdict(list)
    for keywords in outputs:
        seen = set()
        for rank, keyword in enumerate(keywords):
            if keyword in seen:
                continue
            seen.add(keyword)
            ranks[keyword].append(rank)

    def mean_rank(word: str) -> float:
        return sum(ranks[word]) / len(ranks[word])

    voted = sorted(
        (word for word in ranks if len(ranks[word]) >= 2),
        key=lambda word: (-len(ranks[word]), mean_rank(word), word),
    )
    backfill = sorted(
        (word for word in ranks if len(ranks[word]) < 2),
        key=lambda word: (mean_rank(word), word),
    )
    return (voted + backfill)[:k]


def finalize_plan(per_sentence_keywords: Sequence[Sequence[str]], nkps: int, rng_seed: int) -> KeywordPlan:
    """Split multiword candidates into unigrams, cap each sentence and shuffle the union."""
    if nkps < 1:
        raise ValueError(f"nkps must be >= 1, got {nkps}")

    per_sentence: List[Tuple[str, ...]] = []
    union: Dict[str, None] = {}
    for candidates in per_sentence_keywords:
        unigrams: Dict[str, None] = {}
        for candidate in candidates:
            for unigram in candidate.split():
                unigrams.setdefault(unigram, None)
        capped = tuple(list(unigrams)[:nkps])
        if not capped:
            logger.debug("Extractor produced an empty keyword list for a target sentence")
        per_sentence.append(capped)
        for unigram in capped:
            union.setdefault(unigram, None)

    flat = list(union)
    random.Random(rng_seed).shuffle(flat)
    return KeywordPlan(per_sentence=tuple(per_sentence), flat=tuple(flat), nkps=nkps)
