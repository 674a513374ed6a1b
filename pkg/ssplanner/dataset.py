"""
ParCom dataset assembly: paragraph split, vocabulary, instance enumeration
with gold plans, next-sentence negatives and the on-disk layout::

    <dataset_dir>/train.jsonl valid.jsonl test.jsonl vocab.json stats.json
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

from .config import derive_seed
from .corpus import Paragraph, Vocabulary, build_vocab
from .exceptions import CorpusError
from .parcom import MaskedInstance, MaskSpec, enumerate_instances, make_nsp_negatives, read_jsonl, split_paragraphs, write_jsonl
from .extractors.plan import KeywordPlan

logger = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")


@dataclass
class DatasetSplits:
    """Instances of every split plus the shared vocabulary and statistics"""
    train: List[MaskedInstance]
    valid: List[MaskedInstance]
    test: List[MaskedInstance]
    vocab: Vocabulary
    stats: Dict[str, Any] = field(default_factory=dict)

    def split(self, name: str) -> List[MaskedInstance]:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    def save(self, dataset_dir: str) -> None:
        os.makedirs(dataset_dir, exist_ok=True)
        for name in SPLITS:
            write_jsonl(self.split(name), os.path.join(dataset_dir, f"{name}.jsonl"))
        self.vocab.save(os.path.join(dataset_dir, "vocab.json"))
        with open(os.path.join(dataset_dir, "stats.json"), "w", encoding="utf-8") as f:
            json.dump(self.stats, f, indent=2, sort_keys=True)
            f.write("\n")
        logger.info(f"Wrote dataset to {dataset_dir}")

    @classmethod
    def load(cls, dataset_dir: str) -> "DatasetSplits":
        vocab_path = os.path.join(dataset_dir, "vocab.json")
        if not os.path.exists(vocab_path):
            raise CorpusError(f"dataset not found: {vocab_path}")
        splits = {name: read_jsonl(os.path.join(dataset_dir, f"{name}.jsonl")) for name in SPLITS}
        stats_path = os.path.join(dataset_dir, "stats.json")
        stats = {}
        if os.path.exists(stats_path):
            with open(stats_path, "r", encoding="utf-8") as f:
                stats = json.load(f)
        return cls(vocab=Vocabulary.load(vocab_path), stats=stats, **splits)


def split_stats(paragraphs: Sequence[Paragraph], instances: Sequence[MaskedInstance]) -> Dict[str, Any]:
    """Paragraph, instance and keyword counts of one split."""
    keywords = [len(instance.plan.flat) for instance in instances]
    empty = sum(1 for instance in instances for words in instance.plan.per_sentence if not words)
    return {
        "paragraphs": len(paragraphs),
        "sentences": sum(len(paragraph) for paragraph in paragraphs),
        "instances": len(instances),
        "negatives": sum(1 for instance in instances if instance.is_negative_nsp),
        "keywords": sum(keywords),
        "keywords_per_instance": sum(keywords) / len(keywords) if keywords else 0.0,
        "empty_keyword_lists": empty,
    }


def build_dataset(
    paragraphs: Sequence[Paragraph],
    plan_fn: Optional[Callable[[Paragraph, MaskSpec], KeywordPlan]],
    t_max: int,
    seed: int,
    max_vocab: int = 50000,
    nsp_negatives: bool = True,
) -> DatasetSplits:
    """Split paragraphs 0.9/0.05/0.05, build the train vocabulary and every instance."""
    if not paragraphs:
        raise CorpusError("corpus contains no paragraph within the configured length bounds")

    parts = dict(zip(SPLITS, split_paragraphs(paragraphs, derive_seed(seed, "split"))))
    vocab = build_vocab(parts["train"], max_vocab)

    instances: Dict[str, List[MaskedInstance]] = {}
    stats: Dict[str, Any] = {"vocab_size": len(vocab), "t_max": t_max, "seed": seed}
    for name in SPLITS:
        split_instances = list(enumerate_instances(parts[name], t_max, plan_fn))
        if nsp_negatives and split_instances:
            if len(parts[name]) >= 2:
                split_instances = make_nsp_negatives(split_instances, derive_seed(seed, f"nsp:{name}"))
            else:
                logger.warning(f"Split {name} has fewer than two paragraphs; no next-sentence negatives")
        instances[name] = split_instances
        stats[name] = split_stats(parts[name], split_instances)
        logger.info(f"{name}: {stats[name]['paragraphs']} paragraphs, {stats[name]['instances']} instances")

    return DatasetSplits(vocab=vocab, stats=stats, **instances)
