"""
Automatic metrics: sentence BLEU, vector extrema, module accuracies (NSP, PP)
and keyword usage, plus the aggregated ``MetricReport``.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import torch
from sacrebleu.metrics import BLEU

from .corpus import Vocabulary
from .exceptions import AlignmentError
from .parcom import MaskedInstance
from .planner.batching import encode_instance, iterate_batches
from .planner.model import SSPlanner

logger = logging.getLogger(__name__)

_BLEU_CACHE: Dict[int, BLEU] = {}


def _bleu_metric(max_n: int) -> BLEU:
    if max_n not in _BLEU_CACHE:
        # add-one on n >= 2, no effective-order shortcut
        _BLEU_CACHE[max_n] = BLEU(
            tokenize="none",
            smooth_method="add-k",
            smooth_value=1,
            effective_order=False,
            max_ngram_order=max_n,
        )
    return _BLEU_CACHE[max_n]


def bleu(hypothesis: Sequence[str], reference: Sequence[str], max_n: int = 4) -> float:
    """Smoothed sentence BLEU in [0, 1] over pre-tokenized sequences."""
    if not reference:
        raise ValueError("reference must not be empty")
    if not hypothesis:
        return 0.0
    score = _bleu_metric(max_n).sentence_score(" ".join(hypothesis), [" ".join(reference)]).score / 100.0
    return float(min(1.0, max(0.0, score)))


def extrema_vector(tokens: Sequence[str], embeddings: np.ndarray, vocab: Vocabulary) -> np.ndarray:
    """Per dimension, the entry of largest magnitude across the token embeddings."""
    vectors = embeddings[vocab.encode_tokens(tokens)]
    picks = np.abs(vectors).argmax(axis=0)
    return vectors[picks, np.arange(vectors.shape[1])]


def vector_extrema(
    hypothesis: Sequence[str],
    reference: Sequence[str],
    embeddings: np.ndarray,
    vocab: Vocabulary,
) -> float:
    """Cosine similarity of the extrema vectors; 0.0 when either is all zeros or empty."""
    if not hypothesis or not reference:
        return 0.0
    hyp = extrema_vector(hypothesis, embeddings, vocab)
    ref = extrema_vector(reference, embeddings, vocab)
    norm = float(np.linalg.norm(hyp) * np.linalg.norm(ref))
    if norm == 0.0:
        return 0.0
    return float(np.clip(np.dot(hyp, ref) / norm, -1.0, 1.0))


def model_embeddings(model: SSPlanner) -> np.ndarray:
    return model.token_embeddings.weight.detach().cpu().to(torch.float64).numpy()


def nsp_accuracy(model: SSPlanner, vocab: Vocabulary, instances: Sequence[MaskedInstance], batch_size: int = 32) -> float:
    """Share of instances whose ``p_next > 0.5`` agrees with the positive label (0.5 counts as negative)."""
    if not instances:
        raise ValueError("nsp_accuracy needs at least one instance")
    config = model.config
    encoded = [encode_instance(i, vocab, config.max_seq, config.p, 1, keywords=[]) for i in instances]
    correct = 0
    model.eval()
    with torch.no_grad():
        for batch in iterate_batches(encoded, batch_size, config.vocab_size, config.p):
            predicted = model.encode(batch).nsp_prob > 0.5
            correct += int((predicted == batch.positive).sum())
    return correct / len(instances)


def pp_accuracy(
    model: SSPlanner,
    vocab: Vocabulary,
    instances: Sequence[MaskedInstance],
    train_nkps: int,
    batch_size: int = 32,
) -> Tuple[float, int]:
    """
    Mean recall@p of the predicted plan against the gold training keywords.
    Instances without in-vocabulary gold keywords are skipped; returns
    ``(accuracy, skipped)``.
    """
    if not instances:
        raise ValueError("pp_accuracy needs at least one instance")
    config = model.config
    encoded = [encode_instance(i, vocab, config.max_seq, config.p, train_nkps) for i in instances]
    recalls: List[float] = []
    skipped = 0
    model.eval()
    with torch.no_grad():
        for batch in iterate_batches(encoded, batch_size, config.vocab_size, config.p):
            top_ids, _ = model.top_keywords(model.encode(batch).plan_probs, config.p)
            for row in range(batch.size):
                gold = set(batch.gold_plan_mask[row].nonzero().flatten().tolist())
                if not gold:
                    skipped += 1
                    continue
                recalls.append(len(gold & set(top_ids[row].tolist())) / len(gold))
    if skipped:
        logger.warning(f"Skipped {skipped} instances with an empty gold plan")
    return (sum(recalls) / len(recalls) if recalls else 0.0), skipped


def keyword_usage_rate(generated: Iterable[Sequence[str]], keywords: Iterable[str]) -> float:
    """Fraction of distinct keywords that appear as a token anywhere in the generated sentences."""
    distinct = set(keywords)
    if not distinct:
        raise ValueError("keyword_usage_rate needs a non-empty keyword set")
    produced = {token for sentence in generated for token in sentence}
    return len(distinct & produced) / len(distinct)


@dataclass
class MetricReport:
    """Aggregated evaluation metrics and the counts behind them"""
    bleu: float = 0.0
    vector_extrema: float = 0.0
    nsp_accuracy: Optional[float] = None
    pp_accuracy: Optional[float] = None
    keyword_usage_rate: Optional[float] = None
    n_completions: int = 0
    n_nsp: int = 0
    n_pp: int = 0
    pp_skipped: int = 0
    n_keyword_sets: int = 0

    FIELDS = (
        "bleu", "vector_extrema", "nsp_accuracy", "pp_accuracy", "keyword_usage_rate",
        "n_completions", "n_nsp", "n_pp", "pp_skipped", "n_keyword_sets",
    )

    def to_dict(self) -> Dict[str, Optional[float]]:
        payload = asdict(self)
        return {name: payload[name] for name in self.FIELDS}

    def format_table(self) -> str:
        """Fixed-order two-column table for terminal output."""
        lines = [f"{'metric':<20} value", f"{'-' * 20} {'-' * 10}"]
        for name, value in self.to_dict().items():
            if value is None:
                shown = "n/a"
            elif isinstance(value, float):
                shown = f"{value:.4f}"
            else:
                shown = str(value)
            lines.append(f"{name:<20} {shown}")
        return "\n".join(lines)


def align_completions(
    completions: Sequence[Mapping],
    references: Sequence[MaskedInstance],
) -> List[Tuple[Mapping, MaskedInstance]]:
    """Pair completions with reference instances by id, ordered by id."""
    by_id = {instance.instance_id: instance for instance in references}
    generated_ids = [str(record["id"]) for record in completions]
    mismatched = sorted(set(generated_ids) ^ set(by_id))
    if mismatched:
        raise AlignmentError(
            f"{len(mismatched)} ids differ between completions and references; first: {mismatched[0]}",
            offending_id=mismatched[0],
        )
    if len(set(generated_ids)) != len(generated_ids):
        duplicate = sorted(i for i in set(generated_ids) if generated_ids.count(i) > 1)[0]
        raise AlignmentError(f"duplicate completion id {duplicate}", offending_id=duplicate)
    return sorted(((record, by_id[str(record["id"])]) for record in completions), key=lambda pair: pair[1].instance_id)


def evaluate_completions(
    completions: Sequence[Mapping],
    references: Sequence[MaskedInstance],
    embeddings: np.ndarray,
    vocab: Vocabulary,
) -> MetricReport:
    """Generation metrics over aligned completions and positive references."""
    pairs = align_completions(completions, references)
    if not pairs:
        raise ValueError("no completions to evaluate")

    bleu_scores, extrema_scores, usage = [], [], []
    for record, instance in pairs:
        sentences = [str(sentence).split() for sentence in record.get("generated", [])]
        hypothesis = [token for sentence in sentences for token in sentence]
        reference = [token for target in instance.target for token in target.tokens]
        bleu_scores.append(bleu(hypothesis, reference))
        extrema_scores.append(vector_extrema(hypothesis, reference, embeddings, vocab))
        keywords = record.get("keywords_used") or []
        if keywords:
            usage.append(keyword_usage_rate(sentences, keywords))

    return MetricReport(
        bleu=float(np.mean(bleu_scores)),
        vector_extrema=float(np.mean(extrema_scores)),
        keyword_usage_rate=float(np.mean(usage)) if usage else None,
        n_completions=len(pairs),
        n_keyword_sets=len(usage),
    )


def evaluate_instances(
    model: SSPlanner,
    vocab: Vocabulary,
    instances: Sequence[MaskedInstance],
    completions: Sequence[Mapping],
    train_nkps: int,
    batch_size: int = 32,
) -> MetricReport:
    """
    Full report: generation metrics against the positive instances, NSP accuracy
    over every instance and PP accuracy over the positives.
    """
    positives = [instance for instance in instances if not instance.is_negative_nsp]
    report = evaluate_completions(completions, positives, model_embeddings(model), vocab)
    report.nsp_accuracy = nsp_accuracy(model, vocab, instances, batch_size)
    report.n_nsp = len(instances)
    report.pp_accuracy, report.pp_skipped = pp_accuracy(model, vocab, positives, train_nkps, batch_size)
    report.n_pp = len(positives) - report.pp_skipped
    return report
