"""
Attention-based plan keywords: context words that the target tokens attend to
most, read from a trained planner.
"""

import logging
from dataclasses import replace
from typing import Dict, List, Optional, Tuple

import torch

from ..corpus import BOS_ID, Vocabulary
from ..exceptions import UnsupportedExtractorError, VocabularyMismatchError
from ..parcom import MaskedInstance
from ..planner.batching import collate, encode_instance
from ..planner.model import SSPlanner

logger = logging.getLogger(__name__)


def attention_scores(
    model: SSPlanner,
    instance: MaskedInstance,
    vocab: Vocabulary,
    sentence_index: Optional[int] = None,
) -> List[Tuple[str, float]]:
    """
    Mean head-0 attention (averaged over layers) received by every context
    word from the target tokens, in order of first occurrence.
    """
    if len(model.blocks) == 0:
        raise UnsupportedExtractorError("model has no attention layers")
    if model.vocab_fingerprint is not None and model.vocab_fingerprint != vocab.fingerprint():
        raise VocabularyMismatchError("attention model was trained with a different vocabulary")
    if sentence_index is not None and not 0 <= sentence_index < instance.t:
        raise ValueError(f"sentence_index {sentence_index} outside 0..{instance.t - 1}")

    positive = replace(instance, is_negative_nsp=False) if instance.is_negative_nsp else instance
    config = model.config
    encoded = encode_instance(positive, vocab, config.max_seq, config.p, 1, keywords=[])

    model.eval()
    with torch.no_grad():
        context_vector = model.encode(collate([encoded], config.vocab_size, config.p)).context_vector
        _, attentions = model.decoder_hidden(
            context_vector, torch.tensor([encoded.decoder_ids], dtype=torch.long), return_attention=True
        )
    if not attentions:
        raise UnsupportedExtractorError("model returned no attention maps")

    head0 = torch.stack([layer[0, 0] for layer in attentions]).mean(dim=0)

    wanted_pos = instance.target[sentence_index].pos if sentence_index is not None else None
    # query rows at target tokens; the <bos> row carries no target word
    rows = [
        index for index, _, pos in encoded.labels
        if encoded.decoder_ids[index] != BOS_ID and (wanted_pos is None or pos == wanted_pos)
    ]
    if not rows:
        return []
    received = head0[rows].mean(dim=0)

    tokens = vocab.decode(encoded.decoder_ids)
    totals: Dict[str, List[float]] = {}
    for column in range(1, encoded.prefix_length):
        token_id = encoded.decoder_ids[column]
        token = tokens[column]
        if vocab.is_special(token_id) or not any(ch.isalnum() for ch in token):
            continue
        totals.setdefault(token, []).append(float(received[column]))
    return [(token, sum(values) / len(values)) for token, values in totals.items()]


def extract_attention(
    model: SSPlanner,
    instance: MaskedInstance,
    vocab: Vocabulary,
    k: int,
    sentence_index: Optional[int] = None,
) -> List[str]:
    """Top-k context words by received attention; ties keep first occurrence order."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores = attention_scores(model, instance, vocab, sentence_index)
    ranked = sorted(enumerate(scores), key=lambda item: (-item[1][1], item[0]))
    return [token for _, (token, _) in ranked[:k]]
