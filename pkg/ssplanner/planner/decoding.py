"""
Autoregressive decoding of the masked target sentences.
"""

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence

import torch

from ..config import derive_seed
from ..corpus import BOS_ID, EOS_ID, PAD_ID, SEP_ID, Vocabulary
from ..parcom import MaskedInstance
from .batching import collate, decoder_prefix, encode_instance, keyword_ids_for
from .model import SSPlanner

logger = logging.getLogger(__name__)

DecodeMode = Literal["greedy", "nucleus"]

# never emitted by the decoder
_BANNED_IDS = (PAD_ID, BOS_ID, SEP_ID)


@dataclass
class DecodeState:
    """Per-sentence decoding trace"""
    generated: List[int] = field(default_factory=list)
    gates: List[float] = field(default_factory=list)
    alphas: List[List[float]] = field(default_factory=list)


@dataclass
class DecodeResult:
    sentences: List[List[str]]
    keywords_used: List[str]
    states: List[DecodeState]
    prefix_ids: List[int] = field(default_factory=list)   # decoder input before the first <bos>


def select_next(probs: torch.Tensor, mode: DecodeMode, top_p: float, generator: torch.Generator) -> int:
    """Greedy argmax or nucleus sampling from a 1-D distribution."""
    if mode == "greedy":
        return int(torch.argmax(probs))
    sorted_probs, order = probs.sort(descending=True)
    cumulative = sorted_probs.cumsum(dim=0)
    keep = (cumulative - sorted_probs) < top_p
    keep[0] = True
    nucleus = sorted_probs * keep.to(sorted_probs.dtype)
    choice = torch.multinomial(nucleus / nucleus.sum(), 1, generator=generator)
    return int(order[choice])


def sample_random_keywords(pool: Sequence[str], n: int, rng_seed: int) -> List[str]:
    """Seeded uniform draw of ``n`` distinct keywords from ``pool``."""
    candidates = sorted(set(pool))
    return random.Random(rng_seed).sample(candidates, min(n, len(candidates)))


def decode_targets(
    model: SSPlanner,
    instance: MaskedInstance,
    vocab: Vocabulary,
    mode: DecodeMode = "greedy",
    top_p: float = 1.0,
    keywords: Optional[Sequence[str]] = None,
    max_len: int = 32,
    rng_seed: int = 0,
) -> DecodeResult:
    """
    Decode one sentence per masked slot, each conditioned on the previous ones.

    ``keywords=None`` uses the model's own top-p plan prediction; otherwise the
    given keywords are copied from (an empty list disables copying).
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    if mode not in ("greedy", "nucleus"):
        raise ValueError(f"unknown decode mode {mode!r}")
    if not 0.0 < top_p <= 1.0:
        raise ValueError(f"top_p must lie in (0, 1], got {top_p}")

    config = model.config
    generator = torch.Generator().manual_seed(rng_seed)
    model.eval()
    with torch.no_grad():
        encoded = encode_instance(instance, vocab, config.max_seq, config.p, 1, keywords=[], include_targets=False)
        batch = collate([encoded], config.vocab_size, config.p)
        encoder = model.encode(batch)
        context_vector = encoder.context_vector

        if keywords is None:
            ids, _ = model.top_keywords(encoder.plan_probs, config.p)
            chosen = ids[0].tolist()
        else:
            chosen = keyword_ids_for(vocab, keywords, config.p)
        keyword_ids = torch.full((1, config.p), PAD_ID, dtype=torch.long)
        keyword_mask = torch.zeros(1, config.p, dtype=torch.bool)
        if chosen:
            keyword_ids[0, : len(chosen)] = torch.tensor(chosen, dtype=torch.long)
            keyword_mask[0, : len(chosen)] = True
        keyword_probs = model.keyword_probs(encoder.plan_probs, keyword_ids, keyword_mask)

        sequence = decoder_prefix(instance, vocab, config.max_seq)
        prefix_ids = list(sequence)

        sentences: List[List[str]] = []
        states: List[DecodeState] = []
        for slot in instance.target:
            state = DecodeState()
            if len(sequence) < config.max_seq:
                sequence.append(BOS_ID)
            while len(state.generated) < max_len and len(sequence) < config.max_seq:
                hidden = model.decoder_hidden(context_vector, torch.tensor([sequence], dtype=torch.long))[:, -1]
                mixed, _, gate, alpha = model.mixed_step_probs(
                    hidden, context_vector, keyword_probs, keyword_ids, keyword_mask,
                    torch.tensor([slot.pos], dtype=torch.long),
                )
                probs = mixed[0].clone()
                probs[list(_BANNED_IDS)] = 0.0
                probs = probs / probs.sum()
                token = select_next(probs, mode, top_p, generator)
                state.gates.append(float(gate[0]))
                state.alphas.append(alpha[0, : len(chosen)].tolist())
                if token == EOS_ID:
                    break
                state.generated.append(token)
                sequence.append(token)
            if len(sequence) < config.max_seq:
                sequence.append(EOS_ID)
            sentences.append(vocab.decode(state.generated))
            states.append(state)

    return DecodeResult(sentences=sentences, keywords_used=vocab.decode(chosen), states=states, prefix_ids=prefix_ids)


def predict_keywords(model: SSPlanner, instance: MaskedInstance, vocab: Vocabulary) -> List[str]:
    """The model's top-p plan keywords for ``instance`` (special tokens excluded)."""
    config = model.config
    model.eval()
    with torch.no_grad():
        encoded = encode_instance(instance, vocab, config.max_seq, config.p, 1, keywords=[], include_targets=False)
        plan_probs = model.encode(collate([encoded], config.vocab_size, config.p)).plan_probs
        ids, _ = model.top_keywords(plan_probs, config.p)
    return vocab.decode(ids[0].tolist())


def keep_ratio(keywords: Sequence[str], ratio: float, rng_seed: int) -> List[str]:
    """Seeded subset of ``ceil(ratio * n)`` keywords, kept in their original order."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"keyword ratio must lie in [0, 1], got {ratio}")
    n_keep = math.ceil(ratio * len(keywords))
    kept = sorted(random.Random(rng_seed).sample(range(len(keywords)), n_keep))
    return [keywords[i] for i in kept]


def choose_keywords(
    model: SSPlanner,
    instance: MaskedInstance,
    vocab: Vocabulary,
    source: str,
    train_nkps: int,
    rng_seed: int,
    plan_prediction: bool = True,
) -> List[str]:
    """
    Keywords for one instance from ``predicted``, ``ground_truth`` or ``random``.
    Without plan prediction the "predicted" keywords are random context words.
    """
    p = model.config.p
    if source == "ground_truth":
        return [k for k in instance.plan.training_keywords(train_nkps) if not vocab.is_special(vocab.id_of.get(k, 0))][:p]
    if source == "random":
        pool = [token for token in vocab.token_of if not vocab.is_special(vocab.id_of[token])]
        return sample_random_keywords(pool, p, rng_seed)
    if source != "predicted":
        raise ValueError(f"unknown keyword source {source!r}")
    if plan_prediction:
        return predict_keywords(model, instance, vocab)
    pool = [
        token for sentence in instance.context for token in sentence.tokens
        if token in vocab and any(ch.isalnum() for ch in token)
    ]
    return sample_random_keywords(pool, p, rng_seed)


def complete_instances(
    model: SSPlanner,
    vocab: Vocabulary,
    instances: Sequence[MaskedInstance],
    keyword_source: str = "predicted",
    keyword_ratio: float = 1.0,
    mode: DecodeMode = "greedy",
    top_p: float = 1.0,
    max_len: int = 32,
    seed: int = 0,
    train_nkps: int = 3,
    plan_prediction: bool = True,
) -> List[Dict]:
    """Decode every positive instance into a completion record, ordered by id."""
    records = []
    for instance in sorted(instances, key=lambda i: i.instance_id):
        if instance.is_negative_nsp:
            continue
        key = instance.instance_id
        keywords = choose_keywords(
            model, instance, vocab, keyword_source, train_nkps, derive_seed(seed, f"keywords:{key}"), plan_prediction
        )
        keywords = keep_ratio(keywords, keyword_ratio, derive_seed(seed, f"ratio:{key}"))
        result = decode_targets(
            model, instance, vocab, mode=mode, top_p=top_p, keywords=keywords,
            max_len=max_len, rng_seed=derive_seed(seed, f"decode:{key}"),
        )
        records.append({
            "id": key,
            "keywords_used": result.keywords_used,
            "generated": [" ".join(sentence) for sentence in result.sentences],
        })
    logger.info(f"Decoded {len(records)} instances with {keyword_source} keywords (ratio {keyword_ratio})")
    return records
