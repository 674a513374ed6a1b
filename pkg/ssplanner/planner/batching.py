"""
Turning ParCom instances into padded tensor batches.

Instances are encoded once into plain id lists (``EncodedInstance``) and then
collated per batch. The decoder sequence of an instance is::

    [CTX] ctx_1 <sep> ... ctx_c <sep> <sep> <bos> y_1 <eos> <bos> y_2 <eos> ...

where slot 0 is replaced by the projected context vector inside the model.
"""

import logging
import random
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import torch

from ..corpus import BOS_ID, EOS_ID, PAD_ID, SEP_ID, UNK_ID, Vocabulary
from ..parcom import MaskedInstance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncodedInstance:
    """Id-level view of one instance"""
    instance_id: str
    sentences: Tuple[Tuple[Tuple[int, ...], int, bool], ...]   # (ids, position, is_target)
    decoder_ids: Tuple[int, ...]
    labels: Tuple[Tuple[int, int, int], ...]                   # (index, gold id, target position)
    keyword_ids: Tuple[int, ...]
    gold_plan_ids: Tuple[int, ...]
    positive: bool

    @property
    def prefix_length(self) -> int:
        return len(self.decoder_ids) if not self.labels else self.labels[0][0]


def keyword_ids_for(vocab: Vocabulary, keywords: Sequence[str], p: int) -> List[int]:
    """In-vocabulary, non-special, deduplicated keyword ids capped at ``p``."""
    ids: List[int] = []
    for keyword in keywords:
        token_id = vocab.id_of.get(keyword, UNK_ID)
        if vocab.is_special(token_id) or token_id in ids:
            continue
        ids.append(token_id)
        if len(ids) == p:
            break
    return ids


def context_prefix(instance: MaskedInstance, vocab: Vocabulary) -> List[int]:
    """Context tokens in paragraph order, each sentence closed by ``<sep>``, plus a final ``<sep>``."""
    ids: List[int] = []
    for sentence in sorted(instance.context, key=lambda s: s.pos):
        ids.extend(vocab.encode_tokens(sentence.tokens))
        ids.append(SEP_ID)
    ids.append(SEP_ID)
    return ids


def fit_prefix(prefix: Sequence[int], reserved: int, max_seq: int) -> List[int]:
    """Left-truncate the context prefix so that slot 0 plus ``reserved`` target slots fit."""
    room = max(0, max_seq - 1 - reserved)
    return list(prefix[len(prefix) - room:]) if len(prefix) > room else list(prefix)


def target_segments(instance: MaskedInstance, vocab: Vocabulary, max_seq: int) -> List[Tuple[int, List[int]]]:
    """(position, ids) of every target sentence, each capped at an equal share of ``max_seq``."""
    per_sentence = max(1, (max_seq - 2) // len(instance.target) - 2)
    return [(sentence.pos, vocab.encode_tokens(sentence.tokens)[:per_sentence]) for sentence in instance.target]


def decoder_prefix(instance: MaskedInstance, vocab: Vocabulary, max_seq: int, reserve_targets: bool = True) -> List[int]:
    """
    ``[CTX]`` slot plus the left-truncated context, up to the first ``<bos>``.
    Training and decoding share it so both condition on the same tokens.
    """
    reserved = 0
    if reserve_targets:
        reserved = sum(len(ids) + 2 for _, ids in target_segments(instance, vocab, max_seq))
    return [PAD_ID] + fit_prefix(context_prefix(instance, vocab), reserved, max_seq)


def encode_instance(
    instance: MaskedInstance,
    vocab: Vocabulary,
    max_seq: int,
    p: int,
    train_nkps: int,
    keywords: Optional[Sequence[str]] = None,
    include_targets: bool = True,
) -> EncodedInstance:
    """
    Encode one instance. ``keywords`` defaults to the gold training keywords;
    targets are omitted from the decoder sequence of negatives.
    """
    gold_keywords = instance.plan.training_keywords(train_nkps)
    keyword_ids = keyword_ids_for(vocab, gold_keywords if keywords is None else keywords, p)
    gold_plan_ids = tuple(keyword_ids_for(vocab, gold_keywords, len(gold_keywords) or 1))

    sentences = [(tuple(vocab.encode_tokens(s.tokens))[:max_seq], s.pos, False) for s in instance.context]
    if include_targets:
        sentences += [(tuple(vocab.encode_tokens(s.tokens))[:max_seq], s.pos, True) for s in instance.target]

    with_targets = include_targets and not instance.is_negative_nsp
    segments = target_segments(instance, vocab, max_seq) if with_targets else []

    decoder_ids = decoder_prefix(instance, vocab, max_seq, reserve_targets=with_targets)
    labels: List[Tuple[int, int, int]] = []
    for pos, ids in segments:
        segment = [BOS_ID] + ids + [EOS_ID]
        start = len(decoder_ids)
        labels.extend((start + i, segment[i + 1], pos) for i in range(len(segment) - 1))
        decoder_ids.extend(segment)

    return EncodedInstance(
        instance_id=instance.instance_id,
        sentences=tuple(sentences),
        decoder_ids=tuple(decoder_ids),
        labels=tuple(labels),
        keyword_ids=tuple(keyword_ids),
        gold_plan_ids=gold_plan_ids,
        positive=not instance.is_negative_nsp,
    )


@dataclass
class PlannerBatch:
    """Padded tensors for a batch of encoded instances"""
    sentence_ids: torch.Tensor          # (N, L)
    sentence_lengths: torch.Tensor      # (N,)
    sentence_positions: torch.Tensor    # (N,)
    sentence_owner: torch.Tensor        # (N,)
    sentence_is_target: torch.Tensor    # (N,) bool
    decoder_ids: torch.Tensor           # (B, T)
    label_mask: torch.Tensor            # (B, T) bool
    labels: torch.Tensor                # (B, T)
    step_positions: torch.Tensor        # (B, T)
    keyword_ids: torch.Tensor           # (B, p)
    keyword_mask: torch.Tensor          # (B, p) bool
    gold_plan_mask: torch.Tensor        # (B, |V|) bool
    nsp_labels: torch.Tensor            # (B,)
    positive: torch.Tensor              # (B,) bool
    instance_ids: Tuple[str, ...] = ()

    @property
    def size(self) -> int:
        return self.decoder_ids.shape[0]

    @property
    def has_gold_plan(self) -> torch.Tensor:
        return self.gold_plan_mask.any(dim=-1)


def collate(encoded: Sequence[EncodedInstance], vocab_size: int, p: int) -> PlannerBatch:
    """Right-pad a list of encoded instances into one batch."""
    if not encoded:
        raise ValueError("cannot collate an empty batch")

    rows = [(ids, pos, is_target, owner) for owner, item in enumerate(encoded) for ids, pos, is_target in item.sentences]
    width = max(len(ids) for ids, _, _, _ in rows)
    sentence_ids = torch.full((len(rows), width), PAD_ID, dtype=torch.long)
    for row, (ids, _, _, _) in enumerate(rows):
        sentence_ids[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)

    batch_size = len(encoded)
    length = max(len(item.decoder_ids) for item in encoded)
    decoder_ids = torch.full((batch_size, length), PAD_ID, dtype=torch.long)
    label_mask = torch.zeros(batch_size, length, dtype=torch.bool)
    labels = torch.zeros(batch_size, length, dtype=torch.long)
    step_positions = torch.zeros(batch_size, length, dtype=torch.long)
    keyword_ids = torch.full((batch_size, p), PAD_ID, dtype=torch.long)
    keyword_mask = torch.zeros(batch_size, p, dtype=torch.bool)
    gold_plan_mask = torch.zeros(batch_size, vocab_size, dtype=torch.bool)

    for row, item in enumerate(encoded):
        decoder_ids[row, : len(item.decoder_ids)] = torch.tensor(item.decoder_ids, dtype=torch.long)
        for index, gold, pos in item.labels:
            label_mask[row, index] = True
            labels[row, index] = gold
            step_positions[row, index] = pos
        if item.keyword_ids:
            keyword_ids[row, : len(item.keyword_ids)] = torch.tensor(item.keyword_ids[:p], dtype=torch.long)
            keyword_mask[row, : len(item.keyword_ids)] = True
        if item.gold_plan_ids:
            gold_plan_mask[row, list(item.gold_plan_ids)] = True

    positive = torch.tensor([item.positive for item in encoded], dtype=torch.bool)
    return PlannerBatch(
        sentence_ids=sentence_ids,
        sentence_lengths=torch.tensor([len(ids) for ids, _, _, _ in rows], dtype=torch.long),
        sentence_positions=torch.tensor([pos for _, pos, _, _ in rows], dtype=torch.long),
        sentence_owner=torch.tensor([owner for _, _, _, owner in rows], dtype=torch.long),
        sentence_is_target=torch.tensor([is_target for _, _, is_target, _ in rows], dtype=torch.bool),
        decoder_ids=decoder_ids,
        label_mask=label_mask,
        labels=labels,
        step_positions=step_positions,
        keyword_ids=keyword_ids,
        keyword_mask=keyword_mask,
        gold_plan_mask=gold_plan_mask,
        nsp_labels=positive.to(torch.float32),
        positive=positive,
        instance_ids=tuple(item.instance_id for item in encoded),
    )


def iterate_batches(
    encoded: Sequence[EncodedInstance],
    batch_size: int,
    vocab_size: int,
    p: int,
    seed: Optional[int] = None,
) -> Iterator[PlannerBatch]:
    """Collate consecutive chunks; a seed shuffles the order first."""
    order = list(range(len(encoded)))
    if seed is not None:
        random.Random(seed).shuffle(order)
    for start in range(0, len(order), batch_size):
        yield collate([encoded[i] for i in order[start:start + batch_size]], vocab_size, p)
