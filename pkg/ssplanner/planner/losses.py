"""
Loss terms and the copy/LM mixture.

All functions are pure tensor operations; logarithms are floored at ``EPS``.
"""

from typing import Iterable, Union

import torch

EPS = 1e-12

Number = Union[float, torch.Tensor]


def _safe_log(values: torch.Tensor) -> torch.Tensor:
    return values.clamp_min(EPS).log()


def multi_hot(gold_ids: Iterable[Iterable[int]], vocab_size: int, dtype=torch.bool) -> torch.Tensor:
    """Rows of deduplicated gold keyword ids as a (B, |V|) indicator matrix."""
    rows = [sorted(set(int(i) for i in ids)) for ids in gold_ids]
    mask = torch.zeros(len(rows), vocab_size, dtype=dtype)
    for row, ids in enumerate(rows):
        for token_id in ids:
            if not 0 <= token_id < vocab_size:
                raise ValueError(f"gold keyword id {token_id} outside vocabulary of size {vocab_size}")
            mask[row, token_id] = True
    return mask


def plan_loss(vocab_probs: torch.Tensor, gold_mask: torch.Tensor) -> torch.Tensor:
    """
    Multi-hot cross-entropy ``-sum_{k in gold} log p_k`` per row.

    ``gold_mask`` is a boolean (or 0/1) tensor of the same shape as
    ``vocab_probs``; duplicated ids are already collapsed by the indicator.
    """
    if vocab_probs.shape != gold_mask.shape:
        raise ValueError(f"shape mismatch: probs {tuple(vocab_probs.shape)} vs gold {tuple(gold_mask.shape)}")
    weights = gold_mask.to(vocab_probs.dtype)
    return -(weights * _safe_log(vocab_probs)).sum(dim=-1)


def nsp_loss(prob: torch.Tensor, label: torch.Tensor) -> torch.Tensor:
    """Binary cross-entropy of the next-sentence probability, elementwise."""
    label = label.to(prob.dtype)
    return -(label * _safe_log(prob) + (1.0 - label) * _safe_log(1.0 - prob))


def mix_distributions(
    gate: torch.Tensor,
    alpha: torch.Tensor,
    keyword_ids: torch.Tensor,
    lm_probs: torch.Tensor,
) -> torch.Tensor:
    """
    ``P(y) = gate * copy + (1 - gate) * lm`` where ``copy`` scatters the keyword
    attention onto the vocabulary. Repeated ids accumulate their mass.
    """
    vocab_size = lm_probs.shape[-1]
    if keyword_ids.numel() and (int(keyword_ids.min()) < 0 or int(keyword_ids.max()) >= vocab_size):
        raise ValueError(f"keyword id outside vocabulary of size {vocab_size}")
    copy = torch.zeros_like(lm_probs).scatter_add(-1, keyword_ids, alpha.to(lm_probs.dtype))
    gate = gate.unsqueeze(-1)
    return gate * copy + (1.0 - gate) * lm_probs


def generation_loss(mixed_probs: torch.Tensor, gold_ids: torch.Tensor) -> torch.Tensor:
    """Summed ``-log P(gold)`` over all decoding steps."""
    if mixed_probs.shape[0] != gold_ids.shape[0]:
        raise ValueError(f"{mixed_probs.shape[0]} decoding steps for {gold_ids.shape[0]} gold tokens")
    gold_probs = mixed_probs.gather(-1, gold_ids.long().unsqueeze(-1)).squeeze(-1)
    return -_safe_log(gold_probs).sum()


def total_loss(plan: Number, nsp: Number, gen: Number, lambda_plan: float, lambda_next: float) -> Number:
    """Weighted objective ``lambda_plan * L_plan + lambda_next * L_next + L_gen``."""
    if lambda_plan < 0 or lambda_next < 0:
        raise ValueError(f"loss weights must be non-negative, got {lambda_plan}, {lambda_next}")
    return lambda_plan * plan + lambda_next * nsp + gen
