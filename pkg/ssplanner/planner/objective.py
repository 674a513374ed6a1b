"""
The weighted training objective over a batch and its gradients.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict

import torch

from ..exceptions import NonFiniteLossError
from .batching import PlannerBatch
from .losses import generation_loss, nsp_loss, plan_loss, total_loss
from .model import SSPlanner

logger = logging.getLogger(__name__)


@dataclass
class ObjectiveTerms:
    """Loss components of one batch; tensors keep their graph"""
    plan: torch.Tensor
    nsp: torch.Tensor
    gen: torch.Tensor
    total: torch.Tensor
    gen_tokens: int
    positives: int

    @property
    def gen_per_token(self) -> float:
        return float(self.gen) * max(self.positives, 1) / max(self.gen_tokens, 1)

    def as_floats(self) -> Dict[str, float]:
        return {
            "plan": float(self.plan),
            "nsp": float(self.nsp),
            "gen": float(self.gen),
            "total": float(self.total),
            "gen_per_token": self.gen_per_token,
        }


def compute_objective(
    model: SSPlanner,
    batch: PlannerBatch,
    lambda_plan: float,
    lambda_next: float,
) -> ObjectiveTerms:
    """
    Batch means of the three terms. Plan and generation losses average over
    positive instances (generation is summed within an instance); the NSP loss
    averages over every instance.
    """
    outputs = model(batch)
    dtype = outputs.encoder.plan_probs.dtype

    plan_rows = batch.positive & batch.has_gold_plan
    n_plan = int(plan_rows.sum())
    if n_plan:
        per_row = plan_loss(outputs.encoder.plan_probs[plan_rows], batch.gold_plan_mask[plan_rows])
        plan = per_row.sum() / n_plan
    else:
        plan = outputs.encoder.plan_probs.new_zeros(())

    nsp = nsp_loss(outputs.encoder.nsp_prob, batch.nsp_labels.to(dtype)).mean()

    positives = int(batch.positive.sum())
    gen = generation_loss(outputs.mixed_probs, outputs.labels) / max(positives, 1)

    return ObjectiveTerms(
        plan=plan,
        nsp=nsp,
        gen=gen,
        total=total_loss(plan, nsp, gen, lambda_plan, lambda_next),
        gen_tokens=int(outputs.labels.numel()),
        positives=positives,
    )


def backward_objective(
    model: SSPlanner,
    batch: PlannerBatch,
    lambda_plan: float,
    lambda_next: float,
) -> ObjectiveTerms:
    """Compute the objective and backpropagate it into ``param.grad``."""
    model.zero_grad(set_to_none=True)
    terms = compute_objective(model, batch, lambda_plan, lambda_next)
    loss_value = float(terms.total)
    if not math.isfinite(loss_value):
        diagnostics = {"loss": terms.as_floats(), "parameters": model.parameter_summary()}
        logger.error(f"Non-finite loss {loss_value} on batch starting with {list(batch.instance_ids)[:3]}")
        raise NonFiniteLossError(f"loss is not finite ({loss_value})", diagnostics)
    terms.total.backward()
    return terms


def gradients(
    model: SSPlanner,
    batch: PlannerBatch,
    lambda_plan: float,
    lambda_next: float,
) -> Dict[str, torch.Tensor]:
    """
    Reverse-mode gradients of the total loss for every named parameter.

    Parameters the loss does not reach get an explicit zero gradient. A
    non-finite loss raises ``NonFiniteLossError`` with per-parameter norms.
    """
    backward_objective(model, batch, lambda_plan, lambda_next)
    grads = {}
    for name, param in model.named_parameters():
        grads[name] = param.grad.detach().clone() if param.grad is not None else torch.zeros_like(param)
    return grads
