from .batching import EncodedInstance, PlannerBatch, collate, encode_instance, iterate_batches
from .checkpoint import load_checkpoint, save_checkpoint
from .decoding import DecodeResult, DecodeState, decode_targets
from .losses import generation_loss, mix_distributions, nsp_loss, plan_loss, total_loss
from .model import PlannerConfig, SSPlanner
from .objective import ObjectiveTerms, backward_objective, compute_objective, gradients

__all__ = [
    "EncodedInstance",
    "PlannerBatch",
    "collate",
    "encode_instance",
    "iterate_batches",
    "load_checkpoint",
    "save_checkpoint",
    "DecodeResult",
    "DecodeState",
    "decode_targets",
    "generation_loss",
    "mix_distributions",
    "nsp_loss",
    "plan_loss",
    "total_loss",
    "PlannerConfig",
    "SSPlanner",
    "ObjectiveTerms",
    "backward_objective",
    "compute_objective",
    "gradients",
]
