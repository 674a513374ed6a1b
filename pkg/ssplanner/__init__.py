"""
SSPlanner - self-supervised text planning for paragraph completion.

This package provides:
- ParCom dataset construction from raw paragraphs (corpus, parcom, dataset)
- Gold plan keyword extraction (extractors)
- A micro transformer planner with plan prediction, next-sentence prediction
  and copy-guided decoding (planner, trainer)
- Automatic metrics (evalkit) and the ``ssplanner`` command line

Main Components:
- SSPlanner: The planner model
- PlannerTrainer: Optimization loop and model selection
- PlanExtractor: Keyword plan builder
"""

from .config import RunConfig, TrainConfig, derive_seed, load_run_config
from .corpus import Paragraph, Sentence, Vocabulary, build_vocab, load_corpus, segment_paragraphs, tokenize
from .exceptions import SSPlannerError
from .parcom import MaskedInstance, MaskSpec, enumerate_masks, make_instance, make_nsp_negatives
from .planner import PlannerConfig, SSPlanner, decode_targets, load_checkpoint, save_checkpoint
from .trainer import PlannerTrainer, TrainReport, ablate, train, validate
from .extractors.pipeline import PlanExtractor
from .ssplanner import cli, main

__version__ = "1.0.0"
__all__ = [
    "RunConfig",
    "TrainConfig",
    "derive_seed",
    "load_run_config",
    "Paragraph",
    "Sentence",
    "Vocabulary",
    "build_vocab",
    "load_corpus",
    "segment_paragraphs",
    "tokenize",
    "SSPlannerError",
    "MaskedInstance",
    "MaskSpec",
    "enumerate_masks",
    "make_instance",
    "make_nsp_negatives",
    "PlannerConfig",
    "SSPlanner",
    "decode_targets",
    "load_checkpoint",
    "save_checkpoint",
    "PlannerTrainer",
    "TrainReport",
    "ablate",
    "train",
    "validate",
    "PlanExtractor",
    "cli",
    "main",
]
