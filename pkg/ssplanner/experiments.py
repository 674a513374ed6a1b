"""
Trend experiments on the toy corpus: keyword source, keyword ratio and
module ablation, each compared by held-out BLEU across several seeds.
"""

import logging
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .config import TrainConfig
from .dataset import DatasetSplits, build_dataset
from .evalkit import evaluate_completions, model_embeddings
from .extractors.pipeline import PlanExtractor
from .parcom import MaskedInstance
from .planner.decoding import complete_instances
from .planner.model import SSPlanner
from .toydata import toy_paragraphs
from .trainer import ablate, train

logger = logging.getLogger(__name__)

DEFAULT_SEEDS = (0, 1, 2)


def experiment_config(seed: int, epochs: int = 12, **overrides) -> TrainConfig:
    """A small, fast planner configuration for toy-scale trend checks."""
    settings = dict(
        epochs=epochs,
        seed=seed,
        d_model=32,
        d_pos=8,
        n_layers=2,
        n_heads=2,
        max_seq=96,
        batch_size=32,
        learning_rate=2e-3,
        show_progress=False,
    )
    settings.update(overrides)
    return TrainConfig(**settings)


def toy_dataset(seed: int, n_paragraphs: int = 240, t_max: int = 2, nsp_negatives: bool = True) -> DatasetSplits:
    """Generated toy paragraphs turned into a dataset with off-the-shelf plans."""
    extractor = PlanExtractor("offtheshelf", nkps=5, seed=seed)
    return build_dataset(toy_paragraphs(n_paragraphs, seed), extractor, t_max, seed, nsp_negatives=nsp_negatives)


def held_out(instances: Sequence[MaskedInstance], limit: Optional[int]) -> List[MaskedInstance]:
    positives = sorted((i for i in instances if not i.is_negative_nsp), key=lambda i: i.instance_id)
    return positives[:limit] if limit else positives


def held_out_bleu(
    model: SSPlanner,
    splits: DatasetSplits,
    config: TrainConfig,
    keyword_source: str,
    keyword_ratio: float = 1.0,
    limit: Optional[int] = 60,
) -> float:
    """Mean greedy BLEU on the test split for one keyword setting."""
    instances = held_out(splits.test, limit)
    completions = complete_instances(
        model, splits.vocab, instances,
        keyword_source=keyword_source,
        keyword_ratio=keyword_ratio,
        max_len=16,
        seed=config.seed,
        train_nkps=config.train_nkps,
        plan_prediction=config.plan_prediction,
    )
    return evaluate_completions(completions, instances, model_embeddings(model), splits.vocab).bleu


def _train_on(splits: DatasetSplits, config: TrainConfig) -> SSPlanner:
    model, report = train(config, splits.vocab, splits.train, splits.valid)
    logger.info(f"seed {config.seed}: best epoch {report.best_epoch}, valid loss {report.best_valid_loss:.4f}")
    return model


def keyword_source_sweep(
    seeds: Iterable[int] = DEFAULT_SEEDS,
    sources: Sequence[str] = ("random", "predicted", "ground_truth"),
    epochs: int = 12,
    n_paragraphs: int = 240,
) -> Dict[str, List[float]]:
    """Held-out BLEU per keyword source, one value per seed."""
    results: Dict[str, List[float]] = {source: [] for source in sources}
    for seed in seeds:
        splits = toy_dataset(seed, n_paragraphs)
        config = experiment_config(seed, epochs)
        model = _train_on(splits, config)
        for source in sources:
            results[source].append(held_out_bleu(model, splits, config, source))
    return results


def keyword_ratio_sweep(
    seeds: Iterable[int] = DEFAULT_SEEDS,
    ratios: Sequence[float] = (0.0, 0.5, 1.0),
    epochs: int = 12,
    n_paragraphs: int = 240,
) -> Dict[float, List[float]]:
    """Held-out BLEU with ground-truth keywords kept at each ratio."""
    results: Dict[float, List[float]] = {ratio: [] for ratio in ratios}
    for seed in seeds:
        splits = toy_dataset(seed, n_paragraphs)
        config = experiment_config(seed, epochs)
        model = _train_on(splits, config)
        for ratio in ratios:
            results[ratio].append(held_out_bleu(model, splits, config, "ground_truth", ratio))
    return results


def ablation_comparison(
    module: str = "PP",
    seeds: Iterable[int] = DEFAULT_SEEDS,
    epochs: int = 12,
    n_paragraphs: int = 240,
) -> Dict[str, List[float]]:
    """Held-out BLEU with predicted keywords for the full and the ablated model."""
    results: Dict[str, List[float]] = {"full": [], module: []}
    for seed in seeds:
        full_config = experiment_config(seed, epochs)
        ablated_config = ablate(full_config, module)
        for name, config in (("full", full_config), (module, ablated_config)):
            splits = toy_dataset(seed, n_paragraphs, nsp_negatives=config.nsp_negatives)
            model = _train_on(splits, config)
            results[name].append(held_out_bleu(model, splits, config, "predicted"))
    return results


def summarize(results: Dict) -> Dict:
    """Mean over seeds of every setting."""
    return {name: float(np.mean(values)) for name, values in results.items()}
