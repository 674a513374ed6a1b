"""
Training loop for the SSPlanner: AdamW with decoupled weight decay, global
norm clipping, seeded batch order and model selection by validation loss.
"""

import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import torch
from tqdm import tqdm

from .config import TrainConfig, derive_seed
from .corpus import Vocabulary
from .evalkit import evaluate_instances
from .exceptions import CorpusError, NonFiniteLossError, VocabularyMismatchError
from .parcom import MaskedInstance
from .planner.batching import EncodedInstance, encode_instance, iterate_batches
from .planner.checkpoint import save_checkpoint
from .planner.decoding import complete_instances
from .planner.model import PlannerConfig, SSPlanner
from .planner.objective import backward_objective, compute_objective

logger = logging.getLogger(__name__)

ABLATION_MODULES = ("SP", "PP", "NSP")


@dataclass
class TrainReport:
    """Per-epoch losses, the selected epoch and final validation metrics"""
    epochs: List[Dict[str, float]] = field(default_factory=list)
    best_epoch: int = 0
    best_valid_loss: float = float("inf")
    final_train: Dict[str, float] = field(default_factory=dict)
    validation: Dict[str, Any] = field(default_factory=dict)
    wall_clock_seconds: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")


def build_model(config: TrainConfig, vocab: Vocabulary, dtype: torch.dtype = torch.float32) -> SSPlanner:
    """Fresh model with seeded uniform initialisation."""
    model = SSPlanner(PlannerConfig.from_train_config(config, len(vocab))).to(dtype)
    generator = torch.Generator().manual_seed(derive_seed(config.seed, "init"))
    model.reset_parameters(generator)
    model.vocab_fingerprint = vocab.fingerprint()
    return model


def ablate(config: TrainConfig, module: str) -> TrainConfig:
    """Configuration with one self-supervision module switched off."""
    if module == "SP":
        return config.model_copy(update={"use_sentence_positions": False})
    if module == "PP":
        return config.model_copy(update={"lambda_plan": 0.0, "plan_prediction": False})
    if module == "NSP":
        return config.model_copy(update={"lambda_next": 0.0, "nsp_negatives": False})
    raise ValueError(f"unknown ablation module {module!r}; expected one of {', '.join(ABLATION_MODULES)}")


def check_vocab(model: SSPlanner, vocab: Vocabulary) -> None:
    if model.vocab_fingerprint is not None and model.vocab_fingerprint != vocab.fingerprint():
        raise VocabularyMismatchError(
            f"checkpoint vocabulary {model.vocab_fingerprint[:12]} does not match dataset vocabulary {vocab.fingerprint()[:12]}"
        )


class PlannerTrainer:
    """Owns the model, the optimizer and the training report"""

    def __init__(self, config: TrainConfig, vocab: Vocabulary, model: Optional[SSPlanner] = None):
        self.config = config
        self.vocab = vocab
        self.logger = logging.getLogger(__name__)
        self.model = model if model is not None else build_model(config, vocab)
        check_vocab(self.model, vocab)
        self.lambda_plan = config.lambda_plan if config.plan_prediction else 0.0
        self.lambda_next = config.lambda_next
        self.optimizer = torch.optim.AdamW(
            self.model.parameters(),
            lr=config.learning_rate,
            betas=(config.adam_beta1, config.adam_beta2),
            eps=config.adam_eps,
            weight_decay=config.weight_decay,
        )
        self.report = TrainReport()

    def prepare(self, instances: Sequence[MaskedInstance]) -> List[EncodedInstance]:
        """Drop negatives when NSP is ablated and encode with gold training keywords."""
        if not self.config.nsp_negatives:
            instances = [instance for instance in instances if not instance.is_negative_nsp]
        cfg = self.model.config
        return [encode_instance(i, self.vocab, cfg.max_seq, cfg.p, self.config.train_nkps) for i in instances]

    def step(self, batch) -> Dict[str, float]:
        """One clipped AdamW update; returns the batch losses before the update."""
        self.model.train()
        terms = backward_objective(self.model, batch, self.lambda_plan, self.lambda_next)
        grad_norm = torch.nn.utils.clip_grad_norm_(self.model.parameters(), self.config.grad_clip_norm)
        self.optimizer.step()
        losses = terms.as_floats()
        losses["grad_norm"] = float(grad_norm)
        return losses

    def evaluate_losses(self, encoded: Sequence[EncodedInstance]) -> Dict[str, float]:
        """Instance-weighted mean losses without updating anything."""
        if not encoded:
            raise ValueError("cannot evaluate losses on an empty set")
        sums = {"plan": 0.0, "nsp": 0.0, "gen": 0.0, "total": 0.0}
        gen_sum, gen_tokens = 0.0, 0
        cfg = self.model.config
        self.model.eval()
        with torch.no_grad():
            for batch in iterate_batches(encoded, self.config.batch_size, cfg.vocab_size, cfg.p):
                terms = compute_objective(self.model, batch, self.lambda_plan, self.lambda_next)
                for name in sums:
                    sums[name] += float(getattr(terms, name)) * batch.size
                gen_sum += float(terms.gen) * max(terms.positives, 1)
                gen_tokens += terms.gen_tokens
        losses = {name: value / len(encoded) for name, value in sums.items()}
        losses["gen_per_token"] = gen_sum / max(gen_tokens, 1)
        return losses

    def train_epoch(self, encoded: Sequence[EncodedInstance], epoch: int) -> Dict[str, float]:
        sums = {"plan": 0.0, "nsp": 0.0, "gen": 0.0, "total": 0.0}
        gen_sum, gen_tokens = 0.0, 0
        cfg = self.model.config
        seed = derive_seed(self.config.seed, f"epoch{epoch}")
        for batch in iterate_batches(encoded, self.config.batch_size, cfg.vocab_size, cfg.p, seed=seed):
            losses = self.step(batch)
            for name in sums:
                sums[name] += losses[name] * batch.size
            positives = int(batch.positive.sum())
            gen_sum += losses["gen"] * max(positives, 1)
            gen_tokens += int(batch.label_mask.sum())
        result = {name: value / len(encoded) for name, value in sums.items()}
        result["gen_per_token"] = gen_sum / max(gen_tokens, 1)
        return result

    def snapshot(self) -> Dict[str, torch.Tensor]:
        return {name: tensor.detach().clone() for name, tensor in self.model.state_dict().items()}

    def fit(
        self,
        train_set: Sequence[MaskedInstance],
        valid_set: Sequence[MaskedInstance],
        checkpoint_path: Optional[str] = None,
    ) -> TrainReport:
        """Run every epoch, keep the best state by validation total loss and restore it."""
        if not train_set:
            raise CorpusError("training set is empty")
        if not valid_set:
            raise CorpusError("validation set is empty")
        longest = max(instance.paragraph_len for instance in (*train_set, *valid_set))
        if longest > self.model.config.max_para_len:
            raise CorpusError(
                f"dataset holds paragraphs of {longest} sentences but max_para_len={self.model.config.max_para_len}"
            )

        started = time.perf_counter()
        train_encoded = self.prepare(train_set)
        valid_encoded = self.prepare(valid_set)
        self.logger.info(
            f"Training on {len(train_encoded)} instances ({len(valid_encoded)} validation) "
            f"for {self.config.epochs} epochs"
        )

        best_state = self.snapshot()
        last_good = best_state
        epochs = tqdm(range(1, self.config.epochs + 1), desc="epochs", disable=not self.config.show_progress, file=sys.stderr)
        for epoch in epochs:
            try:
                losses = self.train_epoch(train_encoded, epoch)
            except NonFiniteLossError as e:
                self.logger.error(f"Aborting at epoch {epoch}: {e}")
                self.model.load_state_dict(last_good)
                if checkpoint_path:
                    save_checkpoint(self.model, checkpoint_path, self.metadata())
                    e.diagnostics["checkpoint"] = checkpoint_path
                e.diagnostics["epoch"] = epoch
                raise

            valid = self.evaluate_losses(valid_encoded)
            entry = {"epoch": epoch, **losses, **{f"valid_{name}": value for name, value in valid.items()}}
            self.report.epochs.append(entry)
            tqdm.write(
                f"epoch={epoch} plan={losses['plan']:.4f} nsp={losses['nsp']:.4f} "
                f"gen={losses['gen']:.4f} total={losses['total']:.4f}",
                file=sys.stderr,
            )

            last_good = self.snapshot()
            if valid["total"] < self.report.best_valid_loss:
                self.report.best_valid_loss = valid["total"]
                self.report.best_epoch = epoch
                best_state = last_good

        self.model.load_state_dict(best_state)
        self.report.final_train = self.evaluate_losses(train_encoded)
        self.report.validation = self.evaluate_losses(valid_encoded)
        self.report.wall_clock_seconds = time.perf_counter() - started
        self.logger.info(f"Best epoch {self.report.best_epoch} with validation loss {self.report.best_valid_loss:.4f}")

        if checkpoint_path:
            save_checkpoint(self.model, checkpoint_path, self.metadata())
        return self.report

    def metadata(self) -> Dict[str, Any]:
        return {"train_config": self.config.model_dump(), "vocab": json.loads(self.vocab.to_json())}


def train(
    config: TrainConfig,
    vocab: Vocabulary,
    train_set: Sequence[MaskedInstance],
    valid_set: Sequence[MaskedInstance],
    checkpoint_path: Optional[str] = None,
) -> Tuple[SSPlanner, TrainReport]:
    """Train a fresh planner; returns the selected model and the report."""
    torch.use_deterministic_algorithms(True)
    trainer = PlannerTrainer(config, vocab)
    report = trainer.fit(train_set, valid_set, checkpoint_path)
    return trainer.model, report


def validate(
    model: SSPlanner,
    vocab: Vocabulary,
    valid_set: Sequence[MaskedInstance],
    config: TrainConfig,
    max_decode_len: int = 32,
) -> Dict[str, Any]:
    """Validation losses plus generation and module metrics on greedy decodes with predicted keywords."""
    if not valid_set:
        raise CorpusError("validation set is empty")
    check_vocab(model, vocab)

    trainer = PlannerTrainer(config, vocab, model=model)
    metrics: Dict[str, Any] = trainer.evaluate_losses(trainer.prepare(valid_set))
    completions = complete_instances(
        model, vocab, valid_set,
        keyword_source="predicted",
        max_len=max_decode_len,
        seed=derive_seed(config.seed, "validate"),
        train_nkps=config.train_nkps,
        plan_prediction=config.plan_prediction,
    )
    if completions:
        report = evaluate_instances(model, vocab, valid_set, completions, config.train_nkps, config.batch_size)
        metrics.update(report.to_dict())
    return metrics
