"""
Command-line entry point: corpus -> dataset -> train -> generate -> evaluate.

Every command reads one flat ``key=value`` config file (``--config``) and
``--set KEY=VALUE`` overrides. Exit codes: 0 success, 2 config or input error,
3 numeric failure, 4 checkpoint mismatch, 5 completion/reference misalignment.
"""

import functools
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional

import click
import torch

from .config import RunConfig, derive_seed, load_run_config, parse_overrides
from .corpus import Vocabulary, load_corpus, split_sentences, tokenize
from .dataset import DatasetSplits, build_dataset
from .evalkit import evaluate_instances
from .exceptions import (
    AlignmentError,
    CheckpointFormatError,
    ConfigError,
    CorpusError,
    NonFiniteLossError,
    VocabularyMismatchError,
)
from .extractors.pipeline import PlanExtractor
from .parcom import read_jsonl
from .planner.checkpoint import load_checkpoint
from .planner.decoding import complete_instances
from .trainer import ABLATION_MODULES, ablate, check_vocab, train, validate

logger = logging.getLogger(__name__)

EXIT_CODES = (
    (ConfigError, 2),
    (CorpusError, 2),
    (FileNotFoundError, 2),
    (NonFiniteLossError, 3),
    (VocabularyMismatchError, 4),
    (CheckpointFormatError, 4),
    (AlignmentError, 5),
)


def exit_code_for(error: BaseException) -> Optional[int]:
    for error_type, code in EXIT_CODES:
        if isinstance(error, error_type):
            return code
    return None


def handle_errors(command):
    """Map package errors onto exit codes with a one-line message on stderr."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except click.exceptions.Exit:
            raise
        except Exception as e:
            code = exit_code_for(e)
            if code is None:
                logger.error(f"Unexpected failure: {e}")
                raise
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(f"error: {e}", err=True)
            sys.exit(code)

    return wrapper


def run_config(ctx: click.Context) -> RunConfig:
    return load_run_config(ctx.obj["config_path"], ctx.obj["overrides"])


def write_jsonl_records(records: List[Dict[str, Any]], path: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            f.write("\n")


def read_jsonl_records(path: str) -> List[Dict[str, Any]]:
    if not os.path.exists(path):
        raise FileNotFoundError(f"file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def attention_extractor(config: RunConfig) -> PlanExtractor:
    """Attention extractor backed by ``attention_checkpoint`` and its stored vocabulary."""
    if not config.attention_checkpoint:
        raise ConfigError("extractor=attention requires attention_checkpoint")
    if not os.path.exists(config.attention_checkpoint):
        raise FileNotFoundError(f"attention checkpoint not found: {config.attention_checkpoint}")
    model, metadata = load_checkpoint(config.attention_checkpoint)
    if "vocab" not in metadata:
        raise CheckpointFormatError(f"{config.attention_checkpoint}: checkpoint carries no vocabulary")
    vocab = Vocabulary.from_json(json.dumps(metadata["vocab"]))
    return PlanExtractor("attention", nkps=config.extract_nkps, seed=config.seed, model=model, vocab=vocab)


def plan_extractor(config: RunConfig) -> PlanExtractor:
    if config.extractor == "attention":
        return attention_extractor(config)
    return PlanExtractor(
        config.extractor,
        nkps=config.extract_nkps,
        seed=config.seed,
        damping=config.damping,
        tol=config.pagerank_tol,
    )


def load_vocab(config: RunConfig) -> Vocabulary:
    path = config.dataset_file("vocab")
    if not os.path.exists(path):
        raise FileNotFoundError(f"vocabulary not found: {path}")
    return Vocabulary.load(path)


def load_model_for(config: RunConfig, vocab: Vocabulary, checkpoint: Optional[str] = None):
    path = checkpoint or config.checkpoint
    if not os.path.exists(path):
        raise FileNotFoundError(f"checkpoint not found: {path}")
    model, metadata = load_checkpoint(path)
    check_vocab(model, vocab)
    return model, metadata


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="key=value run configuration file")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="override one config key")
@click.option("--log-level", default="INFO", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"]), show_default=True)
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str], overrides, log_level: str):
    """SSPlanner: build ParCom data, train the planner, generate and evaluate."""
    logging.basicConfig(
        level=getattr(logging, log_level),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
        force=True,
    )
    torch.use_deterministic_algorithms(True)
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    try:
        ctx.obj["overrides"] = parse_overrides(tuple(overrides))
    except ConfigError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)


@cli.command("build-dataset")
@click.pass_context
@handle_errors
def build_dataset_command(ctx: click.Context):
    """Segment the corpus and write train/valid/test instances."""
    config = run_config(ctx)
    if not config.corpus_paths:
        raise ConfigError("missing required config key: corpus_paths")
    for path in config.corpus_paths:
        if not os.path.exists(path):
            raise FileNotFoundError(f"corpus file not found: {path}")

    paragraphs = load_corpus(config.corpus_paths, config.min_len, config.max_len, config.single_paragraph_mode)
    splits = build_dataset(
        paragraphs,
        plan_extractor(config),
        config.t_max,
        config.seed,
        max_vocab=config.max_vocab,
        nsp_negatives=config.nsp_negatives,
    )
    splits.save(config.dataset_dir)
    click.echo(json.dumps(splits.stats, indent=2, sort_keys=True))


@cli.command("extract")
@click.option("--input", "input_path", required=True, type=click.Path(), help="raw text, or instance JSONL for attention")
@click.option("--output", "output_path", default=None, type=click.Path(), help="defaults to standard output")
@click.pass_context
@handle_errors
def extract_command(ctx: click.Context, input_path: str, output_path: Optional[str]):
    """Run the configured keyword extractor and emit one JSON line per sentence."""
    config = run_config(ctx)
    if not os.path.exists(input_path):
        raise FileNotFoundError(f"input file not found: {input_path}")
    extractor = plan_extractor(config)

    records = []
    if config.extractor == "attention":
        for instance in read_jsonl(input_path):
            plan = extractor.instance_plan(instance)
            for keywords in plan.per_sentence:
                records.append({"sentence_index": len(records), "extractor": config.extractor, "keywords": list(keywords)})
    else:
        with open(input_path, "r", encoding="utf-8") as f:
            raw_sentences = split_sentences(f.read())
        for index, raw in enumerate(raw_sentences):
            keywords = extractor.sentence_keywords(tokenize(raw), seed_name=f"extract:{index}")
            records.append({"sentence_index": index, "extractor": config.extractor, "keywords": keywords})

    if output_path:
        write_jsonl_records(records, output_path)
    else:
        for record in records:
            click.echo(json.dumps(record, ensure_ascii=False, separators=(",", ":")))


@cli.command("train")
@click.pass_context
@handle_errors
def train_command(ctx: click.Context):
    """Train the planner on the built dataset; writes the checkpoint and a JSON report."""
    config = run_config(ctx)
    train_config = config.to_train_config()
    splits = DatasetSplits.load(config.dataset_dir)
    model, report = train(train_config, splits.vocab, splits.train, splits.valid, checkpoint_path=config.checkpoint)
    report.validation = validate(model, splits.vocab, splits.valid, train_config, config.max_decode_len)
    report.save(config.report)
    click.echo(f"best_epoch={report.best_epoch} valid_total={report.best_valid_loss:.6f} checkpoint={config.checkpoint}")


@cli.command("generate")
@click.option("--input", "input_path", default=None, type=click.Path(), help="instance JSONL (default: test split)")
@click.option("--checkpoint", default=None, type=click.Path())
@click.option("--output", "output_path", default=None, type=click.Path(), help="defaults to the completions key")
@click.pass_context
@handle_errors
def generate_command(ctx: click.Context, input_path: Optional[str], checkpoint: Optional[str], output_path: Optional[str]):
    """Decode the masked targets of every positive instance."""
    config = run_config(ctx)
    vocab = load_vocab(config)
    model, metadata = load_model_for(config, vocab, checkpoint)

    path = input_path or config.dataset_file("test")
    if not os.path.exists(path):
        raise FileNotFoundError(f"instance file not found: {path}")
    records = complete_instances(
        model,
        vocab,
        read_jsonl(path),
        keyword_source=config.keyword_source,
        keyword_ratio=config.keyword_ratio,
        mode=config.decode_mode,
        top_p=config.top_p,
        max_len=config.max_decode_len,
        seed=derive_seed(config.seed, "generate"),
        train_nkps=config.train_nkps,
        plan_prediction=metadata.get("train_config", {}).get("plan_prediction", True),
    )
    write_jsonl_records(records, output_path or config.completions)
    click.echo(f"wrote {len(records)} completions to {output_path or config.completions}")


@cli.command("evaluate")
@click.option("--completions", "completions_path", default=None, type=click.Path())
@click.option("--references", "references_path", default=None, type=click.Path(), help="instance JSONL (default: test split)")
@click.option("--checkpoint", default=None, type=click.Path())
@click.option("--table", is_flag=True, help="print a table instead of JSON")
@click.pass_context
@handle_errors
def evaluate_command(
    ctx: click.Context,
    completions_path: Optional[str],
    references_path: Optional[str],
    checkpoint: Optional[str],
    table: bool,
):
    """Score completions against references and print the metric report."""
    config = run_config(ctx)
    completions = read_jsonl_records(completions_path or config.completions)
    path = references_path or config.dataset_file("test")
    if not os.path.exists(path):
        raise FileNotFoundError(f"reference file not found: {path}")
    vocab = load_vocab(config)
    model, _ = load_model_for(config, vocab, checkpoint)

    report = evaluate_instances(model, vocab, read_jsonl(path), completions, config.train_nkps, config.batch_size)
    click.echo(report.format_table() if table else json.dumps(report.to_dict(), indent=2))


@cli.command("ablate")
@click.option("--module", required=True, type=click.Choice(ABLATION_MODULES))
@click.option("--table", is_flag=True, help="print a table instead of JSON")
@click.pass_context
@handle_errors
def ablate_command(ctx: click.Context, module: str, table: bool):
    """Train with one self-supervision module removed and report held-out metrics."""
    config = run_config(ctx)
    ablated = ablate(config.to_train_config(), module)
    splits = DatasetSplits.load(config.dataset_dir)
    model, _ = train(ablated, splits.vocab, splits.train, splits.valid)

    test = splits.test if ablated.nsp_negatives else [i for i in splits.test if not i.is_negative_nsp]
    completions = complete_instances(
        model,
        splits.vocab,
        test,
        keyword_source="predicted",
        mode=config.decode_mode,
        top_p=config.top_p,
        max_len=config.max_decode_len,
        seed=derive_seed(config.seed, f"ablate:{module}"),
        train_nkps=ablated.train_nkps,
        plan_prediction=ablated.plan_prediction,
    )
    report = evaluate_instances(model, splits.vocab, test, completions, ablated.train_nkps, ablated.batch_size)
    click.echo(report.format_table() if table else json.dumps({"module": module, **report.to_dict()}, indent=2))


def main():
    """Console entry point."""
    cli(obj={})


if __name__ == "__main__":
    main()
