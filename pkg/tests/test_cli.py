"""
Tests for the ssplanner command line
"""

import json

import pytest
from click.testing import CliRunner

from ssplanner.parcom import read_jsonl
from ssplanner.planner.checkpoint import save_checkpoint
from ssplanner.ssplanner import cli, exit_code_for
from ssplanner.exceptions import AlignmentError, CheckpointFormatError, ConfigError, NonFiniteLossError
from ssplanner.toydata import write_toy_corpus

SMALL_MODEL = (
    "d_model=16\n"
    "d_pos=4\n"
    "n_layers=1\n"
    "n_heads=2\n"
    "max_seq=64\n"
    "batch_size=16\n"
    "t_max=1\n"
    "show_progress=false\n"
    "max_decode_len=4\n"
)


def write_config(directory, corpus, extra=""):
    path = directory / "run.conf"
    path.write_text(
        f"corpus_paths={corpus}\n"
        f"dataset_dir={directory / 'dataset'}\n"
        f"checkpoint={directory / 'model.ckpt'}\n"
        f"report={directory / 'report.json'}\n"
        f"completions={directory / 'completions.jsonl'}\n"
        "epochs=1\n" + SMALL_MODEL + extra,
        encoding="utf-8",
    )
    return str(path)


def invoke(*args):
    return CliRunner().invoke(cli, list(args), obj={})


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A built dataset and a one-epoch checkpoint shared by the pipeline tests"""
    directory = tmp_path_factory.mktemp("cli")
    corpus = write_toy_corpus(str(directory / "toy.txt"), 60, seed=0)
    config = write_config(directory, corpus)

    built = invoke("--config", config, "build-dataset")
    assert built.exit_code == 0, built.output
    trained = invoke("--config", config, "train")
    assert trained.exit_code == 0, trained.output
    return directory, config


class TestPipeline:
    """Test the commands end to end"""

    def test_dataset_written(self, workspace):
        """Test every dataset artifact exists"""
        directory, _ = workspace
        for name in ("train.jsonl", "valid.jsonl", "test.jsonl", "vocab.json", "stats.json"):
            assert (directory / "dataset" / name).exists(), name
        stats = json.loads((directory / "dataset" / "stats.json").read_text(encoding="utf-8"))
        assert stats["train"]["paragraphs"] == 54

    def test_train_report(self, workspace):
        """Test training writes a checkpoint and a report with validation metrics"""
        directory, _ = workspace
        assert (directory / "model.ckpt").exists()
        report = json.loads((directory / "report.json").read_text(encoding="utf-8"))
        assert report["best_epoch"] == 1
        assert len(report["epochs"]) == 1
        assert "bleu" in report["validation"]

    def test_generate_and_evaluate(self, workspace):
        """Test completions are written and scored"""
        directory, config = workspace
        generated = invoke("--config", config, "generate")
        assert generated.exit_code == 0, generated.output
        lines = (directory / "completions.jsonl").read_text(encoding="utf-8").splitlines()
        records = [json.loads(line) for line in lines]
        assert records
        assert [r["id"] for r in records] == sorted(r["id"] for r in records)

        evaluated = invoke("--config", config, "evaluate")
        assert evaluated.exit_code == 0, evaluated.output
        assert '"bleu"' in evaluated.output

        table = invoke("--config", config, "evaluate", "--table")
        assert table.exit_code == 0
        assert "nsp_accuracy" in table.output

    def test_generation_is_reproducible(self, workspace, tmp_path):
        """Test two runs with the same seed write identical completions"""
        _, config = workspace
        first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for path in (first, second):
            result = invoke(
                "--config", config, "--set", "decode_mode=nucleus", "--set", "keyword_source=random",
                "generate", "--output", str(path),
            )
            assert result.exit_code == 0, result.output
        assert first.read_bytes() == second.read_bytes()

    def test_generate_with_full_decode_length(self, workspace, tmp_path):
        """Test generation at the default decode length yields one sentence per masked slot"""
        directory, config = workspace
        output = tmp_path / "full.jsonl"
        result = invoke("--config", config, "--set", "max_decode_len=32", "generate", "--output", str(output))
        assert result.exit_code == 0, result.output
        records = [json.loads(line) for line in output.read_text(encoding="utf-8").splitlines()]
        references = {i.instance_id: i for i in read_jsonl(str(directory / "dataset" / "test.jsonl"))}
        assert records
        for record in records:
            assert len(record["generated"]) == references[record["id"]].t
            assert all(len(sentence.split()) <= 32 for sentence in record["generated"])

    def test_misaligned_completions(self, workspace, tmp_path):
        """Test disjoint completion ids exit with the alignment code"""
        _, config = workspace
        bogus = tmp_path / "bogus.jsonl"
        bogus.write_text(json.dumps({"id": "nowhere:0:0:1", "generated": ["x"]}) + "\n", encoding="utf-8")
        result = invoke("--config", config, "evaluate", "--completions", str(bogus))
        assert result.exit_code == 5

    def test_extract_noun_keywords(self, workspace, tmp_path):
        """Test sentence keywords are emitted as JSON lines"""
        _, config = workspace
        text = tmp_path / "story.txt"
        text.write_text("Vigor dropped to one knee, then got up. Owl helped mira carry the lantern.", encoding="utf-8")
        result = invoke("--config", config, "--set", "extractor=noun", "extract", "--input", str(text))
        assert result.exit_code == 0, result.output
        records = [json.loads(line) for line in result.output.splitlines() if line.startswith("{")]
        assert records[0] == {"sentence_index": 0, "extractor": "noun", "keywords": ["vigor", "knee"]}
        assert len(records) == 2

    def test_extract_attention_keywords(self, workspace, tmp_path):
        """Test attention keywords come from a trained checkpoint"""
        directory, config = workspace
        output = tmp_path / "keywords.jsonl"
        result = invoke(
            "--config", config,
            "--set", "extractor=attention",
            "--set", f"attention_checkpoint={directory / 'model.ckpt'}",
            "extract", "--input", str(directory / "dataset" / "test.jsonl"), "--output", str(output),
        )
        assert result.exit_code == 0, result.output
        records = [json.loads(line) for line in output.read_text(encoding="utf-8").splitlines()]
        assert records
        assert all(record["extractor"] == "attention" for record in records)

    def test_ablate(self, workspace):
        """Test an ablated run prints a metric table"""
        _, config = workspace
        result = invoke("--config", config, "ablate", "--module", "NSP", "--table")
        assert result.exit_code == 0, result.output
        assert "bleu" in result.output


class TestExitCodes:
    """Test error handling at the command boundary"""

    def test_missing_epochs(self, tmp_path):
        """Test training without epochs is a config error"""
        config = tmp_path / "run.conf"
        config.write_text(SMALL_MODEL, encoding="utf-8")
        result = invoke("--config", str(config), "train")
        assert result.exit_code == 2
        assert "epochs" in result.output

    def test_missing_corpus(self, tmp_path):
        """Test a missing corpus file is an input error"""
        config = write_config(tmp_path, str(tmp_path / "absent.txt"))
        assert invoke("--config", config, "build-dataset").exit_code == 2

    def test_bad_override(self, tmp_path):
        """Test malformed and unknown overrides"""
        assert invoke("--set", "epochs", "train").exit_code == 2
        assert invoke("--set", "wingspan=3", "train").exit_code == 2

    def test_vocabulary_mismatch(self, workspace, tiny_model, tmp_path):
        """Test a checkpoint from another vocabulary exits with the checkpoint code"""
        _, config = workspace
        foreign = tmp_path / "foreign.ckpt"
        save_checkpoint(tiny_model, str(foreign))
        result = invoke("--config", config, "generate", "--checkpoint", str(foreign), "--output", str(tmp_path / "c.jsonl"))
        assert result.exit_code == 4

    def test_corrupt_checkpoint(self, workspace, tmp_path):
        """Test a corrupt checkpoint exits with the checkpoint code"""
        _, config = workspace
        broken = tmp_path / "broken.ckpt"
        broken.write_bytes(b"not a checkpoint at all")
        result = invoke("--config", config, "generate", "--checkpoint", str(broken))
        assert result.exit_code == 4

    def test_non_utf8_corpus(self, tmp_path):
        """Test an undecodable corpus file is an input error naming the file"""
        corpus = tmp_path / "latin1.txt"
        corpus.write_bytes("Café au lait was served. It was warm.\n".encode("latin-1") + b"\xff\xfe\n")
        result = invoke("--config", write_config(tmp_path, str(corpus)), "build-dataset")
        assert result.exit_code == 2
        assert "latin1.txt" in result.output
        assert "UTF-8" in result.output

    def test_paragraph_length_beyond_positions(self, tmp_path):
        """Test max_len above the sentence position range is rejected before any work"""
        corpus = write_toy_corpus(str(tmp_path / "toy.txt"), 10, seed=0)
        config = write_config(tmp_path, corpus, "min_len=4\nmax_len=40\nsingle_paragraph_mode=true\n")
        for command in ("build-dataset", "train"):
            result = invoke("--config", config, command)
            assert result.exit_code == 2
            assert "max_para_len" in result.output
        assert not (tmp_path / "dataset").exists()

    def test_exit_code_table(self):
        """Test package errors map onto their exit codes"""
        assert exit_code_for(ConfigError("x")) == 2
        assert exit_code_for(FileNotFoundError("x")) == 2
        assert exit_code_for(NonFiniteLossError("x")) == 3
        assert exit_code_for(CheckpointFormatError("x")) == 4
        assert exit_code_for(AlignmentError("x")) == 5
        assert exit_code_for(RuntimeError("x")) is None


class TestReproducibleRuns:
    """Test whole runs repeat byte for byte"""

    @pytest.mark.slow
    def test_build_and_train_twice(self, tmp_path):
        """Test the same seed gives identical dataset files and checkpoints at the default sizes"""
        corpus = write_toy_corpus(str(tmp_path / "toy.txt"), 40, seed=3)
        runs = []
        for name in ("first", "second"):
            directory = tmp_path / name
            directory.mkdir()
            config = write_config(directory, corpus, "max_seq=128\nmax_decode_len=32\nepochs=2\nseed=11\n")
            for command in ("build-dataset", "train"):
                result = invoke("--config", config, command)
                assert result.exit_code == 0, result.output
            runs.append(directory)

        first, second = runs
        for name in ("train.jsonl", "valid.jsonl", "test.jsonl", "vocab.json", "stats.json"):
            assert (first / "dataset" / name).read_bytes() == (second / "dataset" / name).read_bytes(), name
        assert (first / "model.ckpt").read_bytes() == (second / "model.ckpt").read_bytes()


if __name__ == "__main__":
    pytest.main([__file__])
