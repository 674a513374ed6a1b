"""
Tests for the automatic metrics
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssplanner.corpus import SPECIAL_TOKENS, Vocabulary
from ssplanner.evalkit import (
    MetricReport,
    align_completions,
    bleu,
    evaluate_completions,
    evaluate_instances,
    extrema_vector,
    keyword_usage_rate,
    model_embeddings,
    nsp_accuracy,
    pp_accuracy,
    vector_extrema,
)
from ssplanner.exceptions import AlignmentError

WORDS = ("lantern", "owl", "mira", "forest", "river", "stone", "night", "bread", "song", "door")


@pytest.fixture
def small_vocab():
    return Vocabulary(token_of=list(SPECIAL_TOKENS) + ["x", "y", "z", "w"])


@pytest.fixture
def embeddings():
    """Two-dimensional embeddings for x, y, z and an all-zero w"""
    table = np.zeros((9, 2))
    table[5] = (1.0, -3.0)
    table[6] = (2.0, 1.0)
    table[7] = (-1.0, 3.0)
    return table


def completion(instance, sentences, keywords=()):
    return {"id": instance.instance_id, "generated": list(sentences), "keywords_used": list(keywords)}


class TestBleu:
    """Test smoothed sentence BLEU"""

    @pytest.mark.parametrize(
        "hypothesis,reference,expected",
        [
            ("a b c d e", "a b c d e", 1.0),
            ("a b c d", "a b c e", (0.75 * 0.75 * (2 / 3) * 0.5) ** 0.25),
            ("a b c d e", "a b c", (0.6 * 0.6 * 0.5 * (1 / 3)) ** 0.25),
            ("a a a a", "a b", (0.25 * 0.25 * (1 / 3) * 0.5) ** 0.25),
            ("a b c", "a b c d e f", math.exp(-1)),
            ("x y", "a b", 0.0),
        ],
    )
    def test_fixtures(self, hypothesis, reference, expected):
        """Test hand-computed scores with add-one smoothing above unigrams"""
        assert bleu(hypothesis.split(), reference.split()) == pytest.approx(expected, rel=1e-6, abs=1e-9)

    def test_bigram_order(self):
        """Test a lower maximum n-gram order"""
        assert bleu("a b c d".split(), "a b c e".split(), max_n=2) == pytest.approx(0.75)

    def test_empty_inputs(self):
        """Test an empty hypothesis scores zero and an empty reference raises"""
        assert bleu([], ["a"]) == 0.0
        with pytest.raises(ValueError):
            bleu(["a"], [])


class TestVectorExtrema:
    """Test embedding-based similarity"""

    def test_extrema_vector(self, small_vocab, embeddings):
        """Test the largest-magnitude entry wins per dimension"""
        assert extrema_vector(["x", "y"], embeddings, small_vocab).tolist() == [2.0, -3.0]

    def test_identical(self, small_vocab, embeddings):
        """Test identical sentences score one"""
        assert vector_extrema(["x", "y"], ["y", "x"], embeddings, small_vocab) == pytest.approx(1.0)

    def test_opposite(self, small_vocab, embeddings):
        """Test opposite vectors score minus one"""
        assert vector_extrema(["x"], ["z"], embeddings, small_vocab) == pytest.approx(-1.0)

    def test_partial(self, small_vocab, embeddings):
        """Test a hand-computed cosine"""
        assert vector_extrema(["x", "y"], ["y"], embeddings, small_vocab) == pytest.approx(1 / math.sqrt(65))

    def test_degenerate(self, small_vocab, embeddings):
        """Test zero vectors and empty sentences score zero"""
        assert vector_extrema(["w"], ["x"], embeddings, small_vocab) == 0.0
        assert vector_extrema([], ["x"], embeddings, small_vocab) == 0.0


class TestSelfSimilarity:
    """Test a sentence compared with itself scores exactly one"""

    @settings(max_examples=100, deadline=None)
    @given(sentence=st.lists(st.sampled_from(WORDS), min_size=1, max_size=24))
    def test_bleu_of_itself(self, sentence):
        """Test BLEU of a sentence against itself"""
        assert bleu(sentence, sentence) == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(
        sentence=st.lists(st.sampled_from(WORDS), min_size=1, max_size=24),
        seed=st.integers(min_value=0, max_value=2**32 - 1),
    )
    def test_vector_extrema_of_itself(self, sentence, seed):
        """Test vector extrema of a sentence against itself under random embeddings"""
        vocab = Vocabulary(token_of=list(SPECIAL_TOKENS) + list(WORDS))
        table = np.random.default_rng(seed).normal(size=(len(vocab), 8))
        assert vector_extrema(sentence, sentence, table, vocab) == pytest.approx(1.0, abs=1e-12)


class TestKeywordUsage:
    """Test keyword usage rate"""

    def test_rate(self):
        """Test distinct keywords found anywhere in the output"""
        generated = [["mira", "found", "it"], ["the", "owl"]]
        assert keyword_usage_rate(generated, ["owl", "mira", "owl", "lantern"]) == pytest.approx(2 / 3)

    def test_empty_keywords(self):
        """Test an empty keyword set raises"""
        with pytest.raises(ValueError):
            keyword_usage_rate([["a"]], [])


class TestAlignment:
    """Test pairing completions with references"""

    def test_sorted_pairs(self, positive_instances):
        """Test pairs are ordered by instance id"""
        refs = positive_instances[:3]
        records = [completion(i, ["a"]) for i in reversed(refs)]
        pairs = align_completions(records, refs)
        assert [instance.instance_id for _, instance in pairs] == sorted(i.instance_id for i in refs)

    def test_missing_id(self, positive_instances):
        """Test the first offending id is reported"""
        refs = positive_instances[:3]
        records = [completion(i, ["a"]) for i in refs[:2]] + [{"id": "zz:0:0:1", "generated": ["a"]}]
        with pytest.raises(AlignmentError) as info:
            align_completions(records, refs)
        assert info.value.offending_id == min(refs[2].instance_id, "zz:0:0:1")

    def test_duplicate_id(self, positive_instances):
        """Test duplicated completions are rejected"""
        refs = positive_instances[:1]
        records = [completion(refs[0], ["a"]), completion(refs[0], ["b"])]
        with pytest.raises(AlignmentError):
            align_completions(records, refs)


class TestReports:
    """Test aggregated metric reports"""

    def test_perfect_completions(self, positive_instances, sample_vocab, tiny_model):
        """Test references copied as completions score perfectly"""
        refs = positive_instances[:4]
        records = [
            completion(i, [" ".join(s.tokens) for s in i.target], keywords=[i.target[0].tokens[0]]) for i in refs
        ]
        report = evaluate_completions(records, refs, model_embeddings(tiny_model), sample_vocab)
        assert report.bleu == pytest.approx(1.0)
        assert report.vector_extrema == pytest.approx(1.0)
        assert report.keyword_usage_rate == pytest.approx(1.0)
        assert report.n_completions == 4
        assert report.n_keyword_sets == 4

    def test_module_accuracies(self, tiny_model, sample_vocab, sample_instances):
        """Test NSP and PP accuracies are proportions"""
        assert 0.0 <= nsp_accuracy(tiny_model, sample_vocab, sample_instances, batch_size=8) <= 1.0
        accuracy, skipped = pp_accuracy(tiny_model, sample_vocab, sample_instances, 3, batch_size=8)
        assert 0.0 <= accuracy <= 1.0
        assert skipped >= 0
        with pytest.raises(ValueError):
            nsp_accuracy(tiny_model, sample_vocab, [])

    def test_evaluate_instances(self, tiny_model, sample_vocab, sample_instances):
        """Test the full report counts every module"""
        positives = [i for i in sample_instances if not i.is_negative_nsp]
        records = [completion(i, ["the forest ."] * i.t) for i in positives]
        report = evaluate_instances(tiny_model, sample_vocab, sample_instances, records, 3, batch_size=8)
        assert report.n_nsp == len(sample_instances)
        assert report.n_pp + report.pp_skipped == len(positives)
        assert report.keyword_usage_rate is None
        assert list(report.to_dict()) == list(MetricReport.FIELDS)

    def test_format_table(self):
        """Test the table shows every metric in order"""
        table = MetricReport(bleu=0.5, n_completions=3).format_table()
        lines = table.splitlines()
        assert lines[2].split() == ["bleu", "0.5000"]
        assert "nsp_accuracy" in lines[4] and "n/a" in lines[4]
        assert len(lines) == 2 + len(MetricReport.FIELDS)


if __name__ == "__main__":
    pytest.main([__file__])
