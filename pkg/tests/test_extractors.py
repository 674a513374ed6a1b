"""
Tests for gold plan keyword extractors
"""

import pytest
import torch

from ssplanner.corpus import BOS_ID, build_vocab, segment_paragraphs, tokenize
from ssplanner.exceptions import ConfigError, UnsupportedExtractorError, VocabularyMismatchError
from ssplanner.extractors import attention as attention_module
from ssplanner.extractors.attention import attention_scores, extract_attention
from ssplanner.extractors.keywords import (
    build_cooccurrence_graph,
    extract_graph_rake,
    extract_offtheshelf,
    extract_positionrank,
    extract_random,
    extract_statistical,
    is_content_token,
    load_stopwords,
    personalized_pagerank,
    position_restart_vector,
    score_positionrank,
    score_statistical,
)
from ssplanner.extractors.pipeline import PlanExtractor
from ssplanner.extractors.plan import KeywordPlan, finalize_plan, vote_offtheshelf
from ssplanner.extractors.syntactic import extract_syntactic, load_pos_lexicon, tag_pos
from ssplanner.parcom import MaskSpec, make_instance
from ssplanner.trainer import build_model


@pytest.fixture
def stopwords():
    """Shipped stopword list"""
    return load_stopwords()


@pytest.fixture
def lantern():
    return tokenize("The lantern was old and heavy.")


class TestOffTheShelf:
    """Test the statistical, RAKE and PositionRank extractors and their vote"""

    def test_statistical_scores(self, lantern, stopwords):
        """Test term frequency is discounted by first position"""
        scores = score_statistical(lantern, stopwords)
        assert scores["lantern"] == pytest.approx(1 / (1 + 1 / 7))
        assert scores["old"] == pytest.approx(1 / (1 + 3 / 7))
        assert "the" not in scores and "." not in scores
        assert extract_statistical(lantern, 2, stopwords) == ["lantern", "old"]

    def test_rake_breaks_ties_lexicographically(self, stopwords):
        """Test phrase degree scoring with lexicographic tie breaks"""
        sentence = tokenize("Mira found a golden lantern and owl.")
        assert extract_graph_rake(sentence, 3, stopwords) == ["found", "golden", "lantern"]
        assert extract_graph_rake(sentence, 10, stopwords)[-1] == "owl"

    def test_cooccurrence_graph(self, stopwords):
        """Test only adjacent candidates are joined"""
        graph = build_cooccurrence_graph(tokenize("Mira walked to the forest."), stopwords)
        assert set(graph.nodes) == {"mira", "walked", "forest"}
        assert set(map(frozenset, graph.edges)) == {frozenset({"mira", "walked"})}

    def test_restart_vector(self, stopwords):
        """Test restart weights favour early occurrences and sum to one"""
        restart = position_restart_vector(tokenize("Mira walked to the forest."), stopwords)
        assert restart["mira"] == pytest.approx(1 / 1.7)
        assert restart["forest"] == pytest.approx(0.2 / 1.7)
        assert sum(restart.values()) == pytest.approx(1.0)

    def test_pagerank_sums_to_one(self, stopwords):
        """Test personalized PageRank is a distribution"""
        sentence = tokenize("Owl helped mira carry the lantern home to mira.")
        graph = build_cooccurrence_graph(sentence, stopwords)
        scores = personalized_pagerank(graph, position_restart_vector(sentence, stopwords))
        assert sum(scores.values()) == pytest.approx(1.0, abs=1e-6)
        assert personalized_pagerank(build_cooccurrence_graph(tokenize("The."), stopwords), {}) == {}

    def test_positionrank_isolated_words_follow_restart(self, lantern, stopwords):
        """Test isolated candidates are ranked by position"""
        assert extract_positionrank(lantern, 3, stopwords) == ["lantern", "old", "heavy"]
        with pytest.raises(ValueError):
            extract_positionrank(lantern, 3, stopwords, damping=1.0)

    def test_positionrank_rejects_empty_k(self, lantern, stopwords):
        """Test k below one is rejected"""
        with pytest.raises(ValueError):
            extract_positionrank(lantern, 0, stopwords)

    def test_positionrank_ignores_word_identity(self, stopwords):
        """Test renaming every word consistently carries each score to the new name"""
        sentence = tokenize("Mira lifted the heavy lantern while the owl watched mira and the lantern.")
        renamed = {token: f"w{index}" for index, token in enumerate(dict.fromkeys(sentence.tokens))}
        relabeled = tokenize(" ".join(
            token if not is_content_token(token, stopwords) else renamed[token] for token in sentence.tokens
        ))
        original = score_positionrank(sentence, stopwords)
        moved = score_positionrank(relabeled, stopwords)
        assert len(original) == len(moved) > 3
        for token, score in original.items():
            assert moved[renamed[token]] == pytest.approx(score, abs=1e-9)

    def test_vote(self):
        """Test majority words come first, then mean-rank backfill"""
        outputs = (["a", "b", "c"], ["b", "a", "d"], ["e", "b", "f"])
        assert vote_offtheshelf(outputs, 4) == ["b", "a", "e", "c"]
        with pytest.raises(ValueError):
            vote_offtheshelf(outputs[:2], 4)

    def test_offtheshelf(self, lantern, stopwords):
        """Test the combined extractor on a sentence where all three agree on the set"""
        assert extract_offtheshelf(lantern, 3, stopwords) == ["lantern", "heavy", "old"]

    def test_random_is_seeded(self, stopwords):
        """Test random keywords are distinct content words and reproducible"""
        sentence = tokenize("Mira found a golden lantern and owl.")
        first = extract_random(sentence, 3, 42, stopwords)
        assert first == extract_random(sentence, 3, 42, stopwords)
        assert len(set(first)) == 3
        assert set(first) <= {"mira", "found", "golden", "lantern", "owl"}
        assert len(extract_random(sentence, 50, 0, stopwords)) == 5
        with pytest.raises(ValueError):
            extract_random(sentence, 0, 0, stopwords)


class TestSyntactic:
    """Test the part-of-speech extractors"""

    @pytest.fixture
    def knee(self):
        return tokenize("vigor dropped to one knee, then got up")

    def test_tags(self, knee):
        """Test lexicon lookups and suffix fallbacks"""
        tags = tag_pos(knee, load_pos_lexicon())
        assert tags[0] == "noun"
        assert tags[1] == "verb"
        assert tags[5] == "punct"

    @pytest.mark.parametrize(
        "mode,expected",
        [
            ("noun", ["vigor", "knee"]),
            ("verb", ["dropped", "got"]),
            ("nounverb", ["vigor", "dropped", "knee", "got"]),
        ],
    )
    def test_modes(self, knee, mode, expected):
        """Test each syntactic mode keeps matching tokens in order"""
        tags = tag_pos(knee, load_pos_lexicon())
        assert extract_syntactic(knee, tags, mode, 5) == expected

    def test_cap_and_errors(self, knee):
        """Test the k cap and argument validation"""
        tags = tag_pos(knee, load_pos_lexicon())
        assert extract_syntactic(knee, tags, "nounverb", 2) == ["vigor", "dropped"]
        with pytest.raises(ValueError):
            extract_syntactic(knee, tags[:-1], "noun", 2)
        with pytest.raises(ValueError):
            extract_syntactic(knee, tags, "adjective", 2)
        with pytest.raises(ValueError):
            extract_syntactic(knee, tags, "noun", 0)


class TestPlans:
    """Test plan assembly"""

    def test_finalize_splits_and_caps(self):
        """Test multiword candidates become unigrams and the union is shuffled"""
        plan = finalize_plan([["golden lantern", "mira"], ["owl", "lantern"]], nkps=2, rng_seed=0)
        assert plan.per_sentence == (("golden", "lantern"), ("owl", "lantern"))
        assert sorted(plan.flat) == ["golden", "lantern", "owl"]
        assert plan.training_keywords(1) == ["golden", "owl"]
        assert finalize_plan([["golden lantern", "mira"], ["owl", "lantern"]], 2, 0).flat == plan.flat

    def test_empty_lists_allowed(self):
        """Test a sentence may have no keywords"""
        plan = finalize_plan([[], ["owl"]], nkps=3, rng_seed=1)
        assert plan.per_sentence == ((), ("owl",))
        with pytest.raises(ValueError):
            finalize_plan([["owl"]], nkps=0, rng_seed=1)

    def test_dict_round_trip(self):
        """Test plans survive their dict form"""
        plan = finalize_plan([["a", "b"], ["c"]], nkps=5, rng_seed=3)
        assert KeywordPlan.from_dict(plan.to_dict()).per_sentence == plan.per_sentence


class TestPlanExtractor:
    """Test the extraction driver"""

    def test_unknown_extractor(self):
        """Test unknown extractor names are config errors"""
        with pytest.raises(ConfigError):
            PlanExtractor("yake")

    def test_attention_needs_model(self):
        """Test the attention extractor requires a model and vocabulary"""
        with pytest.raises(ConfigError):
            PlanExtractor("attention")

    def test_plan_hook(self, sample_paragraphs):
        """Test the hook builds one keyword list per target sentence"""
        extractor = PlanExtractor("noun", nkps=2)
        plan = extractor(sample_paragraphs[0], MaskSpec(start=1, t=2))
        assert len(plan.per_sentence) == 2
        assert plan.per_sentence[0] == ("forest", "mira")
        assert all(len(words) <= 2 for words in plan.per_sentence)

    def test_random_plans_are_seeded(self, sample_paragraphs):
        """Test random plans depend on the seed and the sentence"""
        mask = MaskSpec(start=0, t=2)
        first = PlanExtractor("random", nkps=2, seed=9)(sample_paragraphs[1], mask)
        second = PlanExtractor("random", nkps=2, seed=9)(sample_paragraphs[1], mask)
        assert first == second

    def test_counts_empty_lists(self, make_paragraph):
        """Test empty keyword lists are counted"""
        paragraph = make_paragraph(["The end.", "It was the one.", "Mira ran home.", "Owl flew off.", "They left."])
        extractor = PlanExtractor("verb", nkps=3)
        extractor(paragraph, MaskSpec(start=0, t=1))
        assert extractor.empty_lists == 1


class TestAttentionExtractor:
    """Test attention-based keywords"""

    def test_ranks_by_score(self, tiny_model, sample_vocab, positive_instances, monkeypatch):
        """Test top-k selection with first-occurrence tie breaks"""
        monkeypatch.setattr(
            attention_module, "attention_scores", lambda *args, **kwargs: [("a", 0.2), ("b", 0.5), ("c", 0.5)]
        )
        assert extract_attention(tiny_model, positive_instances[0], sample_vocab, 2) == ["b", "c"]
        with pytest.raises(ValueError):
            extract_attention(tiny_model, positive_instances[0], sample_vocab, 0)

    def test_scores_cover_context_words(self, tiny_model, sample_vocab, positive_instances):
        """Test scores name context words only, never specials or punctuation"""
        instance = positive_instances[0]
        scores = attention_scores(tiny_model, instance, sample_vocab)
        context_words = {token for sentence in instance.context for token in sentence.tokens}
        assert scores
        assert {token for token, _ in scores} <= context_words
        assert all(token.isalnum() for token, _ in scores)
        assert all(score >= 0 for _, score in scores)

    def test_per_sentence_keywords(self, tiny_model, sample_vocab, sample_paragraphs):
        """Test keywords for a chosen target sentence"""
        instance = make_instance(sample_paragraphs[0], MaskSpec(start=1, t=2))
        keywords = extract_attention(tiny_model, instance, sample_vocab, 3, sentence_index=1)
        assert 0 < len(keywords) <= 3
        with pytest.raises(ValueError):
            extract_attention(tiny_model, instance, sample_vocab, 3, sentence_index=2)

    def test_scores_ignore_bos_queries(self, tiny_config, make_paragraph, monkeypatch):
        """Test only target-token query rows contribute, never the <bos> row"""
        paragraph = make_paragraph([
            "Alpha bravo went home.", "Charlie delta sang loudly.", "Echo foxtrot slept well.",
            "Golf hotel ran far.", "India juliet ate bread.",
        ])
        vocab = build_vocab([paragraph])
        model = build_model(tiny_config, vocab)
        instance = make_instance(paragraph, MaskSpec(start=3, t=1))

        def fake_decoder_hidden(context_vector, ids, return_attention=False):
            length = ids.shape[1]
            attention = torch.zeros(1, tiny_config.n_heads, length, length)
            for row in range(length):
                # <bos> queries look only at column 1, every other query at column 2
                attention[0, :, row, 1 if int(ids[0, row]) == BOS_ID else 2] = 1.0
            return torch.zeros(1, length, tiny_config.d_model), [attention]

        monkeypatch.setattr(model, "decoder_hidden", fake_decoder_hidden)
        scores = dict(attention_scores(model, instance, vocab))
        assert scores["alpha"] == 0.0
        assert scores["bravo"] == pytest.approx(1.0)

    def test_vocabulary_mismatch(self, tiny_model, positive_instances):
        """Test a foreign vocabulary is rejected"""
        other = build_vocab(segment_paragraphs("A b. C d. E f. G h.", min_len=4))
        with pytest.raises(VocabularyMismatchError):
            attention_scores(tiny_model, positive_instances[0], other)

    def test_no_attention_layers(self, tiny_model, sample_vocab, positive_instances):
        """Test models without attention blocks are unsupported"""
        tiny_model.blocks = torch.nn.ModuleList()
        with pytest.raises(UnsupportedExtractorError):
            attention_scores(tiny_model, positive_instances[0], sample_vocab)

    def test_pipeline_uses_model(self, tiny_model, sample_vocab, positive_instances):
        """Test the attention family through the extraction driver"""
        extractor = PlanExtractor("attention", nkps=2, model=tiny_model, vocab=sample_vocab)
        plan = extractor.instance_plan(positive_instances[0])
        assert len(plan.per_sentence) == positive_instances[0].t
        assert all(0 < len(words) <= 2 for words in plan.per_sentence)


if __name__ == "__main__":
    pytest.main([__file__])
