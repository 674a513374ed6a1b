"""
Plan extraction driver: runs the configured extractor family over every
target sentence of an instance and assembles the final keyword plan.
"""

import logging
from typing import Dict, FrozenSet, List, Optional

from ..config import derive_seed
from ..corpus import Paragraph, Sentence, Vocabulary
from ..exceptions import ConfigError
from ..parcom import MaskedInstance, MaskSpec, make_instance
from .attention import extract_attention
from .keywords import extract_offtheshelf, extract_random, load_stopwords
from .plan import KeywordPlan, finalize_plan
from .syntactic import extract_syntactic, load_pos_lexicon, tag_pos

logger = logging.getLogger(__name__)

EXTRACTORS = ("offtheshelf", "noun", "verb", "nounverb", "attention", "random")


class PlanExtractor:
    """Build gold keyword plans with one extractor family"""

    def __init__(
        self,
        extractor: str = "offtheshelf",
        nkps: int = 5,
        seed: int = 0,
        stopwords: Optional[FrozenSet[str]] = None,
        lexicon: Optional[Dict[str, str]] = None,
        damping: float = 0.85,
        tol: float = 1e-6,
        model=None,
        vocab: Optional[Vocabulary] = None,
    ):
        if extractor not in EXTRACTORS:
            raise ConfigError(f"unknown extractor {extractor!r}; expected one of {', '.join(EXTRACTORS)}")
        if extractor == "attention" and (model is None or vocab is None):
            raise ConfigError("the attention extractor needs a trained model (attention_checkpoint) and its vocabulary")

        self.logger = logging.getLogger(__name__)
        self.extractor = extractor
        self.nkps = nkps
        self.seed = seed
        self.stopwords = stopwords if stopwords is not None else load_stopwords()
        self.lexicon = lexicon if lexicon is not None else load_pos_lexicon()
        self.damping = damping
        self.tol = tol
        self.model = model
        self.vocab = vocab
        self.empty_lists = 0

    def sentence_keywords(self, sentence: Sentence, seed_name: str = "sentence") -> List[str]:
        """Keywords of one sentence for every extractor family except attention."""
        if self.extractor == "offtheshelf":
            return extract_offtheshelf(sentence, self.nkps, self.stopwords, self.damping, self.tol)
        if self.extractor == "random":
            return extract_random(sentence, self.nkps, derive_seed(self.seed, f"random:{seed_name}"), self.stopwords)
        if self.extractor in ("noun", "verb", "nounverb"):
            return extract_syntactic(sentence, tag_pos(sentence, self.lexicon), self.extractor, self.nkps)
        raise ConfigError(f"extractor {self.extractor!r} needs an instance, not a single sentence")

    def instance_plan(self, instance: MaskedInstance) -> KeywordPlan:
        """Per-target-sentence keywords of ``instance`` turned into a final plan."""
        per_sentence = []
        for index, target in enumerate(instance.target):
            if self.extractor == "attention":
                keywords = extract_attention(self.model, instance, self.vocab, self.nkps, sentence_index=index)
            else:
                sentence = Sentence(tokens=target.tokens, raw=" ".join(target.tokens))
                keywords = self.sentence_keywords(sentence, f"{instance.doc_id}:{instance.para_index}:{target.pos}")
            if not keywords:
                self.empty_lists += 1
            per_sentence.append(keywords)
        return finalize_plan(per_sentence, self.nkps, derive_seed(self.seed, f"plan:{instance.instance_id}"))

    def __call__(self, paragraph: Paragraph, mask: MaskSpec) -> KeywordPlan:
        """``plan_fn`` hook for ``enumerate_instances``."""
        return self.instance_plan(make_instance(paragraph, mask))
