"""
Corpus ingestion: paragraph and sentence segmentation, tokenization and the
vocabulary shared by every later stage.
"""

import hashlib
import json
import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

import regex

from .exceptions import CorpusError, DecodeError

logger = logging.getLogger(__name__)

PAD, UNK, BOS, EOS, SEP = "<pad>", "<unk>", "<bos>", "<eos>", "<sep>"
SPECIAL_TOKENS: Tuple[str, ...] = (PAD, UNK, BOS, EOS, SEP)
PAD_ID, UNK_ID, BOS_ID, EOS_ID, SEP_ID = range(len(SPECIAL_TOKENS))

_TOKEN_PATTERN = regex.compile(r"[\p{L}\p{N}_]+|[^\p{L}\p{N}_\s]")
_SENTENCE_BOUNDARY = regex.compile(r"(?<=[.!?])\s+")
_PARAGRAPH_BOUNDARY = regex.compile(r"\n[ \t]*\n+")


@dataclass(frozen=True)
class Sentence:
    """A tokenized sentence together with its raw text"""
    tokens: Tuple[str, ...]
    raw: str

    def __post_init__(self):
        if not self.tokens:
            raise CorpusError("sentence has no tokens")
        if any(regex.search(r"\s", token) for token in self.tokens):
            raise CorpusError("sentence tokens must not contain whitespace")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Paragraph:
    """An ordered run of sentences from one source document"""
    sentences: Tuple[Sentence, ...]
    doc_id: str
    para_index: int

    def __len__(self) -> int:
        return len(self.sentences)


def tokenize(raw_sentence: str) -> Sentence:
    """Lowercase a sentence and split words from punctuation."""
    tokens = tuple(_TOKEN_PATTERN.findall(raw_sentence.lower()))
    if not tokens:
        raise CorpusError(f"cannot tokenize an empty sentence: {raw_sentence!r}")
    return Sentence(tokens=tokens, raw=raw_sentence.strip())


def split_sentences(text: str) -> List[str]:
    """Split text on terminal punctuation followed by whitespace."""
    flattened = " ".join(text.split())
    if not flattened:
        return []
    return [part for part in _SENTENCE_BOUNDARY.split(flattened) if part.strip()]


def segment_paragraphs(
    raw_text: str,
    min_len: int = 4,
    max_len: int = 7,
    single_paragraph_mode: bool = False,
    doc_id: str = "doc",
) -> List[Paragraph]:
    """
    Split a document into paragraphs of tokenized sentences.

    Paragraphs are separated by blank lines unless ``single_paragraph_mode``
    treats the whole document as one paragraph. Paragraphs whose sentence count
    falls outside ``[min_len, max_len]`` are dropped; ``para_index`` still counts
    them so indices stay stable across length settings.
    """
    if min_len < 2:
        raise ValueError(f"min_len must be >= 2, got {min_len}")
    if max_len < min_len:
        raise ValueError(f"max_len ({max_len}) must be >= min_len ({min_len})")
    if isinstance(raw_text, bytes):
        raw_text = raw_text.decode("utf-8")

    blocks = [raw_text] if single_paragraph_mode else _PARAGRAPH_BOUNDARY.split(raw_text)
    paragraphs: List[Paragraph] = []
    para_index = 0
    for block in blocks:
        if not block.strip():
            continue
        sentences = []
        for raw_sentence in split_sentences(block):
            try:
                sentences.append(tokenize(raw_sentence))
            except CorpusError:
                continue
        if sentences and min_len <= len(sentences) <= max_len:
            paragraphs.append(Paragraph(tuple(sentences), doc_id=doc_id, para_index=para_index))
        elif sentences:
            logger.debug(f"Dropping paragraph {doc_id}:{para_index} with {len(sentences)} sentences")
        para_index += 1
    return paragraphs


def load_corpus(
    paths: Sequence[str],
    min_len: int = 4,
    max_len: int = 7,
    single_paragraph_mode: bool = False,
) -> List[Paragraph]:
    """Read UTF-8 text files (one document each) and segment them."""
    paragraphs: List[Paragraph] = []
    for path in paths:
        with open(path, "rb") as f:
            raw_bytes = f.read()
        try:
            raw_text = raw_bytes.decode("utf-8")
        except UnicodeDecodeError as e:
            raise CorpusError(f"{path}: not valid UTF-8 (byte {e.start}: {e.reason})") from e
        doc_id = os.path.splitext(os.path.basename(path))[0]
        kept = segment_paragraphs(raw_text, min_len, max_len, single_paragraph_mode, doc_id=doc_id)
        logger.info(f"Loaded {len(kept)} paragraphs from {path}")
        paragraphs.extend(kept)
    return paragraphs


@dataclass
class Vocabulary:
    """Token/id bijection with reserved special tokens and frequency counts"""
    token_of: List[str]
    counts: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if tuple(self.token_of[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ValueError("vocabulary must start with the special tokens")
        self.id_of: Dict[str, int] = {token: idx for idx, token in enumerate(self.token_of)}
        if len(self.id_of) != len(self.token_of):
            raise ValueError("vocabulary contains duplicate tokens")

    def __len__(self) -> int:
        return len(self.token_of)

    def __contains__(self, token: str) -> bool:
        return token in self.id_of

    @property
    def specials(self) -> Dict[str, int]:
        return {token: idx for idx, token in enumerate(SPECIAL_TOKENS)}

    def is_special(self, token_id: int) -> bool:
        return 0 <= token_id < len(SPECIAL_TOKENS)

    def encode_tokens(self, tokens: Iterable[str]) -> List[int]:
        return [self.id_of.get(token, UNK_ID) for token in tokens]

    def encode(self, sentence: Sentence) -> List[int]:
        """Map a sentence onto ids; unknown tokens become UNK."""
        return self.encode_tokens(sentence.tokens)

    def decode(self, ids: Iterable[int]) -> List[str]:
        """Map ids back onto token strings."""
        tokens = []
        for token_id in ids:
            token_id = int(token_id)
            if not 0 <= token_id < len(self.token_of):
                raise DecodeError(f"token id {token_id} outside vocabulary of size {len(self.token_of)}")
            tokens.append(self.token_of[token_id])
        return tokens

    def to_json(self) -> str:
        """Canonical JSON form; identical vocabularies give identical bytes."""
        payload = {
            "specials": list(SPECIAL_TOKENS),
            "tokens": [[token, self.counts.get(token, 0)] for token in self.token_of[len(SPECIAL_TOKENS):]],
        }
        return json.dumps(payload, ensure_ascii=False, separators=(",", ":"))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_json())
            f.write("\n")

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        payload = json.loads(text)
        if tuple(payload.get("specials", ())) != SPECIAL_TOKENS:
            raise ValueError("vocabulary file has unexpected special tokens")
        tokens = [token for token, _ in payload["tokens"]]
        counts = {token: int(count) for token, count in payload["tokens"]}
        return cls(token_of=list(SPECIAL_TOKENS) + tokens, counts=counts)

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(f.read())


def build_vocab(paragraphs: Sequence[Paragraph], max_vocab: int = 50000) -> Vocabulary:
    """
    Rank tokens by frequency (ties broken lexicographically) and keep the
    top ``max_vocab - 5`` after the five special tokens.
    """
    if not paragraphs:
        raise CorpusError("cannot build a vocabulary from an empty paragraph list")
    if max_vocab <= len(SPECIAL_TOKENS):
        raise ValueError(f"max_vocab must exceed {len(SPECIAL_TOKENS)}, got {max_vocab}")

    counter: Counter = Counter()
    for paragraph in paragraphs:
        for sentence in paragraph.sentences:
            counter.update(sentence.tokens)
    for special in SPECIAL_TOKENS:
        counter.pop(special, None)

    ranked = sorted(counter.items(), key=lambda item: (-item[1], item[0]))
    kept = ranked[: max_vocab - len(SPECIAL_TOKENS)]
    vocab = Vocabulary(
        token_of=list(SPECIAL_TOKENS) + [token for token, _ in kept],
        counts={token: count for token, count in kept},
    )
    logger.info(f"Built vocabulary with {len(vocab)} ids ({len(counter)} distinct tokens seen)")
    return vocab
