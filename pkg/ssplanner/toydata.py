"""
Seeded toy corpus of short topical paragraphs.

Every paragraph follows one hero, place, object and companion, so the words a
masked sentence needs are usually predictable from its context. The bundled
``data/toy_corpus.txt`` is written in the same style.
"""

import logging
import os
import random
from typing import Dict, List, Optional

from .corpus import Paragraph, segment_paragraphs

logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
TOY_CORPUS_PATH = os.path.join(DATA_DIR, "toy_corpus.txt")

HEROES = ("mira", "tomas", "elena", "vigor", "anya", "bram", "celia", "doran", "ida", "kasim")
PLACES = ("forest", "harbor", "castle", "market", "tower", "river", "cave", "village", "temple", "garden")
OBJECTS = ("lantern", "sword", "map", "key", "crown", "shield", "compass", "book", "ring", "drum")
COMPANIONS = ("owl", "fox", "knight", "sailor", "baker", "wizard", "miller", "hunter", "monk", "raven")
ADJECTIVES = ("old", "shiny", "broken", "small", "golden", "silver", "heavy", "strange")
LIGHTS = ("sun", "moon", "dark")
CONTAINERS = ("chest", "bag", "box")

# one pool of templates per sentence position
TEMPLATES = (
    ("{hero} walked to the {place}.", "{hero} travelled to the {place} at dawn.", "one morning {hero} reached the {place}."),
    ("at the {place}, {hero} found a {adj} {object}.", "near the {place} {hero} noticed a {adj} {object}."),
    ("the {object} was {adj2} and {adj3}.", "the {object} glowed in the {light}."),
    ("{companion} helped {hero} carry the {object}.", "{companion} asked {hero} about the {object}."),
    ("together they left the {place}.", "{hero} and {companion} rested near the {place}."),
    ("{hero} kept the {object} in a {container}.", "later {hero} gave the {object} to {companion}."),
    ("{companion} smiled at {hero}.", "the {object} stayed with {hero} forever."),
)


def _slots(rng: random.Random) -> Dict[str, str]:
    adj, adj2, adj3 = rng.sample(ADJECTIVES, 3)
    return {
        "hero": rng.choice(HEROES),
        "place": rng.choice(PLACES),
        "object": rng.choice(OBJECTS),
        "companion": rng.choice(COMPANIONS),
        "adj": adj,
        "adj2": adj2,
        "adj3": adj3,
        "light": rng.choice(LIGHTS),
        "container": rng.choice(CONTAINERS),
    }


def generate_paragraph_text(rng: random.Random, min_len: int = 4, max_len: int = 7) -> str:
    """One paragraph of ``min_len..max_len`` sentences about a single topic."""
    if not 1 <= min_len <= max_len <= len(TEMPLATES):
        raise ValueError(f"paragraph length bounds must lie within 1..{len(TEMPLATES)}")
    slots = _slots(rng)
    length = rng.randint(min_len, max_len)
    sentences = [rng.choice(TEMPLATES[position]).format(**slots) for position in range(length)]
    return " ".join(sentence[0].upper() + sentence[1:] for sentence in sentences)


def generate_corpus_text(n_paragraphs: int, seed: int, min_len: int = 4, max_len: int = 7) -> str:
    """Blank-line separated toy paragraphs; identical for identical seeds."""
    rng = random.Random(seed)
    return "\n\n".join(generate_paragraph_text(rng, min_len, max_len) for _ in range(n_paragraphs)) + "\n"


def toy_paragraphs(n_paragraphs: int, seed: int, doc_id: str = "toy") -> List[Paragraph]:
    """Segmented toy paragraphs ready for instance enumeration."""
    return segment_paragraphs(generate_corpus_text(n_paragraphs, seed), min_len=4, max_len=7, doc_id=doc_id)


def write_toy_corpus(path: str, n_paragraphs: int, seed: int) -> str:
    with open(path, "w", encoding="utf-8") as f:
        f.write(generate_corpus_text(n_paragraphs, seed))
    logger.info(f"Wrote {n_paragraphs} toy paragraphs to {path}")
    return path


def bundled_paragraphs(path: Optional[str] = None) -> List[Paragraph]:
    """The shipped 20-paragraph corpus used by the overfit check."""
    with open(path or TOY_CORPUS_PATH, "r", encoding="utf-8") as f:
        return segment_paragraphs(f.read(), min_len=4, max_len=7, doc_id="toy_corpus")
