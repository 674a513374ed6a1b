"""
ParCom instance construction.

Every paragraph is expanded into all contiguous target windows whose context
is strictly larger than the target ("permutation masking"). Each window becomes
one ``MaskedInstance`` carrying the original sentence positions and the gold
plan keywords; half of the instances can then be turned into next-sentence
negatives by swapping in a span from another paragraph.
"""

import json
import logging
import random
from dataclasses import dataclass, replace
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from .corpus import Paragraph
from .exceptions import CorpusError
from .extractors.plan import KeywordPlan

logger = logging.getLogger(__name__)

ParagraphKey = Tuple[str, int]


@dataclass(frozen=True)
class MaskSpec:
    """A contiguous window of ``t`` target sentences starting at ``start``"""
    start: int
    t: int

    def is_valid_for(self, paragraph_len: int) -> bool:
        return (
            self.t >= 1
            and self.start >= 0
            and self.start + self.t <= paragraph_len
            and paragraph_len - self.t > self.t
        )


@dataclass(frozen=True)
class PositionedSentence:
    """Sentence tokens with their position in the source paragraph"""
    pos: int
    tokens: Tuple[str, ...]


@dataclass(frozen=True)
class MaskedInstance:
    """One ParCom example: context, masked target span and gold plan"""
    doc_id: str
    para_index: int
    context: Tuple[PositionedSentence, ...]
    target: Tuple[PositionedSentence, ...]
    plan: KeywordPlan
    is_negative_nsp: bool = False

    @property
    def paragraph_len(self) -> int:
        return len(self.context) + len(self.target)

    @property
    def start(self) -> int:
        return self.target[0].pos

    @property
    def t(self) -> int:
        return len(self.target)

    @property
    def paragraph_key(self) -> ParagraphKey:
        return (self.doc_id, self.para_index)

    @property
    def instance_id(self) -> str:
        return f"{self.doc_id}:{self.para_index}:{self.start}:{self.t}"

    def to_dict(self) -> Dict:
        return {
            "doc_id": self.doc_id,
            "para_index": self.para_index,
            "context": [{"pos": s.pos, "tokens": list(s.tokens)} for s in self.context],
            "target": [{"pos": s.pos, "tokens": list(s.tokens)} for s in self.target],
            "plan": self.plan.to_dict(),
            "negative": self.is_negative_nsp,
        }

    @classmethod
    def from_dict(cls, payload: Dict) -> "MaskedInstance":
        return cls(
            doc_id=str(payload["doc_id"]),
            para_index=int(payload["para_index"]),
            context=tuple(PositionedSentence(int(s["pos"]), tuple(s["tokens"])) for s in payload["context"]),
            target=tuple(PositionedSentence(int(s["pos"]), tuple(s["tokens"])) for s in payload["target"]),
            plan=KeywordPlan.from_dict(payload.get("plan", {})),
            is_negative_nsp=bool(payload.get("negative", False)),
        )


def enumerate_masks(l: int, t_max: int) -> List[MaskSpec]:
    """All windows with ``1 <= t <= t_max`` and ``l - t > t``, ordered by (t, start)."""
    if l < 2:
        raise ValueError(f"paragraph length must be >= 2, got {l}")
    if t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")
    specs = []
    for t in range(1, t_max + 1):
        if l - t <= t:
            break
        specs.extend(MaskSpec(start=start, t=t) for start in range(l - t + 1))
    return specs


def make_instance(paragraph: Paragraph, mask: MaskSpec, plan: Optional[KeywordPlan] = None) -> MaskedInstance:
    """Cut ``paragraph`` into context and target according to ``mask``."""
    l = len(paragraph)
    if not mask.is_valid_for(l):
        raise CorpusError(f"mask (start={mask.start}, t={mask.t}) is not valid for a paragraph of length {l}")

    target_range = range(mask.start, mask.start + mask.t)
    context, target = [], []
    for pos, sentence in enumerate(paragraph.sentences):
        bucket = target if pos in target_range else context
        bucket.append(PositionedSentence(pos=pos, tokens=sentence.tokens))
    return MaskedInstance(
        doc_id=paragraph.doc_id,
        para_index=paragraph.para_index,
        context=tuple(context),
        target=tuple(target),
        plan=plan if plan is not None else KeywordPlan.empty(mask.t),
    )


def reconstruct_paragraph(instance: MaskedInstance) -> List[Tuple[str, ...]]:
    """Splice the target back into the context at the recorded positions."""
    by_position = {s.pos: s.tokens for s in instance.context + instance.target}
    if sorted(by_position) != list(range(instance.paragraph_len)):
        raise CorpusError(f"instance {instance.instance_id} does not cover positions 0..{instance.paragraph_len - 1}")
    return [by_position[pos] for pos in range(instance.paragraph_len)]


def count_instances(l: int, t_max: int) -> int:
    """Closed-form number of masks for a paragraph of length ``l``."""
    upper = min(t_max, (l + 1) // 2 - 1)
    return sum(l - t + 1 for t in range(1, upper + 1))


def enumerate_instances(
    paragraphs: Iterable[Paragraph],
    t_max: int,
    plan_fn: Optional[Callable[[Paragraph, MaskSpec], KeywordPlan]] = None,
) -> Iterator[MaskedInstance]:
    """Yield every masked instance of every paragraph."""
    for paragraph in paragraphs:
        for mask in enumerate_masks(len(paragraph), t_max):
            plan = plan_fn(paragraph, mask) if plan_fn is not None else None
            yield make_instance(paragraph, mask, plan)


def _draw_donor_span(
    paragraphs: Dict[ParagraphKey, List[Tuple[str, ...]]],
    keys: Sequence[ParagraphKey],
    instance: MaskedInstance,
    rng: random.Random,
    attempts: int = 32,
) -> Tuple[List[Tuple[str, ...]], int]:
    """A random donor paragraph and span start whose sentences differ from the instance's target."""
    original = [slot.tokens for slot in instance.target]
    donors = [key for key in keys if key != instance.paragraph_key and len(paragraphs[key]) >= instance.t]
    if not donors:
        raise CorpusError(f"no other paragraph has {instance.t} sentences for {instance.instance_id}")
    for _ in range(attempts):
        donor = paragraphs[rng.choice(donors)]
        offset = rng.randrange(len(donor) - instance.t + 1)
        if donor[offset:offset + instance.t] != original:
            return donor, offset
    # duplicated text everywhere: fall back to every differing span
    spans = [
        (paragraphs[key], offset) for key in donors
        for offset in range(len(paragraphs[key]) - instance.t + 1)
        if paragraphs[key][offset:offset + instance.t] != original
    ]
    if not spans:
        raise CorpusError(f"every candidate span repeats the target of {instance.instance_id}")
    return rng.choice(spans)


def make_nsp_negatives(instances: Sequence[MaskedInstance], rng_seed: int) -> List[MaskedInstance]:
    """
    Turn a uniformly chosen half of ``instances`` into next-sentence negatives.

    A negative keeps its context, positions and plan; only the target tokens
    are replaced by an equal-length contiguous span drawn from a different
    source paragraph, never one whose sentences equal the original target.
    """
    paragraphs: Dict[ParagraphKey, List[Tuple[str, ...]]] = {}
    for instance in instances:
        if instance.paragraph_key not in paragraphs and not instance.is_negative_nsp:
            paragraphs[instance.paragraph_key] = reconstruct_paragraph(instance)
    if len(paragraphs) < 2:
        raise CorpusError("next-sentence negatives need at least two source paragraphs")

    rng = random.Random(rng_seed)
    keys = sorted(paragraphs)
    chosen = set(rng.sample(range(len(instances)), len(instances) // 2))

    result: List[MaskedInstance] = []
    for index, instance in enumerate(instances):
        if index not in chosen:
            result.append(instance)
            continue
        donor, offset = _draw_donor_span(paragraphs, keys, instance, rng)
        swapped = tuple(
            PositionedSentence(pos=slot.pos, tokens=donor[offset + i]) for i, slot in enumerate(instance.target)
        )
        result.append(replace(instance, target=swapped, is_negative_nsp=True))

    logger.info(f"Marked {len(chosen)} of {len(instances)} instances as next-sentence negatives")
    return result


def split_paragraphs(
    paragraphs: Sequence[Paragraph],
    seed: int,
    ratios: Tuple[float, float, float] = (0.9, 0.05, 0.05),
) -> Tuple[List[Paragraph], List[Paragraph], List[Paragraph]]:
    """Seeded train/valid/test split at paragraph level."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    order = list(range(len(paragraphs)))
    random.Random(seed).shuffle(order)
    n_valid = int(round(ratios[1] * len(order)))
    n_test = int(round(ratios[2] * len(order)))
    n_train = len(order) - n_valid - n_test
    pick = lambda indices: [paragraphs[i] for i in indices]
    return (
        pick(order[:n_train]),
        pick(order[n_train:n_train + n_valid]),
        pick(order[n_train + n_valid:]),
    )


def write_jsonl(instances: Iterable[MaskedInstance], path: str) -> int:
    """Write instances one JSON object per line; returns the count."""
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for instance in instances:
            f.write(json.dumps(instance.to_dict(), ensure_ascii=False, separators=(",", ":")))
            f.write("\n")
            count += 1
    return count


def read_jsonl(path: str) -> List[MaskedInstance]:
    """Read instances written by ``write_jsonl``."""
    instances = []
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                instances.append(MaskedInstance.from_dict(json.loads(line)))
            except (KeyError, ValueError, TypeError) as e:
                raise CorpusError(f"{path}:{line_number}: malformed instance ({e})") from e
    return instances
