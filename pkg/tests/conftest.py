"""
Test configuration and fixtures
"""

import pytest

from ssplanner.config import TrainConfig
from ssplanner.corpus import Paragraph, build_vocab, segment_paragraphs
from ssplanner.extractors.pipeline import PlanExtractor
from ssplanner.parcom import enumerate_instances, make_nsp_negatives
from ssplanner.trainer import build_model


SAMPLE_TEXT = """Mira walked to the forest. At the forest, mira found a golden lantern. The lantern was old and heavy. Owl helped mira carry the lantern. Together they left the forest.

Tomas travelled to the harbor at dawn. Near the harbor tomas noticed a broken compass. The compass glowed in the moon. Sailor asked tomas about the compass. Tomas and sailor rested near the harbor.

One morning elena reached the castle. At the castle, elena found a silver crown. The crown was shiny and strange. Knight helped elena carry the crown. Elena kept the crown in a chest.

Vigor walked to the market. Near the market vigor noticed a small drum. The drum was heavy and broken. Baker asked vigor about the drum. Together they left the market.
"""


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow training experiments")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: training experiments that take minutes")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def sample_text():
    """Four five-sentence toy paragraphs"""
    return SAMPLE_TEXT


@pytest.fixture
def sample_paragraphs():
    """Segmented sample paragraphs"""
    return segment_paragraphs(SAMPLE_TEXT, min_len=4, max_len=7, doc_id="sample")


@pytest.fixture
def sample_vocab(sample_paragraphs):
    """Vocabulary over every sample paragraph"""
    return build_vocab(sample_paragraphs)


@pytest.fixture
def sample_instances(sample_paragraphs):
    """Every t <= 2 instance with off-the-shelf plans and next-sentence negatives"""
    extractor = PlanExtractor("offtheshelf", nkps=5, seed=0)
    instances = list(enumerate_instances(sample_paragraphs, 2, extractor))
    return make_nsp_negatives(instances, rng_seed=7)


@pytest.fixture
def positive_instances(sample_instances):
    return [instance for instance in sample_instances if not instance.is_negative_nsp]


@pytest.fixture
def tiny_config():
    """A one-layer planner small enough for unit tests"""
    return TrainConfig(
        epochs=2,
        d_model=16,
        d_pos=4,
        n_layers=1,
        n_heads=2,
        max_seq=64,
        batch_size=8,
        p=6,
        show_progress=False,
    )


@pytest.fixture
def tiny_model(tiny_config, sample_vocab):
    """Seeded tiny planner over the sample vocabulary"""
    return build_model(tiny_config, sample_vocab)


@pytest.fixture
def make_paragraph():
    """Factory for paragraphs built from raw sentences"""

    def factory(sentences, doc_id="doc", para_index=0):
        parsed = segment_paragraphs(" ".join(sentences), min_len=2, max_len=len(sentences), doc_id=doc_id)
        assert len(parsed) == 1
        return Paragraph(parsed[0].sentences, doc_id=doc_id, para_index=para_index)

    return factory
