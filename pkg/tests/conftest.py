"""Shared builders: a tiny model configuration and class-separable examples
small enough for finite-difference sweeps."""

import numpy as np
import pytest

from nwqm.encoders import Vocabulary
from nwqm.model import ModelConfig, PageExample, init_params
from nwqm.preprocess import SPECIAL_TOKENS

CLASS_MARKERS = [f"marker{c}" for c in range(6)]
FILLERS = ["alpha", "beta", "gamma", "delta"]


def tiny_config(**overrides):
    base = dict(section_dim=5, toy_embed_dim=4, gru_hidden=3, attention_dim=6,
                talk_input_dim=7, image_input_dim=9, classifier_hidden=8,
                max_sections=4, budget_head=3, budget_tail=5, vocab_size=100,
                dropout=0.5)
    base.update(overrides)
    return ModelConfig(**base)


def tiny_vocab():
    return Vocabulary.build([CLASS_MARKERS + FILLERS],
                            special_tokens=SPECIAL_TOKENS.all())


def tiny_example(rng, config, label, n_sections=None, signal=True):
    marker = CLASS_MARKERS[label]
    n_sections = n_sections or int(rng.integers(1, config.max_sections + 1))
    sections = []
    for _ in range(n_sections):
        tokens = [str(rng.choice(FILLERS)) for _ in range(int(rng.integers(2, 6)))]
        if signal:
            tokens.append(marker)
        sections.append(tokens)
    page_tokens = [t for sec in sections for t in sec]
    n_sentences = 1 + label + int(rng.integers(0, 2))
    talk = rng.normal(0, 0.3, size=(n_sentences, config.talk_input_dim))
    if signal:
        talk[:, label % config.talk_input_dim] += 1.5
    image = rng.normal(0, 0.3, size=config.image_input_dim)
    if signal:
        image[label % config.image_input_dim] += 1.5
    return PageExample(
        page_id=int(rng.integers(1, 10_000)), label=label,
        section_tokens=sections, pad_count=config.max_sections - n_sections,
        page_tokens=page_tokens, talk_embeddings=talk, image_vector=image,
        image_present=True, main_length=len(page_tokens),
        talk_length=n_sentences * 5)


def tiny_examples(rng, config, per_class=2, signal=True):
    return [tiny_example(rng, config, label, signal=signal)
            for label in range(6) for _ in range(per_class)]


@pytest.fixture
def tiny_setup():
    config = tiny_config()
    rng = np.random.default_rng(123)
    examples = tiny_examples(rng, config, per_class=2)
    return config, examples


def make_params(config, variant, seed=0):
    return init_params(config, variant, seed, vocab=tiny_vocab())
