"""Bundled synthetic corpus: six quality classes with class-correlated
token patterns, talk-page lengths and image vectors.

Every experiment in the test suite and the demos runs on this corpus, so
no network access or real dumps are needed. Page text is genuine wikitext
(headings, links, templates, references) so the whole pipeline is
exercised end to end.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Tuple
from xml.sax.saxutils import escape

import numpy as np

from .dump_ingest import (CLASS_NAMES, PagePair, RawPage, extract_label,
                          split_corpus, write_corpus, class_counts)
from .store import write_embedding_store

IMAGE_DIM = 2048

MARKERS = {
    "Stub": ["sparse", "bare", "skeletal", "minimal"],
    "Start": ["basic", "rough", "drafted", "outlined"],
    "C": ["growing", "uneven", "partial", "halfway"],
    "B": ["solid", "broad", "organized", "detailed"],
    "GA": ["rigorous", "balanced", "coherent", "thorough"],
    "FA": ["definitive", "exemplary", "comprehensive", "authoritative"],
}

_FILLER = (
    "the article describes the subject and its history with context from "
    "several sources covering early development later reception and notable "
    "events while editors discuss structure citations neutrality and scope"
).split()

_HEADINGS = ["Background", "History", "Development", "Reception", "Analysis",
             "Legacy", "Geography", "Culture", "Economy", "Notes"]

_TOPICS = ["Harbor", "Meridian", "Quarry", "Lantern", "Orchard", "Viaduct",
           "Causeway", "Foundry", "Estuary", "Observatory"]


def _sentence(rng: np.random.Generator, markers: List[str], marker_prob: float) -> str:
    words = [str(rng.choice(_FILLER)) for _ in range(int(rng.integers(6, 11)))]
    if rng.random() < marker_prob:
        for _ in range(int(rng.integers(1, 3))):
            words.insert(int(rng.integers(0, len(words) + 1)), str(rng.choice(markers)))
    words[0] = words[0].capitalize()
    return " ".join(words) + "."


def _section_body(rng, markers, ordinal, force_marker: bool = False) -> str:
    sentences = []
    for i in range(int(rng.integers(2, 5))):
        prob = 1.0 if (force_marker and i == 0) else 0.55
        text = _sentence(rng, markers, marker_prob=prob)
        if rng.random() < 0.15:
            pieces = text.split()
            k = int(rng.integers(1, len(pieces)))
            pieces[k] = f"[[{pieces[k]}]]"
            text = " ".join(pieces)
        if rng.random() < 0.08 * ordinal:
            text += "<ref>origin of the claim</ref>"
        sentences.append(text)
    return " ".join(sentences)


def _main_text(rng, label: str, ordinal: int, title: str) -> str:
    markers = MARKERS[label]
    parts = []
    if ordinal >= 3:
        parts.append("{{Infobox subject|name=" + title + "|kind=synthetic}}")
    parts.append(_section_body(rng, markers, ordinal, force_marker=True))
    n_sections = int(np.clip(1 + round(ordinal * 1.8) + rng.integers(0, 3), 1, 14))
    for s in range(n_sections):
        parts.append(f"== {_HEADINGS[s % len(_HEADINGS)]} ==")
        parts.append(_section_body(rng, markers, ordinal))
        if s == 0 and ordinal >= 2 and rng.random() < 0.7:
            parts.append(f"[[File:{title.replace(' ', '_')}.jpg|thumb|view]]")
    parts.append(f"[[Category:Synthetic {label} pages]]")
    return "\n".join(parts)


def _talk_text(rng, label: str, ordinal: int) -> str:
    markers = MARKERS[label]
    banner = "{{WikiProject Assessment|class=" + label + "|importance=low}}"
    n_sentences = int(2 + 3 * ordinal + rng.integers(0, 4))
    body = " ".join(_sentence(rng, markers, marker_prob=1.0 if i == 0 else 0.6)
                    for i in range(n_sentences))
    return banner + "\n\n== Discussion ==\n" + body


def _image_vector(rng, ordinal: int) -> np.ndarray:
    vec = rng.normal(0.0, 0.6, size=IMAGE_DIM)
    block = IMAGE_DIM // 6
    vec[ordinal * block:(ordinal + 1) * block] += 1.2
    return vec


def generate_pairs(seed: int = 0, pages_per_class: int = 10
                   ) -> Tuple[List[PagePair], Dict[str, np.ndarray]]:
    """Labeled page pairs plus per-page image vectors keyed by page id."""
    rng = np.random.Generator(np.random.PCG64(seed))
    pairs: List[PagePair] = []
    images: Dict[str, np.ndarray] = {}
    page_id = 100
    for ordinal, label in enumerate(CLASS_NAMES):
        for i in range(pages_per_class):
            title = f"{_TOPICS[i % len(_TOPICS)]} {label} {i}"
            main = RawPage(title=title, namespace=0,
                           text=_main_text(rng, label, ordinal, title), page_id=page_id)
            talk = RawPage(title=f"Talk:{title}", namespace=1,
                           text=_talk_text(rng, label, ordinal), page_id=page_id + 1)
            pair = PagePair(main=main, talk=talk, label=extract_label(talk.text))
            assert pair.label is not None and pair.label.name == label
            pairs.append(pair)
            images[str(main.page_id)] = _image_vector(rng, ordinal)
            page_id += 2
    return pairs, images


def write_synthetic_corpus(out_dir, seed: int = 0, pages_per_class: int = 10,
                           split_seed: int = None) -> dict:
    """Write the corpus splits and the image store under ``out_dir``.

    Layout: corpus/{train,validation,test}.jsonl, stores/images.store and
    counts.json. Returns a summary dict.
    """
    out_dir = Path(out_dir)
    pairs, images = generate_pairs(seed=seed, pages_per_class=pages_per_class)
    split = split_corpus(pairs, seed=seed if split_seed is None else split_seed)
    corpus_dir = out_dir / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    stores_dir = out_dir / "stores"
    stores_dir.mkdir(parents=True, exist_ok=True)
    counts = {
        "train": len(split.train),
        "validation": len(split.validation),
        "test": len(split.test),
        "per_class": class_counts(pairs),
        "seed": seed,
    }
    write_corpus(corpus_dir / "train.jsonl", split.train)
    write_corpus(corpus_dir / "validation.jsonl", split.validation)
    write_corpus(corpus_dir / "test.jsonl", split.test)
    write_embedding_store(stores_dir / "images.store", IMAGE_DIM, sorted(images.items()))
    with open(out_dir / "counts.json", "w", encoding="utf-8") as fh:
        json.dump(counts, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return counts


def pairs_to_dump_xml(pairs: List[PagePair]) -> bytes:
    """Render pairs as a wiki dump XML document (for ingest demos/tests)."""
    chunks = ['<mediawiki xmlns="http://www.mediawiki.org/xml/export-0.10/">\n']
    for pair in pairs:
        for page in (pair.main, pair.talk):
            chunks.append(
                "  <page>\n"
                f"    <title>{escape(page.title)}</title>\n"
                f"    <ns>{page.namespace}</ns>\n"
                f"    <id>{page.page_id}</id>\n"
                "    <revision>\n"
                "      <timestamp>2019-06-01T00:00:00Z</timestamp>\n"
                f"      <text>{escape(page.text)}</text>\n"
                "    </revision>\n"
                "  </page>\n")
    chunks.append("</mediawiki>\n")
    return "".join(chunks).encode("utf-8")
