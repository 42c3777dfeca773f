"""Glue between corpus files, preprocessing, embedding stores and model
inputs. Record formats are line-delimited JSON, UTF-8, LF endings.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .encoders import HashingSentenceEmbedder, Vocabulary
from .model import ModelConfig, PageExample
from .preprocess import (SPECIAL_TOKENS, PreprocessStats, apply_token_budget,
                         plain_text, segment_sections, split_sentences,
                         tokenize, wikitext_to_plain)
from .store import EmbeddingStore
from .dump_ingest import QualityLabel

SPLITS = ("train", "validation", "test")


def preprocess_record(record: dict, config: ModelConfig,
                      stats: Optional[PreprocessStats] = None) -> dict:
    """Turn one corpus record into tokenised sections and talk sentences."""
    stats = stats if stats is not None else PreprocessStats()
    doc = wikitext_to_plain(record["main_text"], title=record.get("title", ""),
                            stats=stats)
    all_tokens: List[str] = []
    for section in doc.sections:
        all_tokens.extend(section.tokens)
    seq = segment_sections(doc, config.max_sections)
    sections = [{
        "heading": s.heading,
        "level": s.level,
        "tokens": apply_token_budget(s.tokens, config.budget_head, config.budget_tail),
    } for s in seq.sections]
    talk_plain = plain_text(record["talk_text"], stats=stats)
    talk_sentences = split_sentences(talk_plain)
    return {
        "page_id": record["page_id"],
        "title": record.get("title", ""),
        "label": record.get("label"),
        "sections": sections,
        "pad_count": seq.pad_count,
        "page_tokens": apply_token_budget(all_tokens, config.budget_head,
                                          config.budget_tail),
        "talk_sentences": talk_sentences,
        "main_length": len(all_tokens),
        "talk_length": len(tokenize(talk_plain)),
        "empty_main": not all_tokens,
    }


def write_records(path, records: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False))
            fh.write("\n")


def read_records(path) -> List[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def build_vocabulary(preprocessed: Sequence[dict], max_size: int = 50000) -> Vocabulary:
    token_lists = []
    for record in preprocessed:
        token_lists.append(record["page_tokens"])
        for section in record["sections"]:
            token_lists.append(section["tokens"])
    return Vocabulary.build(token_lists, special_tokens=SPECIAL_TOKENS.all(),
                            max_size=max_size)


def examples_from_records(records: Sequence[dict], config: ModelConfig,
                          images: Optional[EmbeddingStore] = None,
                          sections_store: Optional[EmbeddingStore] = None,
                          sentences_store: Optional[EmbeddingStore] = None,
                          embedder: Optional[HashingSentenceEmbedder] = None
                          ) -> List[PageExample]:
    """Materialise model inputs.

    Section vectors come from the store when one is given (lookup mode,
    keys ``pageid#index``); otherwise the token lists are kept for the toy
    encoder. Talk sentences use the sentence store when given, else the
    deterministic hashing embedder.
    """
    if sections_store is not None and sections_store.dim != config.section_dim:
        raise ValueError(
            f"section store dim {sections_store.dim} != config section_dim "
            f"{config.section_dim}")
    if embedder is None:
        embedder = HashingSentenceEmbedder(config.talk_input_dim)
    examples = []
    for record in records:
        page_id = record["page_id"]
        label = record.get("label")
        ordinal = QualityLabel.from_name(label).ordinal if label else None
        section_tokens = [s["tokens"] for s in record["sections"]]
        section_vectors = None
        if sections_store is not None:
            rows = [sections_store.get64(f"{page_id}#{i}")
                    for i in range(len(section_tokens))]
            section_vectors = (np.stack(rows) if rows
                               else np.zeros((0, config.section_dim)))
        sentences = record.get("talk_sentences", [])
        if sentences_store is not None:
            embs = [sentences_store.get64(f"{page_id}#{i}")
                    for i in range(len(sentences))]
            talk = (np.stack(embs) if embs
                    else np.zeros((0, sentences_store.dim)))
        else:
            talk = embedder.embed_sentences([tokenize(s) for s in sentences])
        image = None
        present = False
        if images is not None:
            key = str(page_id)
            if key in images:
                image = images.get64(key)
                present = True
        if image is None:
            image = np.zeros(config.image_input_dim)
        examples.append(PageExample(
            page_id=page_id, label=ordinal, section_tokens=section_tokens,
            section_vectors=section_vectors, pad_count=record.get("pad_count", 0),
            page_tokens=record.get("page_tokens", []),
            talk_embeddings=talk, image_vector=image, image_present=present,
            main_length=record.get("main_length", 0),
            talk_length=record.get("talk_length", 0),
            title=record.get("title", ""),
        ))
    return examples


def preprocess_corpus_dir(corpus_dir, out_dir, config: ModelConfig) -> PreprocessStats:
    """Preprocess every split file found under ``corpus_dir``."""
    corpus_dir = Path(corpus_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stats = PreprocessStats()
    for split in SPLITS:
        src = corpus_dir / f"{split}.jsonl"
        if not src.exists():
            continue
        records = [preprocess_record(r, config, stats) for r in read_records(src)]
        write_records(out_dir / f"{split}.jsonl", records)
    return stats
