"""Modality encoders: section vectors, the talk-page vector and image
vector ingestion.

Two section-encoder modes exist: a small trainable encoder (mean of token
embeddings followed by a linear projection) and a lookup mode that serves
precomputed vectors from an embedding store keyed ``pageid#sectionindex``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import autodiff as ad
from .store import EmbeddingStore


@dataclass
class Vocabulary:
    """Token -> id table with a reserved unknown id 0."""

    index: Dict[str, int]

    UNKNOWN = 0

    @classmethod
    def build(cls, token_lists, special_tokens: Sequence[str] = (), max_size: int = 50000):
        counts: Dict[str, int] = {}
        for tokens in token_lists:
            for tok in tokens:
                counts[tok] = counts.get(tok, 0) + 1
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        index = {"<unk>": cls.UNKNOWN}
        for tok in special_tokens:
            if tok not in index:
                index[tok] = len(index)
        for tok, _ in ranked:
            if len(index) >= max_size:
                break
            if tok not in index:
                index[tok] = len(index)
        return cls(index)

    def __len__(self):
        return len(self.index)

    def ids(self, tokens: Sequence[str]) -> List[int]:
        get = self.index.get
        return [get(t, self.UNKNOWN) for t in tokens]


class ToySectionEncoder:
    """Trainable stand-in for a pretrained contextual encoder: mean token
    embedding projected to the section dimension."""

    def __init__(self, embedding: ad.Tensor, proj_w: ad.Tensor, proj_b: ad.Tensor,
                 vocab: Vocabulary):
        self.embedding = embedding
        self.proj_w = proj_w
        self.proj_b = proj_b
        self.vocab = vocab

    @property
    def dim(self) -> int:
        return self.proj_w.value.shape[1]

    def encode_tokens(self, tokens: Sequence[str]) -> ad.Tensor:
        ids = self.vocab.ids(tokens)
        pooled = ad.rows_mean(self.embedding, ids)
        return pooled @ self.proj_w + self.proj_b

    def parameters(self) -> Dict[str, ad.Tensor]:
        return {"encoder.embedding": self.embedding,
                "encoder.proj_w": self.proj_w,
                "encoder.proj_b": self.proj_b}


class LookupSectionEncoder:
    """Serves precomputed section vectors; missing keys are an error, since
    a genuine section must never silently become zeros."""

    def __init__(self, store: EmbeddingStore):
        self.store = store

    @property
    def dim(self) -> int:
        return self.store.dim

    def encode(self, page_id: int, section_index: int) -> np.ndarray:
        return self.store.get64(f"{page_id}#{section_index}")


def encode_section(tokens_or_key, encoder) -> ad.Tensor:
    """Dispatch to the active encoder mode.

    Toy mode takes the section's token list; lookup mode takes a
    ``(page_id, section_index)`` pair.
    """
    if isinstance(encoder, ToySectionEncoder):
        return encoder.encode_tokens(tokens_or_key)
    page_id, section_index = tokens_or_key
    return ad.constant(encoder.encode(page_id, section_index))


@dataclass
class TalkEncoderParams:
    weight: ad.Tensor  # (sentence_dim, talk_dim)
    bias: ad.Tensor  # (talk_dim,)

    def parameters(self) -> Dict[str, ad.Tensor]:
        return {"talk.weight": self.weight, "talk.bias": self.bias}


def encode_talk(sentence_embeddings: Optional[np.ndarray],
                params: TalkEncoderParams) -> Tuple[ad.Tensor, bool]:
    """Mean-pool sentence embeddings and project to the talk vector.

    Empty talk pages pool to the zero vector, which the dense layer maps to
    its bias; the emptiness flag is returned alongside.
    """
    in_dim = params.weight.value.shape[0]
    if sentence_embeddings is None or len(sentence_embeddings) == 0:
        pooled = np.zeros(in_dim)
        empty = True
    else:
        arr = np.asarray(sentence_embeddings, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != in_dim:
            raise ValueError(
                f"sentence embeddings have shape {arr.shape}, expected (*, {in_dim})")
        pooled = arr.mean(axis=0)
        empty = False
    return ad.constant(pooled) @ params.weight + params.bias, empty


@dataclass
class ImageVector:
    vector: np.ndarray
    present: bool


def load_image_embedding(page_id: int, store: Optional[EmbeddingStore],
                         dim: int = 2048) -> ImageVector:
    """Stored image vector for a page; absent pages yield flagged zeros."""
    if store is not None:
        key = str(page_id)
        if key in store:
            return ImageVector(vector=store.get64(key), present=True)
        dim = store.dim
    return ImageVector(vector=np.zeros(dim), present=False)


class HashingSentenceEmbedder:
    """Deterministic feature-hashing sentence embedder.

    Desk-scale stand-in for a pretrained sentence encoder: each token hashes
    to one signed coordinate and the sum is normalised. Stable across runs
    and platforms (BLAKE2, not Python's randomized hash).
    """

    def __init__(self, dim: int = 512):
        self.dim = dim
        self._cache: Dict[str, Tuple[int, float]] = {}

    def _slot(self, token: str) -> Tuple[int, float]:
        hit = self._cache.get(token)
        if hit is None:
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            value = int.from_bytes(digest, "little")
            hit = (value % self.dim, 1.0 if (value >> 63) & 1 else -1.0)
            self._cache[token] = hit
        return hit

    def embed(self, tokens: Sequence[str]) -> np.ndarray:
        vec = np.zeros(self.dim)
        for token in tokens:
            idx, sign = self._slot(token)
            vec[idx] += sign
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def embed_sentences(self, tokenized_sentences: Sequence[Sequence[str]]) -> np.ndarray:
        if not tokenized_sentences:
            return np.zeros((0, self.dim))
        return np.stack([self.embed(toks) for toks in tokenized_sentences])
