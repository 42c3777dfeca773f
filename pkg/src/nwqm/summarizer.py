"""Conditional summarizer: bidirectional GRU over section vectors with
self-attention pooling into the page vector.

The attention scores each position through a learned projection squashed
by a logistic sigmoid (configurable to tanh), normalises with a softmax
over positions, and pools the projected vectors. Pooling the projections
is the default; pooling the raw hidden states is available as a switch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from . import autodiff as ad


@dataclass
class GruDirectionParams:
    w_update: ad.Tensor  # (input_dim, hidden)
    u_update: ad.Tensor  # (hidden, hidden)
    b_update: ad.Tensor  # (hidden,)
    w_reset: ad.Tensor
    u_reset: ad.Tensor
    b_reset: ad.Tensor
    w_cand: ad.Tensor
    u_cand: ad.Tensor
    b_cand: ad.Tensor

    @property
    def hidden(self) -> int:
        return self.u_update.value.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_update.value.shape[0]


@dataclass
class GruParams:
    forward: GruDirectionParams
    backward: GruDirectionParams

    @property
    def output_dim(self) -> int:
        return self.forward.hidden + self.backward.hidden

    def parameters(self) -> Dict[str, ad.Tensor]:
        out = {}
        for tag, direction in (("fwd", self.forward), ("bwd", self.backward)):
            for gate in ("update", "reset", "cand"):
                out[f"gru.{tag}.w_{gate}"] = getattr(direction, f"w_{gate}")
                out[f"gru.{tag}.u_{gate}"] = getattr(direction, f"u_{gate}")
                out[f"gru.{tag}.b_{gate}"] = getattr(direction, f"b_{gate}")
        return out


@dataclass
class AttentionParams:
    weight: ad.Tensor  # (2*hidden, attn_dim)
    bias: ad.Tensor  # (attn_dim,)
    context: ad.Tensor  # (attn_dim,) learned scoring vector
    out_proj: Optional[ad.Tensor] = None  # (attn_dim, 2*hidden) when dims differ

    def parameters(self) -> Dict[str, ad.Tensor]:
        out = {"attn.weight": self.weight, "attn.bias": self.bias,
               "attn.context": self.context}
        if self.out_proj is not None:
            out["attn.out_proj"] = self.out_proj
        return out


def gru_cell(x: ad.Tensor, h_prev: ad.Tensor, p: GruDirectionParams) -> ad.Tensor:
    """Standard GRU cell: sigmoid gates, tanh candidate, reset applied to the
    recurrent state before its matmul."""
    z = ad.sigmoid(x @ p.w_update + h_prev @ p.u_update + p.b_update)
    r = ad.sigmoid(x @ p.w_reset + h_prev @ p.u_reset + p.b_reset)
    cand = ad.tanh(x @ p.w_cand + (r * h_prev) @ p.u_cand + p.b_cand)
    return (1.0 - z) * h_prev + z * cand


def _run_direction(inputs: Sequence[ad.Tensor], p: GruDirectionParams,
                   reverse: bool) -> List[ad.Tensor]:
    h = ad.constant(np.zeros(p.hidden))
    states: List[ad.Tensor] = [None] * len(inputs)
    order = range(len(inputs) - 1, -1, -1) if reverse else range(len(inputs))
    for i in order:
        h = gru_cell(inputs[i], h, p)
        states[i] = h
    return states


def gru_bidirectional(inputs: Sequence, params: GruParams) -> List[ad.Tensor]:
    """Concatenated forward/backward hidden states, one per position.

    Both directions start from a zero state; position x carries the forward
    state after reading positions 1..x and the backward state after reading
    positions L..x.
    """
    if not inputs:
        raise ValueError("gru_bidirectional needs at least one input vector")
    tensors = [ad.as_tensor(v) for v in inputs]
    for t in tensors:
        if t.value.shape != (params.forward.input_dim,):
            raise ValueError(
                f"input has shape {t.value.shape}, expected ({params.forward.input_dim},)")
    fwd = _run_direction(tensors, params.forward, reverse=False)
    bwd = _run_direction(tensors, params.backward, reverse=True)
    return [ad.concat([f, b]) for f, b in zip(fwd, bwd)]


class AttentionResult(NamedTuple):
    pooled: ad.Tensor
    weights: np.ndarray  # softmax attention per position


def attention_pool(hidden_states: Sequence, params: AttentionParams,
                   score_activation: str = "sigmoid",
                   pool: str = "u") -> AttentionResult:
    """Self-attention pooling of the per-position hidden states.

    Scores are ``act(W h + b) . context`` softmax-normalised over positions.
    ``pool='u'`` sums the projected vectors (optionally mapped back to the
    hidden dimension); ``pool='h'`` sums the raw hidden states.
    """
    hs = [ad.as_tensor(h) for h in hidden_states]
    if not hs:
        raise ValueError("attention_pool needs at least one hidden state")
    stacked = ad.stack(hs)  # (L, 2*hidden)
    act = {"sigmoid": ad.sigmoid, "tanh": ad.tanh}[score_activation]
    projected = act(stacked @ params.weight + params.bias)  # (L, attn_dim)
    scores = projected @ params.context  # (L,)
    alpha = ad.softmax(scores)
    if pool == "u":
        pooled = alpha @ projected
        if params.out_proj is not None:
            pooled = pooled @ params.out_proj
    elif pool == "h":
        pooled = alpha @ stacked
    else:
        raise ValueError(f"unknown pool mode {pool!r}")
    return AttentionResult(pooled=pooled, weights=alpha.value.copy())


def summarize(section_vectors: Sequence, gru: GruParams, attention: AttentionParams,
              pad_count: int = 0, mask_pads: bool = False,
              score_activation: str = "sigmoid", pool: str = "u") -> AttentionResult:
    """Page vector from ordered section vectors.

    Missing leading slots become zero vectors on the left. Without masking
    (the default) those pad slots run through the GRU and attention like any
    position; with ``mask_pads`` they are skipped entirely, making the output
    invariant to the pad count and their attention weight exactly zero.
    """
    vectors = [ad.as_tensor(v) for v in section_vectors]
    if not vectors:
        raise ValueError("summarize needs at least one section vector")
    dim = vectors[0].value.shape[0]
    if pad_count < 0:
        raise ValueError("pad_count must be nonnegative")
    if not mask_pads and pad_count > 0:
        vectors = [ad.constant(np.zeros(dim)) for _ in range(pad_count)] + vectors
        pad_count = 0
    hidden = gru_bidirectional(vectors, gru)
    result = attention_pool(hidden, attention, score_activation, pool)
    if pad_count > 0 and mask_pads:
        weights = np.concatenate([np.zeros(pad_count), result.weights])
        result = AttentionResult(pooled=result.pooled, weights=weights)
    return result
