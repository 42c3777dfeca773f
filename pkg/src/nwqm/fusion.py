"""Modality fusion and the classification head.

A fusion mode names the blocks concatenated from a vector pair, e.g.
``u,v,|u-v|``. The text and talk vectors share one dimension and are fused
pairwise; the image vector is first projected down and appended (it cannot
enter elementwise modes at 2048 dimensions). Ablation variants drop blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from . import autodiff as ad

FUSION_MODES = (
    "u,v",
    "u,v,|u-v|",
    "u,v,|u-v|,u*v",
    "u,v,u*v",
    "|u-v|,u*v",
    "|u-v|",
    "u*v",
)
DEFAULT_FUSION_MODE = "u,v,|u-v|"

VARIANTS = ("full", "w/oI", "w/oT", "w/oTI", "talk-only", "image-only")

_ELEMENTWISE_BLOCKS = {"|u-v|", "u*v"}


class FusionError(ValueError):
    pass


def _mode_blocks(mode: str) -> List[str]:
    blocks = [b.strip() for b in mode.split(",")]
    for block in blocks:
        if block not in ("u", "v") and block not in _ELEMENTWISE_BLOCKS:
            raise FusionError(f"unknown fusion block {block!r} in mode {mode!r}")
    if ",".join(blocks) not in FUSION_MODES:
        raise FusionError(f"unknown fusion mode {mode!r}; expected one of {FUSION_MODES}")
    return blocks


def fused_dim(mode: str, dim: int) -> int:
    return len(_mode_blocks(mode)) * dim


def fuse(u, v, mode: str = DEFAULT_FUSION_MODE) -> ad.Tensor:
    """Concatenate the mode's blocks; |u-v| and u*v are elementwise."""
    u = ad.as_tensor(u)
    v = ad.as_tensor(v)
    blocks = _mode_blocks(mode)
    needs_match = any(b in _ELEMENTWISE_BLOCKS for b in blocks)
    if needs_match and u.value.shape != v.value.shape:
        raise FusionError(
            f"mode {mode!r} needs equal dimensions, got {u.value.shape} and {v.value.shape}")
    parts = []
    for block in blocks:
        if block == "u":
            parts.append(u)
        elif block == "v":
            parts.append(v)
        elif block == "|u-v|":
            parts.append(ad.absolute(u - v))
        else:  # u*v
            parts.append(u * v)
    return parts[0] if len(parts) == 1 else ad.concat(parts)


@dataclass
class ClassifierParams:
    image_w: ad.Tensor  # (image_dim, page_dim)
    image_b: ad.Tensor
    hidden_w: ad.Tensor  # (feature_dim, hidden)
    hidden_b: ad.Tensor
    out_w: ad.Tensor  # (hidden, n_classes); zero-initialised by default
    out_b: ad.Tensor
    dropout: float = 0.5

    def parameters(self) -> Dict[str, ad.Tensor]:
        return {"classifier.image_w": self.image_w, "classifier.image_b": self.image_b,
                "classifier.hidden_w": self.hidden_w, "classifier.hidden_b": self.hidden_b,
                "classifier.out_w": self.out_w, "classifier.out_b": self.out_b}


def project_image(i_p, params: ClassifierParams) -> ad.Tensor:
    return ad.as_tensor(i_p) @ params.image_w + params.image_b


def fuse_modalities(d_p, t_p, i_p, mode: str, params: ClassifierParams,
                    variant: str = "full") -> ad.Tensor:
    """Feature vector for a variant.

    full: pair-fuse text with talk, append the projected image;
    w/oI drops the image block; w/oT pair-fuses text with the projected
    image; w/oTI, talk-only and image-only are single blocks.
    """
    if variant == "full":
        return ad.concat([fuse(d_p, t_p, mode), project_image(i_p, params)])
    if variant == "w/oI":
        return fuse(d_p, t_p, mode)
    if variant == "w/oT":
        return fuse(d_p, project_image(i_p, params), mode)
    if variant == "w/oTI":
        return ad.as_tensor(d_p)
    if variant == "talk-only":
        return ad.as_tensor(t_p)
    if variant == "image-only":
        return project_image(i_p, params)
    raise FusionError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def variant_feature_dim(variant: str, mode: str, page_dim: int) -> int:
    if variant == "full":
        return fused_dim(mode, page_dim) + page_dim
    if variant == "w/oI":
        return fused_dim(mode, page_dim)
    if variant == "w/oT":
        return fused_dim(mode, page_dim)
    if variant in ("w/oTI", "talk-only", "image-only"):
        return page_dim
    raise FusionError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


class NonFiniteError(ArithmeticError):
    """An activation stopped being finite; names the offending layer."""


def _check_finite(t: ad.Tensor, layer: str) -> ad.Tensor:
    if not np.isfinite(t.value).all():
        raise NonFiniteError(f"non-finite activation in layer {layer!r}")
    return t


def dropout_mask(shape, p: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: zero with probability p, survivors scaled by
    1/(1-p) so inference needs no rescaling."""
    keep = rng.random(shape) >= p
    return keep.astype(np.float64) / (1.0 - p)


def classify(features, params: ClassifierParams, training: bool = False,
             rng: Optional[np.random.Generator] = None,
             hidden_activation: str = "tanh") -> ad.Tensor:
    """Class distribution: dense, dropout (training only), dense, softmax."""
    x = ad.as_tensor(features)
    if x.value.shape != (params.hidden_w.value.shape[0],):
        raise FusionError(
            f"feature vector has shape {x.value.shape}, classifier expects "
            f"({params.hidden_w.value.shape[0]},)")
    hidden = _check_finite(x @ params.hidden_w + params.hidden_b, "hidden dense")
    if hidden_activation == "tanh":
        hidden = ad.tanh(hidden)
    elif hidden_activation != "linear":
        raise FusionError(f"unknown hidden activation {hidden_activation!r}")
    if training and params.dropout > 0:
        if rng is None:
            raise ValueError("training-mode classify needs an rng for dropout")
        hidden = hidden * ad.constant(dropout_mask(hidden.value.shape, params.dropout, rng))
    logits = hidden @ params.out_w + params.out_b
    _check_finite(logits, "output dense")
    return ad.softmax(logits)
