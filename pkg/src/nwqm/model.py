"""Model assembly: configuration, parameter initialisation, and the forward
passes used by the training stages and at inference.

All trainable tensors live in a ModelParams bundle keyed by dotted names;
checkpoints store exactly that mapping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import autodiff as ad
from .encoders import (TalkEncoderParams, ToySectionEncoder, Vocabulary,
                       encode_talk)
from .fusion import (ClassifierParams, classify, fuse_modalities,
                     variant_feature_dim, FusionError, DEFAULT_FUSION_MODE, VARIANTS)
from .summarizer import AttentionParams, GruDirectionParams, GruParams, summarize
from .store import write_checkpoint, read_checkpoint


@dataclass
class ModelConfig:
    section_dim: int = 768  # d_s
    toy_embed_dim: int = 128  # token embedding width of the toy encoder
    gru_hidden: int = 100  # per direction; page vector is twice this
    attention_dim: int = 200
    talk_input_dim: int = 512
    image_input_dim: int = 2048
    classifier_hidden: int = 256
    n_classes: int = 6
    max_sections: int = 16
    budget_head: int = 128
    budget_tail: int = 384
    fusion_mode: str = DEFAULT_FUSION_MODE
    score_activation: str = "sigmoid"  # attention projection squash
    attention_pool: str = "u"  # 'u' pools projections, 'h' pools hidden states
    mask_pads: bool = False
    hidden_activation: str = "tanh"
    dropout: float = 0.5
    vocab_size: int = 50000

    @property
    def page_dim(self) -> int:
        return 2 * self.gru_hidden

    @property
    def talk_dim(self) -> int:
        # talk vector shares the page dimension so elementwise fusion is legal
        return self.page_dim

    def validate(self) -> None:
        for name in ("section_dim", "toy_embed_dim", "gru_hidden", "attention_dim",
                     "talk_input_dim", "image_input_dim", "classifier_hidden",
                     "n_classes", "max_sections", "vocab_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"config field {name} must be positive")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=(fan_in, fan_out))


def _gru_direction(rng, input_dim, hidden, prefix) -> GruDirectionParams:
    def w(tag):
        return ad.parameter(_glorot(rng, input_dim, hidden), f"{prefix}.w_{tag}")

    def u(tag):
        return ad.parameter(_glorot(rng, hidden, hidden), f"{prefix}.u_{tag}")

    def b(tag):
        return ad.parameter(np.zeros(hidden), f"{prefix}.b_{tag}")

    return GruDirectionParams(
        w_update=w("update"), u_update=u("update"), b_update=b("update"),
        w_reset=w("reset"), u_reset=u("reset"), b_reset=b("reset"),
        w_cand=w("cand"), u_cand=u("cand"), b_cand=b("cand"),
    )


@dataclass
class ModelParams:
    config: ModelConfig
    variant: str
    encoder: Optional[ToySectionEncoder]
    encoder_head_w: Optional[ad.Tensor]  # pretrain head over the whole page
    encoder_head_b: Optional[ad.Tensor]
    summ_head_w: Optional[ad.Tensor]  # pretrain head over the page vector
    summ_head_b: Optional[ad.Tensor]
    gru: Optional[GruParams]
    attention: Optional[AttentionParams]
    talk: Optional[TalkEncoderParams]
    classifier: ClassifierParams
    frozen: set = field(default_factory=set)

    def named_tensors(self) -> Dict[str, ad.Tensor]:
        out: Dict[str, ad.Tensor] = {}
        if self.encoder is not None:
            out.update(self.encoder.parameters())
            out["encoder.head_w"] = self.encoder_head_w
            out["encoder.head_b"] = self.encoder_head_b
        if self.gru is not None:
            out.update(self.gru.parameters())
            out.update(self.attention.parameters())
            out["summ.head_w"] = self.summ_head_w
            out["summ.head_b"] = self.summ_head_b
        if self.talk is not None:
            out.update(self.talk.parameters())
        out.update(self.classifier.parameters())
        return out

    def trainable(self, stage: str) -> Dict[str, ad.Tensor]:
        """Tensors updated in a given stage; frozen names are excluded."""
        names = self.named_tensors()
        if stage == "encoder":
            keep = {n for n in names if n.startswith("encoder.")}
        elif stage == "summarizer":
            keep = {n for n in names if n.startswith(("gru.", "attn.", "summ."))}
        elif stage == "joint":
            keep = {n for n in names
                    if not n.startswith(("encoder.", "summ."))}
            if not uses_image(self.variant):
                keep -= {"classifier.image_w", "classifier.image_b"}
        else:
            raise ValueError(f"unknown stage {stage!r}")
        return {n: t for n, t in names.items() if n in keep and n not in self.frozen}

    def freeze(self, prefix: str) -> None:
        for name, tensor in self.named_tensors().items():
            if name.startswith(prefix):
                self.frozen.add(name)
                tensor.requires_grad = False

    def save(self, path) -> None:
        write_checkpoint(path, {n: t.value for n, t in self.named_tensors().items()})

    def load_values(self, tensors: Dict[str, np.ndarray]) -> None:
        named = self.named_tensors()
        missing = sorted(set(named) - set(tensors))
        if missing:
            raise KeyError(f"checkpoint is missing tensors: {', '.join(missing)}")
        for name, value in tensors.items():
            if name in named:
                named[name].value = np.asarray(value, dtype=np.float64)

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {n: t.value.copy() for n, t in self.named_tensors().items()}

    def restore(self, snap: Dict[str, np.ndarray]) -> None:
        for name, tensor in self.named_tensors().items():
            tensor.value = snap[name].copy()


def uses_text(variant: str) -> bool:
    return variant in ("full", "w/oI", "w/oT", "w/oTI")


def uses_talk(variant: str) -> bool:
    return variant in ("full", "w/oI", "talk-only")


def uses_image(variant: str) -> bool:
    return variant in ("full", "w/oT", "image-only")


def init_params(config: ModelConfig, variant: str, seed: int,
                vocab: Optional[Vocabulary] = None,
                encoder_mode: str = "toy") -> ModelParams:
    """Seeded parameter bundle for a variant.

    Weights are uniform(-r, r) with r = sqrt(6 / (fan_in + fan_out)); biases
    and the classifier output layer start at zero, so an untrained model
    predicts the uniform distribution.
    """
    config.validate()
    if variant not in VARIANTS:
        raise FusionError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    rng = np.random.Generator(np.random.PCG64(seed))
    encoder = encoder_head_w = encoder_head_b = None
    gru = attention = summ_head_w = summ_head_b = None
    talk = None

    if uses_text(variant):
        if encoder_mode == "toy":
            if vocab is None:
                vocab = Vocabulary({"<unk>": 0})
            encoder = ToySectionEncoder(
                embedding=ad.parameter(
                    rng.normal(0.0, 0.1, size=(len(vocab), config.toy_embed_dim)),
                    "encoder.embedding"),
                proj_w=ad.parameter(_glorot(rng, config.toy_embed_dim, config.section_dim),
                                    "encoder.proj_w"),
                proj_b=ad.parameter(np.zeros(config.section_dim), "encoder.proj_b"),
                vocab=vocab,
            )
            encoder_head_w = ad.parameter(np.zeros((config.section_dim, config.n_classes)),
                                          "encoder.head_w")
            encoder_head_b = ad.parameter(np.zeros(config.n_classes), "encoder.head_b")
        gru = GruParams(
            forward=_gru_direction(rng, config.section_dim, config.gru_hidden, "gru.fwd"),
            backward=_gru_direction(rng, config.section_dim, config.gru_hidden, "gru.bwd"),
        )
        out_proj = None
        if config.attention_pool == "u" and config.attention_dim != config.page_dim:
            out_proj = ad.parameter(_glorot(rng, config.attention_dim, config.page_dim),
                                    "attn.out_proj")
        attention = AttentionParams(
            weight=ad.parameter(_glorot(rng, config.page_dim, config.attention_dim),
                                "attn.weight"),
            bias=ad.parameter(np.zeros(config.attention_dim), "attn.bias"),
            context=ad.parameter(
                rng.uniform(-0.1, 0.1, size=config.attention_dim), "attn.context"),
            out_proj=out_proj,
        )
        summ_head_w = ad.parameter(np.zeros((config.page_dim, config.n_classes)),
                                   "summ.head_w")
        summ_head_b = ad.parameter(np.zeros(config.n_classes), "summ.head_b")

    if uses_talk(variant):
        talk = TalkEncoderParams(
            weight=ad.parameter(_glorot(rng, config.talk_input_dim, config.talk_dim),
                                "talk.weight"),
            bias=ad.parameter(np.zeros(config.talk_dim), "talk.bias"),
        )

    feature_dim = variant_feature_dim(variant, config.fusion_mode, config.page_dim)
    classifier = ClassifierParams(
        image_w=ad.parameter(_glorot(rng, config.image_input_dim, config.page_dim),
                             "classifier.image_w"),
        image_b=ad.parameter(np.zeros(config.page_dim), "classifier.image_b"),
        hidden_w=ad.parameter(_glorot(rng, feature_dim, config.classifier_hidden),
                              "classifier.hidden_w"),
        hidden_b=ad.parameter(np.zeros(config.classifier_hidden), "classifier.hidden_b"),
        out_w=ad.parameter(np.zeros((config.classifier_hidden, config.n_classes)),
                           "classifier.out_w"),
        out_b=ad.parameter(np.zeros(config.n_classes), "classifier.out_b"),
        dropout=config.dropout,
    )
    return ModelParams(config=config, variant=variant, encoder=encoder,
                       encoder_head_w=encoder_head_w, encoder_head_b=encoder_head_b,
                       summ_head_w=summ_head_w, summ_head_b=summ_head_b,
                       gru=gru, attention=attention, talk=talk, classifier=classifier)


@dataclass
class PageExample:
    """One page ready for the model: budgeted tokens (toy encoder mode) or
    precomputed section vectors (lookup mode), plus the other modalities."""

    page_id: int
    label: Optional[int]  # ordinal 0..5
    section_tokens: List[List[str]] = field(default_factory=list)
    section_vectors: Optional[np.ndarray] = None  # (L, section_dim)
    pad_count: int = 0
    page_tokens: List[str] = field(default_factory=list)
    talk_embeddings: Optional[np.ndarray] = None  # (S, talk_input_dim)
    image_vector: Optional[np.ndarray] = None
    image_present: bool = False
    main_length: int = 0
    talk_length: int = 0
    title: str = ""


def section_inputs(example: PageExample, params: ModelParams) -> List[ad.Tensor]:
    if example.section_vectors is not None:
        return [ad.constant(row) for row in np.asarray(example.section_vectors,
                                                       dtype=np.float64)]
    if params.encoder is None:
        raise ValueError("toy encoder mode needs encoder parameters")
    return [params.encoder.encode_tokens(toks) for toks in example.section_tokens]


def page_vector(example: PageExample, params: ModelParams) -> ad.Tensor:
    cfg = params.config
    vectors = section_inputs(example, params)
    if not vectors:
        vectors = [ad.constant(np.zeros(cfg.section_dim))]
    return summarize(vectors, params.gru, params.attention,
                     pad_count=example.pad_count, mask_pads=cfg.mask_pads,
                     score_activation=cfg.score_activation,
                     pool=cfg.attention_pool).pooled


def forward_distribution(example: PageExample, params: ModelParams,
                         training: bool = False,
                         rng: Optional[np.random.Generator] = None) -> ad.Tensor:
    """Class distribution for the bundle's variant."""
    cfg = params.config
    variant = params.variant
    d_p = page_vector(example, params) if uses_text(variant) else None
    t_p = None
    if uses_talk(variant):
        t_p, _ = encode_talk(example.talk_embeddings, params.talk)
    i_p = None
    if uses_image(variant):
        vec = example.image_vector
        if vec is None:
            vec = np.zeros(cfg.image_input_dim)
        i_p = ad.constant(np.asarray(vec, dtype=np.float64))
    features = fuse_modalities(d_p, t_p, i_p, cfg.fusion_mode, params.classifier, variant)
    return classify(features, params.classifier, training=training, rng=rng,
                    hidden_activation=cfg.hidden_activation)


def predict(example: PageExample, params: ModelParams) -> np.ndarray:
    return forward_distribution(example, params, training=False).value


def encoder_pretrain_distribution(example: PageExample, params: ModelParams) -> ad.Tensor:
    """Stage-1 graph: whole-page tokens through the toy encoder and a small
    softmax head."""
    if params.encoder is None:
        raise ValueError("encoder pretraining needs the toy encoder")
    vec = params.encoder.encode_tokens(example.page_tokens)
    return ad.softmax(vec @ params.encoder_head_w + params.encoder_head_b)


def summarizer_pretrain_distribution(example: PageExample, params: ModelParams) -> ad.Tensor:
    """Stage-2 graph: page vector through its own softmax head."""
    d_p = page_vector(example, params)
    return ad.softmax(d_p @ params.summ_head_w + params.summ_head_b)


def save_model(path, params: ModelParams) -> None:
    params.save(path)


def load_model(path, params: ModelParams) -> ModelParams:
    params.load_values(read_checkpoint(path))
    return params
