"""Training machinery: cross-entropy loss, Adam, and the staged regime
(encoder pretrain, freeze, summarizer pretrain, joint training).

Gradients are accumulated per example in deterministic order; given a seed,
two runs produce bitwise-identical parameters and reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import autodiff as ad
from .dump_ingest import QualityLabel
from .model import (ModelParams, PageExample, encoder_pretrain_distribution,
                    forward_distribution, summarizer_pretrain_distribution,
                    uses_text)

LOG_PROB_FLOOR = 1e-12


@dataclass
class ClampCounter:
    clamped: int = 0


_clamp_counter = ClampCounter()


def clamp_warnings() -> int:
    return _clamp_counter.clamped


def cross_entropy(dist, label) -> ad.Tensor:
    """Negative log probability of the true class.

    ``dist`` may be a probability array or a graph tensor; probabilities are
    floored at 1e-12 (counted) so a confidently wrong model stays finite.
    """
    ordinal = label.ordinal if isinstance(label, QualityLabel) else int(label)
    t = ad.as_tensor(dist)
    p = ad.pick(t, ordinal)
    if p.value <= LOG_PROB_FLOOR:
        _clamp_counter.clamped += 1
    return -ad.log(ad.clamp_min(p, LOG_PROB_FLOOR))


@dataclass
class TrainConfig:
    seed: int = 0
    # toy-encoder pretrain (analog of fine-tuning the text encoder)
    encoder_lr: float = 2e-5
    encoder_epochs: int = 4
    encoder_batch: int = 16
    # summarizer pretrain over the page vector alone
    summarizer_lr: float = 1e-3
    summarizer_epochs: int = 10
    summarizer_batch: int = 16
    # joint training of the fused model
    joint_lr: float = 1e-3
    joint_epochs: int = 40
    joint_batch: int = 32

    def validate(self) -> None:
        for name, value in asdict(self).items():
            if name == "seed":
                continue
            if value <= 0 and not name.endswith("epochs"):
                raise ValueError(f"train config field {name} must be positive")
            if name.endswith("epochs") and value < 0:
                raise ValueError(f"train config field {name} must be nonnegative")


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Dict[str, ad.Tensor], grads: Dict[str, np.ndarray],
              state: AdamState) -> Tuple[Dict[str, ad.Tensor], AdamState]:
    """One Adam update with bias correction; parameters change in place."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for name, tensor in params.items():
        g = grads.get(name)
        if g is None:
            continue
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(tensor.value)
            state.m[name] = m
            state.v[name] = np.zeros_like(tensor.value)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        tensor.value -= state.lr * (m / bias1) / (np.sqrt(v / bias2) + state.eps)
    return params, state


def backward(loss: ad.Tensor, trainable: Dict[str, ad.Tensor]) -> Dict[str, np.ndarray]:
    """Reverse-mode gradients for the trainable tensors of the active stage.

    Frozen tensors never appear in the output; non-finite gradients raise,
    naming the tensor.
    """
    ad.zero_grads(trainable.values())
    ad.backward(loss)
    grads: Dict[str, np.ndarray] = {}
    for name, tensor in trainable.items():
        if tensor.grad is None:
            continue
        if not np.isfinite(tensor.grad).all():
            raise ArithmeticError(f"non-finite gradient for tensor {name!r}")
        grads[name] = tensor.grad
    return grads


@dataclass
class LossReport:
    stage: str
    epoch: int
    split: str
    loss: float
    accuracy: float

    def as_record(self) -> dict:
        return {"stage": self.stage, "epoch": self.epoch, "split": self.split,
                "loss": self.loss, "accuracy": self.accuracy}


def evaluate_split(examples: Sequence[PageExample], params: ModelParams,
                   loss_graph: Callable[..., ad.Tensor]) -> Tuple[float, float]:
    total_loss = 0.0
    correct = 0
    for ex in examples:
        dist = loss_graph(ex, params)
        total_loss += float(cross_entropy(dist, ex.label).value)
        if int(np.argmax(dist.value)) == ex.label:
            correct += 1
    n = max(len(examples), 1)
    return total_loss / n, correct / n


def _run_stage(stage: str, graph: Callable, train: Sequence[PageExample],
               val: Sequence[PageExample], params: ModelParams, lr: float,
               epochs: int, batch_size: int, rng: np.random.Generator,
               reports: List[LossReport], dropout_rng: Optional[np.random.Generator] = None,
               track_best: bool = False):
    """Generic epoch loop: shuffle, batch, accumulate mean gradients, step.

    Returns the best-validation snapshot when tracking is on.
    """
    trainable = params.trainable(stage)
    state = AdamState(lr=lr)
    best = None
    loss0, acc0 = evaluate_split(train, params, graph)
    reports.append(LossReport(stage, 0, "train", loss0, acc0))
    if val:
        vloss, vacc = evaluate_split(val, params, graph)
        reports.append(LossReport(stage, 0, "validation", vloss, vacc))
        if track_best:
            best = (vacc, 0, params.snapshot())
    elif track_best:
        best = (acc0, 0, params.snapshot())
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(train))
        for start in range(0, len(order), batch_size):
            chunk = order[start:start + batch_size]
            grads: Dict[str, np.ndarray] = {}
            for idx in chunk:
                ex = train[idx]
                if dropout_rng is not None:
                    dist = graph(ex, params, training=True, rng=dropout_rng)
                else:
                    dist = graph(ex, params)
                loss = cross_entropy(dist, ex.label)
                for name, g in backward(loss, trainable).items():
                    if name in grads:
                        grads[name] += g
                    else:
                        grads[name] = g.copy()
            scale = 1.0 / len(chunk)
            for name in grads:
                grads[name] *= scale
            adam_step(trainable, grads, state)
        loss_t, acc_t = evaluate_split(train, params, graph)
        reports.append(LossReport(stage, epoch, "train", loss_t, acc_t))
        if val:
            loss_v, acc_v = evaluate_split(val, params, graph)
            reports.append(LossReport(stage, epoch, "validation", loss_v, acc_v))
            if track_best and loss_v == loss_v and acc_v > best[0]:
                best = (acc_v, epoch, params.snapshot())
        elif track_best and acc_t > best[0]:
            best = (acc_t, epoch, params.snapshot())
    return best


def train(train_examples: Sequence[PageExample], val_examples: Sequence[PageExample],
          params: ModelParams, config: TrainConfig,
          use_dropout: bool = True) -> List[LossReport]:
    """Run the staged regime on a prepared corpus.

    Stage 1 pretrains the toy section encoder on whole pages, then freezes
    it. Stage 2 pretrains the summarizer through its own head. Stage 3
    trains the variant's fused model; the best-validation parameters are
    restored at the end.
    """
    config.validate()
    if not train_examples:
        raise ValueError("training split is empty")
    rng = np.random.Generator(np.random.PCG64(config.seed))
    dropout_rng = np.random.Generator(np.random.PCG64(config.seed + 0x9E3779B9))
    reports: List[LossReport] = []

    text = uses_text(params.variant)
    if text and params.encoder is not None and config.encoder_epochs > 0:
        graph1 = lambda ex, p, **kw: encoder_pretrain_distribution(ex, p)
        _run_stage("encoder", graph1, train_examples, val_examples, params,
                   config.encoder_lr, config.encoder_epochs, config.encoder_batch,
                   rng, reports)
    if text and params.encoder is not None:
        params.freeze("encoder.embedding")
        params.freeze("encoder.proj_")
    if text and config.summarizer_epochs > 0 and params.variant != "w/oTI":
        graph2 = lambda ex, p, **kw: summarizer_pretrain_distribution(ex, p)
        _run_stage("summarizer", graph2, train_examples, val_examples, params,
                   config.summarizer_lr, config.summarizer_epochs,
                   config.summarizer_batch, rng, reports)

    graph3 = lambda ex, p, training=False, rng=None: forward_distribution(
        ex, p, training=training, rng=rng)
    best = _run_stage("joint", graph3, train_examples, val_examples, params,
                      config.joint_lr, config.joint_epochs, config.joint_batch,
                      rng, reports, dropout_rng=dropout_rng if use_dropout else None,
                      track_best=True)
    if best is not None:
        params.restore(best[2])
    return reports


def write_reports(path, reports: Iterable[LossReport]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for report in reports:
            fh.write(json.dumps(report.as_record()))
            fh.write("\n")


def format_report_table(reports: Sequence[LossReport]) -> str:
    lines = [f"{'stage':<11} {'epoch':>5} {'split':<10} {'loss':>10} {'accuracy':>9}"]
    for r in reports:
        lines.append(f"{r.stage:<11} {r.epoch:>5} {r.split:<10} "
                     f"{r.loss:>10.6f} {r.accuracy:>9.4f}")
    return "\n".join(lines)
