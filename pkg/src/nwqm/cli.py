"""Command-line entry point orchestrating the pipeline:
synth | ingest -> preprocess -> train -> evaluate -> attribute -> report.

Exit codes: 0 success, 1 configuration or usage error, 2 missing
prerequisite artifact. Every subcommand is deterministic given its inputs
and seed, and writes only its own stage's artifacts.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import dump_ingest, evaluation, pipeline, synthetic, training
from .dump_ingest import CLASS_NAMES, IngestStats, QualityLabel
from .evaluation import REFERENCE_ACCURACY
from .fusion import VARIANTS
from .model import (ModelConfig, init_params, load_model, forward_distribution,
                    page_vector, uses_text)
from .store import EmbeddingStore, write_embedding_store
from .training import TrainConfig

_MODEL_FIELDS = {f.name for f in dataclasses.fields(ModelConfig)}
_TRAIN_FIELDS = {f.name for f in dataclasses.fields(TrainConfig)}
_TOP_LEVEL_FIELDS = {
    "seed", "variant", "fusion_mode", "data_dir", "corpus_dir",
    "preprocessed_dir", "images_store", "sections_store", "sentences_store",
    "run_dir", "model", "train", "attribution",
}
_ATTRIBUTION_FIELDS = {"n_samples", "top_k", "group_by", "ridge"}


class ConfigError(Exception):
    pass


class MissingArtifact(Exception):
    def __init__(self, path):
        super().__init__(str(path))
        self.path = path


@dataclasses.dataclass
class RunConfig:
    seed: int = 0
    variant: str = "full"
    data_dir: Path = Path(".")
    corpus_dir: Path = Path("corpus")
    preprocessed_dir: Path = Path("preprocessed")
    images_store: Optional[Path] = Path("stores/images.store")
    sections_store: Optional[Path] = None
    sentences_store: Optional[Path] = None
    run_dir: Path = Path("runs/full")
    model: ModelConfig = dataclasses.field(default_factory=ModelConfig)
    train: TrainConfig = dataclasses.field(default_factory=TrainConfig)
    attribution: Dict = dataclasses.field(
        default_factory=lambda: {"n_samples": 2000, "top_k": 500,
                                 "group_by": "predicted", "ridge": 1e-3})

    def resolve(self, name: str) -> Optional[Path]:
        value = getattr(self, name)
        if value is None:
            return None
        value = Path(value)
        return value if value.is_absolute() else self.data_dir / value


def _check_fields(section: str, data: dict, allowed: set) -> None:
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown config field {section}{key!r}")


def load_config(path, overrides: Optional[dict] = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error in {path} at line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config root in {path} must be an object")
    _check_fields("", raw, _TOP_LEVEL_FIELDS)
    _check_fields("model.", raw.get("model", {}), _MODEL_FIELDS)
    _check_fields("train.", raw.get("train", {}), _TRAIN_FIELDS)
    _check_fields("attribution.", raw.get("attribution", {}), _ATTRIBUTION_FIELDS)

    cfg = RunConfig()
    cfg.model = ModelConfig(**raw.get("model", {}))
    cfg.train = TrainConfig(**raw.get("train", {}))
    cfg.attribution.update(raw.get("attribution", {}))
    for key in ("seed", "variant"):
        if key in raw:
            setattr(cfg, key, raw[key])
    if "fusion_mode" in raw:
        cfg.model.fusion_mode = raw["fusion_mode"]

    if "data_dir" in raw:
        root = Path(raw["data_dir"])
        if not root.is_absolute():
            root = path.parent / root
    elif os.environ.get("NWQM_DATA_DIR"):
        root = Path(os.environ["NWQM_DATA_DIR"])
    else:
        root = path.parent
    cfg.data_dir = root
    for key in ("corpus_dir", "preprocessed_dir", "images_store",
                "sections_store", "sentences_store", "run_dir"):
        if key in raw:
            setattr(cfg, key, Path(raw[key]) if raw[key] is not None else None)

    overrides = overrides or {}
    if overrides.get("seed") is not None:
        cfg.seed = overrides["seed"]
    if overrides.get("variant") is not None:
        cfg.variant = overrides["variant"]
    if overrides.get("mode") is not None:
        cfg.model.fusion_mode = overrides["mode"]
    if cfg.variant not in VARIANTS:
        raise ConfigError(f"unknown variant {cfg.variant!r}; expected one of {VARIANTS}")
    cfg.train.seed = cfg.seed
    cfg.model.validate()
    cfg.train.validate()
    return cfg


@contextmanager
def directory_lock(directory: Path):
    directory.mkdir(parents=True, exist_ok=True)
    lock = directory / ".nwqm.lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"output directory {directory} is locked by another run "
            f"(remove {lock} if that run is dead)")
    try:
        os.close(fd)
        yield
    finally:
        try:
            os.unlink(lock)
        except FileNotFoundError:
            pass


def _require(path: Path) -> Path:
    if not Path(path).exists():
        raise MissingArtifact(path)
    return Path(path)


def _load_split_records(cfg: RunConfig, split: str) -> List[dict]:
    path = _require(cfg.resolve("preprocessed_dir") / f"{split}.jsonl")
    return pipeline.read_records(path)


def _open_stores(cfg: RunConfig):
    images = sections = sentences = None
    p = cfg.resolve("images_store")
    if p is not None and Path(p).exists():
        images = EmbeddingStore.load(p)
    p = cfg.resolve("sections_store")
    if p is not None:
        sections = EmbeddingStore.load(_require(p))
    p = cfg.resolve("sentences_store")
    if p is not None:
        sentences = EmbeddingStore.load(_require(p))
    return images, sections, sentences


def _build_examples(cfg: RunConfig, split: str, vocab_records=None):
    records = _load_split_records(cfg, split)
    images, sections, sentences = _open_stores(cfg)
    return pipeline.examples_from_records(
        records, cfg.model, images=images, sections_store=sections,
        sentences_store=sentences)


def _model_for(cfg: RunConfig):
    train_records = _load_split_records(cfg, "train")
    vocab = pipeline.build_vocabulary(train_records, cfg.model.vocab_size)
    _, sections, _ = _open_stores(cfg)
    encoder_mode = "lookup" if sections is not None else "toy"
    return init_params(cfg.model, cfg.variant, cfg.seed, vocab=vocab,
                       encoder_mode=encoder_mode)


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args) -> int:
    out = Path(args.out)
    with directory_lock(out):
        counts = synthetic.write_synthetic_corpus(out, seed=args.seed,
                                                  pages_per_class=args.pages_per_class)
        if args.emit_dump:
            pairs, _ = synthetic.generate_pairs(seed=args.seed,
                                                pages_per_class=args.pages_per_class)
            (out / "dump.xml").write_bytes(synthetic.pairs_to_dump_xml(pairs))
    print(dump_ingest.format_counts_table(counts["per_class"]))
    print(f"train/validation/test: {counts['train']}/{counts['validation']}"
          f"/{counts['test']}")
    return 0


def cmd_ingest(args) -> int:
    out = Path(args.out)
    stats = IngestStats()
    all_pairs = []
    with directory_lock(out):
        for dump in args.dumps:
            if dump == "-":
                pages = dump_ingest.stream_pages(sys.stdin.buffer, stats)
            else:
                handle = open(_require(Path(dump)), "rb")
                pages = dump_ingest.stream_pages(handle, stats)
            all_pairs.extend(dump_ingest.pair_main_talk(pages, stats))
        labeled = dump_ingest.label_pairs(all_pairs, stats)
        balanced = dump_ingest.balance_sample(labeled, args.cap, seed=args.seed)
        split = dump_ingest.split_corpus(balanced, seed=args.seed)
        corpus_dir = out / "corpus"
        corpus_dir.mkdir(parents=True, exist_ok=True)
        dump_ingest.write_corpus(corpus_dir / "train.jsonl", split.train)
        dump_ingest.write_corpus(corpus_dir / "validation.jsonl", split.validation)
        dump_ingest.write_corpus(corpus_dir / "test.jsonl", split.test)
        counts = dump_ingest.class_counts(balanced)
        with open(out / "counts.json", "w", encoding="utf-8") as fh:
            json.dump({"per_class": counts, "stats": dataclasses.asdict(stats)},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(dump_ingest.format_counts_table(counts))
    print(f"pages seen {stats.pages_seen}, duplicates {stats.duplicate_titles}, "
          f"redirects skipped {stats.redirects_skipped}, "
          f"unlabeled pairs {stats.unlabeled_pairs}")
    return 0


def cmd_preprocess(args) -> int:
    corpus = Path(args.corpus)
    _require(corpus / "train.jsonl")
    out = Path(args.out)
    config = ModelConfig()
    if args.config:
        config = load_config(args.config).model
    with directory_lock(out):
        stats = pipeline.preprocess_corpus_dir(corpus, out, config)
    print(f"preprocessed corpus written to {out}")
    print(f"malformed constructs {stats.malformed_constructs}, "
          f"unknown templates {stats.unknown_templates}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config, vars(args))
    run_dir = cfg.resolve("run_dir")
    train_examples = _build_examples(cfg, "train")
    val_examples = _build_examples(cfg, "validation")
    params = _model_for(cfg)
    with directory_lock(run_dir):
        reports = training.train(train_examples, val_examples, params, cfg.train)
        params.save(run_dir / "checkpoint.ckpt")
        training.write_reports(run_dir / "train_log.jsonl", reports)
    print(training.format_report_table(reports[-12:]))
    print(f"checkpoint written to {run_dir / 'checkpoint.ckpt'}")
    return 0


def _predictions(cfg: RunConfig, params, examples):
    rows = []
    for ex in examples:
        dist = forward_distribution(ex, params).value
        rows.append({
            "page_id": ex.page_id,
            "title": ex.title,
            "label": QualityLabel.from_ordinal(ex.label).name if ex.label is not None else None,
            "pred": QualityLabel.from_ordinal(int(np.argmax(dist))).name,
            "probs": [float(p) for p in dist],
            "main_length": ex.main_length,
            "talk_length": ex.talk_length,
        })
    return rows


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config, vars(args))
    run_dir = cfg.resolve("run_dir")
    checkpoint = _require(run_dir / "checkpoint.ckpt")
    params = load_model(checkpoint, _model_for(cfg))
    examples = _build_examples(cfg, "test")
    rows = _predictions(cfg, params, examples)
    preds = [QualityLabel.from_name(r["pred"]).ordinal for r in rows]
    labels = [QualityLabel.from_name(r["label"]).ordinal for r in rows]
    acc = evaluation.accuracy(preds, labels)
    matrix = evaluation.confusion(preds, labels)
    distance = evaluation.mean_ordinal_distance(preds, labels)
    metrics = {
        "variant": cfg.variant,
        "accuracy": acc,
        "n_test": len(rows),
        "mean_ordinal_distance": {CLASS_NAMES[i]: float(d)
                                  for i, d in enumerate(distance)},
    }
    q_main = evaluation.quartile_report([r["main_length"] for r in rows], preds, labels) \
        if len(rows) >= 4 else None
    q_talk = evaluation.quartile_report([r["talk_length"] for r in rows], preds, labels) \
        if len(rows) >= 4 else None
    reports_dir = run_dir / "reports"
    with directory_lock(reports_dir):
        pipeline.write_records(reports_dir / "predictions.jsonl", rows)
        (reports_dir / "confusion.csv").write_text(matrix.to_csv(), encoding="utf-8")
        if q_main is not None:
            (reports_dir / "quartiles_main.csv").write_text(q_main.to_csv(), encoding="utf-8")
        if q_talk is not None:
            (reports_dir / "quartiles_talk.csv").write_text(q_talk.to_csv(), encoding="utf-8")
        with open(reports_dir / "metrics.json", "w", encoding="utf-8") as fh:
            json.dump(metrics, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if args.dump_embeddings and uses_text(cfg.variant):
            vectors = [(str(ex.page_id), page_vector(ex, params).value)
                       for ex in examples]
            write_embedding_store(reports_dir / "pagevecs.store",
                                  cfg.model.page_dim, vectors)
    print(f"accuracy {acc:.4f} on {len(rows)} test pages")
    print(matrix.to_csv())
    return 0


def _extract_blocks(cfg, params, examples):
    """Raw (text, talk, image) embedding blocks per page."""
    from .encoders import encode_talk
    feats = []
    for ex in examples:
        d = page_vector(ex, params).value
        t, _ = encode_talk(ex.talk_embeddings, params.talk)
        feats.append(np.concatenate([d, t.value, np.asarray(ex.image_vector)]))
    return np.stack(feats)


def _train_probe_head(features: np.ndarray, labels: np.ndarray, n_classes: int,
                      seed: int, epochs: int = 300, lr: float = 0.05):
    """Softmax-regression probe over concatenated modality blocks."""
    rng = np.random.Generator(np.random.PCG64(seed))
    d = features.shape[1]
    scale = 1.0 / max(1.0, np.abs(features).max())
    x = features * scale
    w = rng.normal(0.0, 0.01, size=(d, n_classes))
    b = np.zeros(n_classes)
    onehot = np.eye(n_classes)[labels]
    for _ in range(epochs):
        logits = x @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        grad = (p - onehot) / len(x)
        w -= lr * (x.T @ grad)
        b -= lr * grad.sum(axis=0)

    def head(vec: np.ndarray) -> np.ndarray:
        z = (vec * scale) @ w + b
        z -= z.max()
        e = np.exp(z)
        return e / e.sum()

    return head


def cmd_attribute(args) -> int:
    cfg = load_config(args.config, vars(args))
    if cfg.variant != "full":
        raise ConfigError("attribution needs all three modalities; use variant 'full'")
    run_dir = cfg.resolve("run_dir")
    checkpoint = _require(run_dir / "checkpoint.ckpt")
    params = load_model(checkpoint, _model_for(cfg))
    train_examples = _build_examples(cfg, "train")
    test_examples = _build_examples(cfg, "test")
    feats_train = _extract_blocks(cfg, params, train_examples)
    feats_test = _extract_blocks(cfg, params, test_examples)
    labels_train = np.array([ex.label for ex in train_examples])
    labels_test = [ex.label for ex in test_examples]
    head = _train_probe_head(feats_train, labels_train, cfg.model.n_classes, cfg.seed)
    page = cfg.model.page_dim
    blocks = [("text", 0, page), ("talk", page, 2 * page),
              ("image", 2 * page, 2 * page + cfg.model.image_input_dim)]
    opts = cfg.attribution
    n_samples = args.samples if args.samples else opts["n_samples"]
    group_by = args.group_by if args.group_by else opts["group_by"]
    report = evaluation.modality_attribution(
        head, list(feats_test), blocks, n_samples=n_samples, seed=cfg.seed,
        top_k=opts["top_k"], labels=labels_test, group_by=group_by,
        ridge=opts["ridge"])
    reports_dir = run_dir / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    (reports_dir / "attribution.csv").write_text(report.to_csv(), encoding="utf-8")
    print(report.to_csv())
    return 0


def cmd_report(args) -> int:
    rows = []
    for run in args.runs:
        metrics_path = _require(Path(run) / "reports" / "metrics.json")
        metrics = json.loads(metrics_path.read_text(encoding="utf-8"))
        rows.append((metrics["variant"], 100.0 * metrics["accuracy"]))
    lines = ["Model            Accuracy", "-----            --------"]
    for variant, acc in rows:
        lines.append(f"{variant:<16} {acc:.2f}")
    if args.include_reference:
        lines.append("-- full-scale reference values --")
        for name in ("NwQM", "NwQM-w/oI", "NwQM-w/oT", "NwQM-w/oTI", "M-biLSTM"):
            lines.append(f"{name:<16} {REFERENCE_ACCURACY[name]:.2f}")
    table = "\n".join(lines)
    print(table)
    if args.out:
        Path(args.out).write_text(table + "\n", encoding="utf-8")
    if args.compare:
        path_a, path_b = (Path(p) for p in args.compare)
        rows_a = pipeline.read_records(_require(path_a))
        rows_b = pipeline.read_records(_require(path_b))
        ids_a = {r["page_id"]: r for r in rows_a}
        paired = [(ids_a[r["page_id"]], r) for r in rows_b if r["page_id"] in ids_a]
        preds_a = [QualityLabel.from_name(a["pred"]).ordinal for a, _ in paired]
        preds_b = [QualityLabel.from_name(b["pred"]).ordinal for _, b in paired]
        stat, df, pvalue = evaluation.stuart_maxwell(preds_a, preds_b)
        print(f"marginal homogeneity: statistic={stat:.4f} df={df} p={pvalue:.6g} "
              f"on {len(paired)} paired predictions")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nwqm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the bundled synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pages-per-class", type=int, default=10)
    p.add_argument("--emit-dump", action="store_true",
                   help="also write the corpus as a wiki dump XML file")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="stream dumps into a balanced corpus")
    p.add_argument("--dumps", nargs="+", required=True,
                   help="dump XML paths ('-' reads standard input)")
    p.add_argument("--cap", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("preprocess", help="tokenise a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_preprocess)

    for name, fn in (("train", cmd_train), ("evaluate", cmd_evaluate),
                     ("attribute", cmd_attribute)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--variant", default=None, choices=VARIANTS)
        p.add_argument("--mode", default=None)
        if name == "evaluate":
            p.add_argument("--dump-embeddings", action="store_true")
        if name == "attribute":
            p.add_argument("--samples", type=int, default=None)
            p.add_argument("--group-by", default=None, choices=("predicted", "true"))
        p.set_defaults(func=fn)

    p = sub.add_parser("report", help="collate accuracy across trained variants")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--include-reference", action="store_true")
    p.add_argument("--compare", nargs=2, default=None,
                   help="two predictions.jsonl files for the paired test")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MissingArtifact as exc:
        print(f"error: missing prerequisite artifact: {exc.path}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
