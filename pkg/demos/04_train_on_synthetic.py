#!/usr/bin/env python3
# End-to-end training on the bundled synthetic corpus: generate pages,
# preprocess, run the staged regime (pretrain the toy section encoder,
# freeze it, pretrain the summarizer, then train the fused model), and
# score the held-out split.
#
# The equivalent CLI session:
#   nwqm synth --out data --seed 0
#   nwqm preprocess --corpus data/corpus --out data/preprocessed
#   nwqm train --config config.json
#   nwqm evaluate --config config.json

import numpy as np

from nwqm.dump_ingest import pair_record, split_corpus
from nwqm.model import ModelConfig, forward_distribution, init_params
from nwqm.pipeline import build_vocabulary, examples_from_records, preprocess_record
from nwqm.synthetic import generate_pairs
from nwqm.training import TrainConfig, evaluate_split, format_report_table, train

config = ModelConfig(section_dim=24, toy_embed_dim=16, gru_hidden=10,
                     attention_dim=20, talk_input_dim=512, image_input_dim=2048,
                     classifier_hidden=32, vocab_size=2000, dropout=0.2)

pairs, images = generate_pairs(seed=0, pages_per_class=10)
split = split_corpus(pairs, seed=0)
print(f"corpus: {len(split.train)} train / {len(split.validation)} validation "
      f"/ {len(split.test)} test pages")


class ImageTable:
    dim = 2048

    def __init__(self, table):
        self._table = {k: v.astype(np.float32) for k, v in table.items()}

    def __contains__(self, key):
        return key in self._table

    def get64(self, key):
        return self._table[key].astype(np.float64)


store = ImageTable(images)


def build(part):
    records = [preprocess_record(pair_record(p), config) for p in part]
    return records, examples_from_records(records, config, images=store)


train_records, train_ex = build(split.train)
_, val_ex = build(split.validation)
_, test_ex = build(split.test)
vocab = build_vocabulary(train_records)
print(f"vocabulary: {len(vocab)} tokens")

params = init_params(config, "full", seed=0, vocab=vocab)
schedule = TrainConfig(seed=0, encoder_lr=0.02, encoder_epochs=6, encoder_batch=8,
                       summarizer_lr=0.01, summarizer_epochs=6, summarizer_batch=8,
                       joint_lr=0.01, joint_epochs=20, joint_batch=8)
reports = train(train_ex, val_ex, params, schedule)

print("\nlast joint epochs:")
joint = [r for r in reports if r.stage == "joint"]
print(format_report_table(joint[-6:]))

loss, accuracy = evaluate_split(test_ex, params,
                                lambda ex, p, **kw: forward_distribution(ex, p))
print(f"\nheld-out: loss {loss:.4f}, accuracy {accuracy:.3f} "
      f"(chance is {1 / 6:.3f})")
