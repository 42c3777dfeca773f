#!/usr/bin/env python3
# Streaming dump ingestion: parse a wiki XML dump, pair every article with
# its talk page in one pass, read quality labels from the project banners,
# then balance and split the corpus.

import io

from nwqm.dump_ingest import (IngestStats, balance_sample, class_counts,
                              extract_label, format_counts_table,
                              pair_main_talk, split_corpus, stream_pages)
from nwqm.synthetic import generate_pairs, pairs_to_dump_xml

# build a small dump in memory; the generator emits real wikitext with
# headings, links, templates, references and talk-page assessment banners
pairs, _ = generate_pairs(seed=7, pages_per_class=10)
dump = pairs_to_dump_xml(pairs)
print(f"dump is {len(dump):,} bytes, {2 * len(pairs)} pages\n")

# stream_pages is constant-memory: pages come out as the parser reaches
# them, latest revision only
stats = IngestStats()
pages = list(stream_pages(io.BytesIO(dump), stats))
print(f"streamed {stats.pages_seen} pages "
      f"({sum(p.namespace == 0 for p in pages)} main, "
      f"{sum(p.namespace == 1 for p in pages)} talk)")

# one linear scan: remember a title the first time either side appears,
# emit the pair when the partner shows up
paired = pair_main_talk(iter(pages), stats)
print(f"paired {len(paired)} articles; "
      f"{len(pages) - 2 * len(paired)} pages stayed unmatched")
print("first pair:", paired[0].main.title, "<->", paired[0].talk.title)

# quality labels live in the talk page banners: {{WikiProject ...|class=FA}}
for pair in paired:
    pair.label = extract_label(pair.talk.text)
example = paired[0]
print(f"\n{example.talk.title!r} carries class={example.label.name} "
      f"(ordinal {example.label.ordinal})")

# balance: cap every class, except the scarcest one keeps everything
balanced = balance_sample(paired, per_class_cap=8, seed=0)
print("\nbalanced corpus:")
print(format_counts_table(class_counts(balanced)))

# stratified 80/10/10 split, deterministic under the seed
split = split_corpus(balanced, seed=0)
print(f"\nsplit sizes: train={len(split.train)} "
      f"validation={len(split.validation)} test={len(split.test)}")
