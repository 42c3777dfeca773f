#!/usr/bin/env python3
# Wikitext preprocessing: meta constructs become single special tokens,
# headings open sections, long sections get the head+tail token budget,
# and talk pages split into sentences.

from nwqm.preprocess import (apply_token_budget, plain_text, segment_sections,
                             split_sentences, wikitext_to_plain)

markup = """{{Infobox writer|name=Ada Lovelace}}
'''Ada Lovelace''' was an English [[mathematician]] and writer.<ref>bio</ref>
She worked on the [[Analytical Engine|proposed mechanical computer]].

== Early life ==
Ada was born in [[London]].{{sfn|Woolley|1999}}
See [http://example.org/ada her archive] and [[File:Ada.jpg|thumb|portrait]].

== Legacy ==
{{blockquote|The science of operations...}}
Many consider her the first programmer.
[[Category:English mathematicians]]
"""

doc = wikitext_to_plain(markup, title="Ada Lovelace")
print(f"{len(doc.sections)} sections:")
for section in doc.sections:
    name = section.heading or "(lead)"
    print(f"  level {section.level} {name!r}: {' '.join(section.tokens[:12])} ...")

# every meta construct became exactly one token from the closed vocabulary:
# the infobox, wikilinks (keeping their anchor text), the reference, the
# footnote template, the external link, the image and the category
lead = doc.sections[0].tokens
print("\nlead tokens:", lead)

# a page is at most 16 sections; shorter pages record left-pad slots for
# the summarizer to fill with zero vectors
seq = segment_sections(doc)
print(f"\nsection sequence: {len(seq.sections)} kept, {seq.pad_count} pad slots")

# encoder budget: keep the first 128 and last 384 tokens of long sections
long_tokens = [f"t{i}" for i in range(700)]
budgeted = apply_token_budget(long_tokens)
print(f"\n700 tokens -> {len(budgeted)}: starts {budgeted[:2]}, "
      f"resumes at {budgeted[128]}, ends {budgeted[-1]}")

# talk pages are sentence-split on terminators followed by an uppercase
# start, with an abbreviation exception list
talk = "I reviewed the sources. Dr. Smith disagrees! Should we merge? no rush"
sentences = split_sentences(plain_text(talk))
for i, sentence in enumerate(sentences):
    print(f"sentence {i}: {sentence!r}")
