import re
import string

from hypothesis import given, settings
from hypothesis import strategies as st

from nwqm.preprocess import (SPECIAL_TOKENS, CleanDocument, PreprocessStats,
                             apply_token_budget, plain_text, segment_sections,
                             split_sentences, tokenize, wikitext_to_plain)

T = SPECIAL_TOKENS


# ---------------------------------------------------------------------------
# independent reference resolver (innermost-first regex reduction), used as
# the oracle for simple constructs; production code resolves outside-in

def oracle_resolve(markup: str) -> str:
    text = markup
    text = re.sub(r"<!--.*?-->", "", text, flags=re.DOTALL)
    text = re.sub(r"<ref[^>/]*?>.*?</ref>", f" {T.inline_reference} ", text, flags=re.DOTALL)
    text = re.sub(r"<ref[^>]*?/>", f" {T.inline_reference} ", text)

    def classify_template(match):
        name = match.group(1).split("|", 1)[0].strip().lower()
        if name.startswith("infobox"):
            return f" {T.infobox} "
        if name in ("efn", "sfn", "refn", "note"):
            return f" {T.footnote} "
        if name.startswith(("quote", "blockquote", "cquote")):
            return f" {T.quotation} "
        return " "

    while re.search(r"\{\{[^{}]*\}\}", text):
        text = re.sub(r"\{\{([^{}]*)\}\}", classify_template, text)

    def classify_link(match):
        body = match.group(1)
        target = body.split("|", 1)[0].strip().lower()
        if target.startswith("category:"):
            return f" {T.category} "
        if target.startswith(("file:", "image:")):
            return f" {T.image} "
        anchor = body.rsplit("|", 1)[-1].strip() or body.strip()
        return f" {T.wikilink} {anchor} "

    while re.search(r"\[\[[^\[\]]*\]\]", text):
        text = re.sub(r"\[\[([^\[\]]*)\]\]", classify_link, text)
    text = re.sub(r"\[(https?://\S+?)\s+([^\]]*)\]", rf" {T.external_link} \2 ", text)
    text = re.sub(r"\[(https?://\S+?)\]", f" {T.external_link} ", text)
    text = re.sub(r"'{2,}", "", text)
    return text


def flat_tokens(doc: CleanDocument):
    out = []
    for section in doc.sections:
        out.extend(section.tokens)
    return out


def test_wikilink_keeps_anchor_after_link_token():
    doc = wikitext_to_plain("[[Apple]] pie")
    expected = tokenize(oracle_resolve("[[Apple]] pie"))
    assert flat_tokens(doc) == expected == [T.wikilink, "Apple", "pie"]


def test_piped_wikilink_keeps_anchor_text():
    doc = wikitext_to_plain("a [[target|shown words]] b")
    assert flat_tokens(doc) == tokenize(oracle_resolve("a [[target|shown words]] b")) \
        == ["a", T.wikilink, "shown", "words", "b"]


def test_heading_opens_section_with_level_token():
    doc = wikitext_to_plain("lead\n== History ==\nbody")
    assert [(s.heading, s.level) for s in doc.sections] == [("", 1), ("History", 2)]
    assert doc.sections[1].tokens[:2] == [T.heading_l2, "History"]
    assert doc.sections[1].tokens[2:] == ["body"]


def test_empty_markup_gives_single_empty_lead():
    doc = wikitext_to_plain("")
    assert len(doc.sections) == 1
    assert doc.sections[0].heading == "" and doc.sections[0].level == 1
    assert doc.sections[0].tokens == []


def test_template_classification_matches_oracle():
    markup = ("{{Infobox person|name=Ada}}\n"
              "'''Ada''' was a [[mathematician|noted mathematician]].<ref>bio</ref>\n"
              "{{sfn|Smith|2001}} and {{some unknown template}}\n"
              "{{blockquote|famous words}}\n"
              "[[Category:People]]")
    got = flat_tokens(wikitext_to_plain(markup))
    assert got == tokenize(oracle_resolve(markup)) == [
        T.infobox, "Ada", "was", "a", T.wikilink, "noted", "mathematician",
        ".", T.inline_reference, T.footnote, "and", T.quotation, T.category]


def test_file_and_external_links():
    markup = "See [http://example.org/ada her page] and [[File:Ada.jpg|thumb|x]]."
    got = flat_tokens(wikitext_to_plain(markup))
    assert got == tokenize(oracle_resolve(markup)) == [
        "See", T.external_link, "her", "page", "and", T.image, "."]


def test_bare_url_becomes_external_link_token():
    got = flat_tokens(wikitext_to_plain("visit https://example.org now"))
    assert got == ["visit", T.external_link, "now"]


def test_heading_levels_above_two_map_to_l2_token():
    doc = wikitext_to_plain("= Top =\n=== Deep ===\nx")
    assert [s.level for s in doc.sections] == [1, 1, 3]
    assert doc.sections[1].tokens[0] == T.heading_l1
    assert doc.sections[2].tokens[0] == T.heading_l2


def test_nested_template_resolved_outside_in():
    # the outermost construct decides: unknown template swallows its nested link
    stats = PreprocessStats()
    got = flat_tokens(wikitext_to_plain("x {{unknown|[[Inner]]}} y", stats=stats))
    assert got == ["x", "y"]
    assert stats.unknown_templates == 1


def test_unbalanced_markup_recovers_and_counts():
    stats = PreprocessStats()
    doc = wikitext_to_plain("a {{broken and [[half b", stats=stats)
    tokens = flat_tokens(doc)
    assert stats.malformed_constructs >= 1
    joined = " ".join(tokens)
    assert "[[" not in joined and "{{" not in joined
    assert "a" in tokens and "b" in tokens


def test_no_raw_delimiters_survive():
    nasty = "{{a|b}} [[c]] {{d}} == not a heading [[e|f]] {{g|{{h}}}} ]] }}"
    tokens = flat_tokens(wikitext_to_plain(nasty))
    for token in tokens:
        assert "[[" not in token and "{{" not in token
        assert "]]" not in token and "}}" not in token


def test_comments_and_html_tags_dropped():
    got = flat_tokens(wikitext_to_plain("keep<!-- drop this --> <br/> text"))
    assert got == ["keep", "text"]


_plain_alphabet = string.ascii_letters + " "


@settings(max_examples=60)
@given(st.text(alphabet=_plain_alphabet, max_size=120))
def test_plain_text_is_a_fixed_point(text):
    doc = wikitext_to_plain(text)
    assert flat_tokens(doc) == tokenize(text)


def test_special_tokens_closed_vocabulary():
    markup = "{{Infobox x}} [[a]] [http://e.org b] <ref>r</ref> {{sfn|s}} [[File:f.jpg]]"
    for token in flat_tokens(wikitext_to_plain(markup)):
        if token.startswith("⟨"):
            assert token in SPECIAL_TOKENS.all()


# ---------------------------------------------------------------------------
# section segmentation

def _doc_with_sections(n):
    markup = "lead\n" + "\n".join(f"== H{i} ==\nbody {i}" for i in range(n - 1))
    return wikitext_to_plain(markup)


def test_segment_truncates_to_sixteen():
    seq = segment_sections(_doc_with_sections(20))
    assert len(seq.sections) == 16
    assert seq.pad_count == 0
    assert [s.heading for s in seq.sections[1:]] == [f"H{i}" for i in range(15)]


def test_segment_records_left_padding():
    seq = segment_sections(_doc_with_sections(3))
    assert len(seq.sections) == 3
    assert seq.pad_count == 13


def test_segment_boundary_exact_sixteen():
    seq = segment_sections(_doc_with_sections(16))
    assert len(seq.sections) == 16 and seq.pad_count == 0


# ---------------------------------------------------------------------------
# token budget

def test_budget_head_tail_concatenation():
    tokens = [f"t{i}" for i in range(600)]
    out = apply_token_budget(tokens)
    assert len(out) == 512
    assert out == tokens[:128] + tokens[216:]


def test_budget_under_and_at_boundary():
    assert apply_token_budget([f"t{i}" for i in range(400)]) == [f"t{i}" for i in range(400)]
    exact = [f"t{i}" for i in range(512)]
    assert apply_token_budget(exact) == exact


@settings(max_examples=100)
@given(st.integers(min_value=0, max_value=2000))
def test_budget_property_subsequence_and_length(n):
    tokens = list(range(n))
    out = apply_token_budget(tokens)
    assert len(out) == min(n, 512)
    if n > 512:
        assert out == tokens[:128] + tokens[-384:]
    else:
        assert out == tokens
    it = iter(tokens)
    assert all(tok in it for tok in out)  # order-preserving subsequence


# ---------------------------------------------------------------------------
# sentence splitting

def test_three_terminators_three_sentences():
    assert split_sentences("A. B? C!") == ["A.", "B?", "C!"]


def test_empty_text_no_sentences():
    assert split_sentences("") == []


def test_fragment_without_terminator_is_a_sentence():
    assert split_sentences("no terminator here") == ["no terminator here"]


def test_abbreviations_do_not_split():
    got = split_sentences("Dr. Smith arrived. He left early.")
    assert got == ["Dr. Smith arrived.", "He left early."]


def test_lowercase_continuation_does_not_split():
    # boundary needs an uppercase follower, so this stays one sentence
    assert split_sentences("version 2.5 shipped. next came 3.0") == \
        ["version 2.5 shipped. next came 3.0"]


def test_terminator_runs_stay_together():
    assert split_sentences("Really?! Yes. Done...") == ["Really?!", "Yes.", "Done..."]


def test_concatenation_reproduces_input_modulo_whitespace():
    text = "First one. Second two! Third three? Dr. Who stays. tail bit"
    got = split_sentences(text)
    assert "".join(got).replace(" ", "") == text.replace(" ", "")
    assert all(s for s in got)


def test_plain_text_feeds_sentence_splitter():
    talk = "{{WikiProject|class=B}}\n== Topic ==\nFirst point. Second point."
    text = plain_text(talk)
    sentences = split_sentences(text)
    # the heading has no terminator, so it rides with the first sentence
    assert any(s.endswith("First point.") for s in sentences)
    assert "Second point." in sentences
