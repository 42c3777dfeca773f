import io
import random
import xml.dom.minidom

import pytest

from nwqm.dump_ingest import (CorpusError, DumpFormatError, IngestStats,
                              PagePair, PairCollector, QualityClass,
                              QualityLabel, RawPage, balance_sample,
                              extract_label, pair_main_talk, split_corpus,
                              stream_pages)


def make_dump(pages, ns_of=None):
    """pages: list of (title, ns, text) or (title, ns, text, [(ts, rev_text)])."""
    chunks = ['<mediawiki xmlns="http://www.mediawiki.org/xml/export-0.10/">']
    for i, page in enumerate(pages):
        title, ns, text = page[0], page[1], page[2]
        revisions = page[3] if len(page) > 3 else [("2019-06-01T00:00:00Z", text)]
        ns_line = f"<ns>{ns}</ns>" if ns is not None else ""
        revs = "".join(
            f"<revision><timestamp>{ts}</timestamp><text>{body}</text></revision>"
            for ts, body in revisions)
        chunks.append(f"<page><title>{title}</title>{ns_line}<id>{i + 1}</id>{revs}</page>")
    chunks.append("</mediawiki>")
    return "".join(chunks).encode("utf-8")


def test_single_main_page():
    dump = make_dump([("Cleopatra", 0, "ancient queen")])
    pages = list(stream_pages(io.BytesIO(dump)))
    assert len(pages) == 1
    assert pages[0].title == "Cleopatra"
    assert pages[0].namespace == 0
    assert pages[0].text == "ancient queen"


def test_empty_dump_yields_nothing():
    dump = b'<mediawiki xmlns="http://www.mediawiki.org/xml/export-0.10/"></mediawiki>'
    assert list(stream_pages(io.BytesIO(dump))) == []


def _dom_latest_revision(dump_bytes, title):
    # independent oracle: DOM-parse everything, keep the max-timestamp revision
    doc = xml.dom.minidom.parseString(dump_bytes.decode("utf-8"))
    for page in doc.getElementsByTagName("page"):
        got = page.getElementsByTagName("title")[0].firstChild.data
        if got != title:
            continue
        best = max(
            page.getElementsByTagName("revision"),
            key=lambda rev: rev.getElementsByTagName("timestamp")[0].firstChild.data)
        node = best.getElementsByTagName("text")[0].firstChild
        return node.data if node else ""
    raise AssertionError(f"page {title} not in dump")


def test_latest_revision_selected_out_of_order():
    revisions = [("2019-06-02T00:00:00Z", "middle"),
                 ("2019-06-03T00:00:00Z", "latest"),
                 ("2019-06-01T00:00:00Z", "earliest")]
    dump = make_dump([("Cleopatra", 0, "", revisions)])
    (page,) = stream_pages(io.BytesIO(dump))
    assert page.text == "latest"
    assert page.text == _dom_latest_revision(dump, "Cleopatra")
    assert page.revision_timestamp.year == 2019 and page.revision_timestamp.day == 3


def test_missing_ns_page_skipped_with_counter():
    dump = make_dump([("Good", 0, "x"), ("NoNs", None, "y"), ("Fine", 0, "z")])
    stats = IngestStats()
    pages = list(stream_pages(io.BytesIO(dump), stats))
    assert [p.title for p in pages] == ["Good", "Fine"]
    assert stats.missing_ns == 1


def test_malformed_xml_reports_byte_offset():
    bad = b'<mediawiki><page><title>X</title><ns>0</ns></page></mediawiki'
    with pytest.raises(DumpFormatError, match="byte offset"):
        list(stream_pages(io.BytesIO(bad)))


def test_streaming_consumes_input_lazily():
    pages = [(f"Page {i}", 0, "word " * 50) for i in range(500)]
    dump = make_dump(pages)

    class CountingReader(io.BytesIO):
        def __init__(self, data):
            super().__init__(data)
            self.consumed = 0

        def read(self, n=-1):
            chunk = super().read(n)
            self.consumed += len(chunk)
            return chunk

    reader = CountingReader(dump)
    it = stream_pages(reader, chunk_size=4096)
    next(it)
    assert reader.consumed < len(dump) / 5


# ---------------------------------------------------------------------------
# pairing

def _page(title, ns, text="body"):
    return RawPage(title=title, namespace=ns, text=text, page_id=abs(hash(title)) % 10000)


def two_pass_pairs(pages):
    """Oracle: set intersection of main titles and talk base titles."""
    mains, talks = {}, {}
    for p in pages:
        if p.text.lstrip().lower().startswith("#redirect"):
            continue
        if p.namespace == 0 and p.title:
            mains.setdefault(p.title, p)
        elif p.namespace == 1 and p.title.startswith("Talk:") and p.title[5:]:
            talks.setdefault(p.title[5:], p)
    return {(t, "Talk:" + t) for t in set(mains) & set(talks)}


def pair_titles(pairs):
    return {(p.main.title, p.talk.title) for p in pairs}


def test_pair_main_then_talk():
    pairs = pair_main_talk([_page("Cleopatra", 0), _page("Talk:Cleopatra", 1)])
    assert len(pairs) == 1
    assert pairs[0].main.title == "Cleopatra"
    assert pairs[0].talk.title == "Talk:Cleopatra"


def test_unmatched_main_dropped():
    assert pair_main_talk([_page("Cleopatra", 0)]) == []


def test_talk_first_order_also_pairs():
    pairs = pair_main_talk([_page("Talk:Cleopatra", 1), _page("Cleopatra", 0)])
    assert pair_titles(pairs) == {("Cleopatra", "Talk:Cleopatra")}


def test_duplicate_titles_keep_first_and_count():
    stats = IngestStats()
    first = _page("X", 0, "first version")
    dup = _page("X", 0, "second version")
    pairs = pair_main_talk([first, dup, _page("Talk:X", 1)], stats)
    assert len(pairs) == 1
    assert pairs[0].main.text == "first version"
    assert stats.duplicate_titles == 1


def test_pairing_memory_shrinks_when_matched():
    collector = PairCollector()
    collector.feed(_page("A", 0))
    collector.feed(_page("B", 0))
    assert len(collector.pending) == 2
    collector.feed(_page("Talk:A", 1))
    assert len(collector.pending) == 1  # only B still waiting


def _random_pages(rng):
    n_titles = rng.randint(5, 80)
    titles = [f"Article {i}" for i in range(n_titles)]
    pages = []
    for title in titles:
        roll = rng.random()
        if roll < 0.4:  # both sides present
            pages.append(_page(title, 0))
            pages.append(_page("Talk:" + title, 1))
        elif roll < 0.6:  # main only
            pages.append(_page(title, 0))
        elif roll < 0.8:  # talk only
            pages.append(_page("Talk:" + title, 1))
        else:  # duplicate mains
            pages.append(_page(title, 0))
            pages.append(_page(title, 0))
            pages.append(_page("Talk:" + title, 1))
    rng.shuffle(pages)
    return pages


def test_streaming_pairing_matches_two_pass_oracle_randomized():
    rng = random.Random(1234)
    for _ in range(50):
        pages = _random_pages(rng)
        assert pair_titles(pair_main_talk(iter(pages))) == two_pass_pairs(pages)


def test_pairing_invariant_under_permutation():
    rng = random.Random(99)
    pages = _random_pages(rng)
    reference = pair_titles(pair_main_talk(iter(pages)))
    for _ in range(10):
        rng.shuffle(pages)
        assert pair_titles(pair_main_talk(iter(pages))) == reference


def test_every_pair_title_matches_exactly():
    rng = random.Random(5)
    for pair in pair_main_talk(iter(_random_pages(rng))):
        assert pair.talk.title == "Talk:" + pair.main.title


def test_redirect_pages_skipped():
    stats = IngestStats()
    pairs = pair_main_talk(
        [_page("R", 0, "#REDIRECT [[Elsewhere]]"), _page("Talk:R", 1)], stats)
    assert pairs == []
    assert stats.redirects_skipped == 1


# ---------------------------------------------------------------------------
# label extraction

def test_label_direct_read():
    label = extract_label("{{WikiProject X|class=FA}}")
    assert label == QualityLabel(QualityClass.FA)
    assert label.ordinal == 5


def test_label_majority_vote():
    text = "{{WP A|class=B}} {{WP B|class=B}} {{WP C|class=C}}"
    assert extract_label(text).name == "B"


def test_label_tie_breaks_to_higher_ordinal():
    assert extract_label("{{A|class=GA}} {{B|class=B}}").name == "GA"


def test_label_vote_rule_on_all_two_banner_combinations():
    # exhaustive oracle over ordered pairs: majority, tie -> higher ordinal
    names = ["Stub", "Start", "C", "B", "GA", "FA"]
    for i, a in enumerate(names):
        for j, b in enumerate(names):
            got = extract_label(f"{{{{P1|class={a}}}}}\n{{{{P2|class={b}}}}}")
            expected = a if i >= j else b
            assert got.name == expected, (a, b)


def test_label_case_insensitive_and_none_when_absent():
    assert extract_label("{{WikiProject|class=fa}}").name == "FA"
    assert extract_label("no banners here") is None
    assert extract_label("{{WikiProject|class=Unknown}}") is None


def test_label_ordinal_bijection():
    seen = set()
    for quality in QualityClass:
        label = QualityLabel(quality)
        assert QualityLabel.from_ordinal(label.ordinal) == label
        seen.add(label.ordinal)
    assert seen == set(range(6))
    order = [QualityClass.STUB, QualityClass.START, QualityClass.C,
             QualityClass.B, QualityClass.GA, QualityClass.FA]
    assert [QualityLabel(q).ordinal for q in order] == sorted(
        QualityLabel(q).ordinal for q in order)


# ---------------------------------------------------------------------------
# balancing and splitting

def _labeled_pairs(count_by_class):
    pairs = []
    serial = 0
    for name, count in count_by_class.items():
        for _ in range(count):
            serial += 1
            main = RawPage(f"P{serial}", 0, "text", serial)
            talk = RawPage(f"Talk:P{serial}", 1, "talk", serial)
            pairs.append(PagePair(main, talk, QualityLabel.from_name(name)))
    return pairs


def _counts(pairs):
    out = {}
    for p in pairs:
        out[p.label.name] = out.get(p.label.name, 0) + 1
    return out


def test_balance_paper_scale_counts():
    # FA keeps all 3589; the other classes cap at 5900; total 33089
    available = {"FA": 3589, "GA": 7000, "B": 6500, "C": 8000, "Start": 9000,
                 "Stub": 5900}
    balanced = balance_sample(_labeled_pairs(available), per_class_cap=5900, seed=3)
    counts = _counts(balanced)
    assert counts == {"FA": 3589, "GA": 5900, "B": 5900, "C": 5900,
                      "Start": 5900, "Stub": 5900}
    assert len(balanced) == 33089


def test_balance_cap_rule_small():
    available = {"FA": 7, "GA": 12, "B": 12, "C": 12, "Start": 12, "Stub": 12}
    counts = _counts(balance_sample(_labeled_pairs(available), 10, seed=0))
    assert counts == {"FA": 7, "GA": 10, "B": 10, "C": 10, "Start": 10, "Stub": 10}


def test_balance_deterministic_given_seed():
    pairs = _labeled_pairs({n: 30 for n in ("FA", "GA", "B", "C", "Start", "Stub")})
    one = [p.main.title for p in balance_sample(pairs, 10, seed=42)]
    two = [p.main.title for p in balance_sample(pairs, 10, seed=42)]
    assert one == two
    other = [p.main.title for p in balance_sample(pairs, 10, seed=43)]
    assert one != other


def test_balance_rejects_empty_class():
    pairs = _labeled_pairs({"FA": 3, "GA": 3, "B": 3, "C": 3, "Start": 3})
    with pytest.raises(CorpusError, match="Stub"):
        balance_sample(pairs, 10)


def test_split_exact_division():
    pairs = _labeled_pairs({n: 100 for n in ("FA", "GA", "B", "C", "Start", "Stub")})
    split = split_corpus(pairs, seed=1)
    assert len(split.train) == 480 and len(split.validation) == 60 and len(split.test) == 60
    for part in (split.train, split.validation, split.test):
        counts = _counts(part)
        assert set(counts.values()) == {len(part) // 6}


def test_split_paper_scale_counts():
    # per-class largest remainder, worked by hand:
    #   FA 3589 -> 2871 / 359 / 359, others 5900 -> 4720 / 590 / 590
    available = {"FA": 3589, "GA": 5900, "B": 5900, "C": 5900, "Start": 5900,
                 "Stub": 5900}
    split = split_corpus(_labeled_pairs(available), seed=0)
    assert len(split.train) == 2871 + 5 * 4720 == 26471
    assert len(split.validation) == 359 + 5 * 590 == 3309
    assert len(split.test) == 3309


def test_split_deterministic_and_disjoint():
    pairs = _labeled_pairs({n: 17 for n in ("FA", "GA", "B", "C", "Start", "Stub")})
    a = split_corpus(pairs, seed=9)
    b = split_corpus(pairs, seed=9)
    for part_a, part_b in zip((a.train, a.validation, a.test),
                              (b.train, b.validation, b.test)):
        assert [p.main.title for p in part_a] == [p.main.title for p in part_b]
    names = [p.main.title for p in a.train + a.validation + a.test]
    assert len(names) == len(set(names)) == len(pairs)


def test_split_stratification_bound_random_sizes():
    rng = random.Random(7)
    for _ in range(20):
        sizes = {name: rng.randint(3, 60)
                 for name in ("FA", "GA", "B", "C", "Start", "Stub")}
        split = split_corpus(_labeled_pairs(sizes), seed=rng.randint(0, 999))
        for ratio, part in zip((0.8, 0.1, 0.1),
                               (split.train, split.validation, split.test)):
            counts = _counts(part)
            for name, total in sizes.items():
                got = counts.get(name, 0)
                assert abs(got / total - ratio) <= 1.0 / total + 1e-12


def test_split_rejects_bad_ratios():
    pairs = _labeled_pairs({n: 5 for n in ("FA", "GA", "B", "C", "Start", "Stub")})
    with pytest.raises(CorpusError, match="sum to 1"):
        split_corpus(pairs, ratios=(0.8, 0.1, 0.2))
