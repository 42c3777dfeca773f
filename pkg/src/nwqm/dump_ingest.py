"""Wiki XML dump ingestion: streaming page extraction, main/talk pairing,
quality-label extraction, class balancing and stratified splitting.

Pages are paired within one dump file in a single forward pass: the first
time either side of an article appears it is remembered; when the partner
shows up the pair is emitted and the bookkeeping entry dropped, so memory
grows only with the number of unmatched titles.
"""

from __future__ import annotations

import io
import json
import random
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import BinaryIO, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple


class DumpFormatError(Exception):
    """Malformed dump XML; message carries an approximate byte offset."""


class CorpusError(Exception):
    """Corpus-level contract violation (empty classes, bad ratios, ...)."""


class QualityClass(Enum):
    STUB = "Stub"
    START = "Start"
    C = "C"
    B = "B"
    GA = "GA"
    FA = "FA"


# ordinal encoding: Stub -> 0 ... FA -> 5
ORDINAL = {
    QualityClass.STUB: 0,
    QualityClass.START: 1,
    QualityClass.C: 2,
    QualityClass.B: 3,
    QualityClass.GA: 4,
    QualityClass.FA: 5,
}
CLASS_BY_ORDINAL = {v: k for k, v in ORDINAL.items()}
CLASS_NAMES = [CLASS_BY_ORDINAL[i].value for i in range(6)]  # Stub..FA
_CLASS_LOOKUP = {c.value.lower(): c for c in QualityClass}


@dataclass(frozen=True)
class QualityLabel:
    quality: QualityClass

    @property
    def ordinal(self) -> int:
        return ORDINAL[self.quality]

    @property
    def name(self) -> str:
        return self.quality.value

    @classmethod
    def from_name(cls, name: str) -> "QualityLabel":
        try:
            return cls(_CLASS_LOOKUP[name.strip().lower()])
        except KeyError:
            raise CorpusError(f"unknown quality class {name!r}") from None

    @classmethod
    def from_ordinal(cls, ordinal: int) -> "QualityLabel":
        return cls(CLASS_BY_ORDINAL[ordinal])


@dataclass
class RawPage:
    title: str
    namespace: int  # 0 = main, 1 = talk
    text: str
    page_id: int
    revision_timestamp: Optional[datetime] = None


@dataclass
class PagePair:
    main: RawPage
    talk: RawPage
    label: Optional[QualityLabel] = None


@dataclass
class CorpusSplit:
    train: List[PagePair]
    validation: List[PagePair]
    test: List[PagePair]
    seed: int


@dataclass
class IngestStats:
    pages_seen: int = 0
    missing_ns: int = 0
    duplicate_titles: int = 0
    redirects_skipped: int = 0
    unlabeled_pairs: int = 0


_REDIRECT_RE = re.compile(r"^\s*#redirect", re.IGNORECASE)


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_timestamp(text: Optional[str]) -> Optional[datetime]:
    if not text:
        return None
    try:
        return datetime.fromisoformat(text.replace("Z", "+00:00")).astimezone(timezone.utc)
    except ValueError:
        return None


def _page_from_element(elem) -> Tuple[Optional[RawPage], bool]:
    """Build a RawPage from a <page> element; (None, True) when ns missing."""
    title = ""
    namespace = None
    page_id = 0
    revisions: List[Tuple[Optional[datetime], str]] = []
    for child in elem:
        tag = _local(child.tag)
        if tag == "title":
            title = child.text or ""
        elif tag == "ns":
            try:
                namespace = int(child.text or "")
            except ValueError:
                namespace = None
        elif tag == "id":
            try:
                page_id = int(child.text or "0")
            except ValueError:
                page_id = 0
        elif tag == "revision":
            stamp = None
            text = ""
            for rev_child in child:
                rtag = _local(rev_child.tag)
                if rtag == "timestamp":
                    stamp = _parse_timestamp(rev_child.text)
                elif rtag == "text":
                    text = rev_child.text or ""
            revisions.append((stamp, text))
    if namespace is None:
        return None, True
    # latest revision wins; ties and missing timestamps fall back to document order
    text = ""
    if revisions:
        best = max(
            range(len(revisions)),
            key=lambda i: (revisions[i][0] or datetime.min.replace(tzinfo=timezone.utc), i),
        )
        text = revisions[best][1]
        stamp = revisions[best][0]
    else:
        stamp = None
    return RawPage(title=title, namespace=namespace, text=text,
                   page_id=page_id, revision_timestamp=stamp), False


def stream_pages(source: BinaryIO, stats: Optional[IngestStats] = None,
                 chunk_size: int = 1 << 16) -> Iterator[RawPage]:
    """Yield one RawPage per <page> element, in document order.

    Streaming: completed elements are discarded, so memory does not grow
    with dump size. Only the latest revision's text is kept.
    """
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    stats = stats if stats is not None else IngestStats()
    parser = ET.XMLPullParser(events=("start", "end"))
    fed = 0
    root = None
    while True:
        chunk = source.read(chunk_size)
        try:
            if chunk:
                parser.feed(chunk)
            else:
                parser.close()
        except ET.ParseError as exc:
            line, col = exc.position
            raise DumpFormatError(
                f"malformed XML near byte offset {fed} (line {line}, column {col}): {exc}"
            ) from exc
        fed += len(chunk)
        for event, elem in parser.read_events():
            if event == "start":
                if root is None:
                    root = elem
                continue
            if _local(elem.tag) != "page":
                continue
            stats.pages_seen += 1
            page, missing_ns = _page_from_element(elem)
            elem.clear()
            if root is not None:
                # drop references to completed children of the document root
                for child in list(root):
                    root.remove(child)
            if missing_ns:
                stats.missing_ns += 1
                continue
            yield page
        if not chunk:
            break


TALK_PREFIX = "Talk:"


def base_title(page: RawPage) -> Optional[str]:
    """Article title shared by a main page and its talk page."""
    if page.namespace == 0:
        return page.title
    if page.namespace == 1 and page.title.startswith(TALK_PREFIX):
        return page.title[len(TALK_PREFIX):]
    return None


class PairCollector:
    """One-pass pairing state: unmatched pages held until the partner arrives."""

    def __init__(self, skip_redirects: bool = True, stats: Optional[IngestStats] = None):
        self.pending: Dict[Tuple[str, int], RawPage] = {}
        self.pairs: List[PagePair] = []
        self.stats = stats if stats is not None else IngestStats()
        self.skip_redirects = skip_redirects
        self._seen_titles: set = set()

    def feed(self, page: RawPage) -> Optional[PagePair]:
        if page.namespace not in (0, 1):
            return None
        if self.skip_redirects and _REDIRECT_RE.match(page.text or ""):
            self.stats.redirects_skipped += 1
            return None
        base = base_title(page)
        if base is None or not base:
            return None
        key = (page.title, page.namespace)
        if key in self._seen_titles:
            self.stats.duplicate_titles += 1
            return None
        self._seen_titles.add(key)
        partner_key = (base, 1 - page.namespace)
        partner = self.pending.pop(partner_key, None)
        if partner is None:
            self.pending[(base, page.namespace)] = page
            return None
        main, talk = (page, partner) if page.namespace == 0 else (partner, page)
        pair = PagePair(main=main, talk=talk)
        self.pairs.append(pair)
        return pair


def pair_main_talk(pages: Iterable[RawPage], stats: Optional[IngestStats] = None,
                   skip_redirects: bool = True) -> List[PagePair]:
    """Pair "X" (ns 0) with "Talk:X" (ns 1) in one forward pass.

    Arrival order (main-first or talk-first) does not affect the resulting
    set of pairs; unmatched pages are dropped, duplicates counted.
    """
    collector = PairCollector(skip_redirects=skip_redirects, stats=stats)
    for page in pages:
        collector.feed(page)
    return collector.pairs


_TEMPLATE_OPEN = "{{"
_CLASS_PARAM_RE = re.compile(r"\bclass\s*=\s*([A-Za-z]+)")


def _template_spans(text: str) -> Iterator[str]:
    """Outermost {{...}} spans, tolerant of unbalanced braces."""
    i = 0
    n = len(text)
    while i < n:
        start = text.find(_TEMPLATE_OPEN, i)
        if start < 0:
            return
        depth = 0
        j = start
        while j < n - 1:
            two = text[j:j + 2]
            if two == "{{":
                depth += 1
                j += 2
            elif two == "}}":
                depth -= 1
                j += 2
                if depth == 0:
                    break
            else:
                j += 1
        if depth != 0:
            # unterminated template: scan its tail anyway, then stop
            yield text[start:]
            return
        yield text[start:j]
        i = j


def extract_label(talk_text: str) -> Optional[QualityLabel]:
    """Read the quality class from project-banner templates on a talk page.

    Every ``class=`` parameter inside a template transclusion counts as one
    banner vote; majority wins, ties go to the higher ordinal.
    """
    votes: Dict[QualityClass, int] = {}
    for span in _template_spans(talk_text or ""):
        for match in _CLASS_PARAM_RE.finditer(span):
            quality = _CLASS_LOOKUP.get(match.group(1).lower())
            if quality is not None:
                votes[quality] = votes.get(quality, 0) + 1
    if not votes:
        return None
    best = max(votes.items(), key=lambda item: (item[1], ORDINAL[item[0]]))
    return QualityLabel(best[0])


def label_pairs(pairs: Iterable[PagePair], stats: Optional[IngestStats] = None) -> List[PagePair]:
    """Attach labels from talk pages; unlabeled pairs are dropped and counted."""
    stats = stats if stats is not None else IngestStats()
    out = []
    for pair in pairs:
        label = extract_label(pair.talk.text)
        if label is None:
            stats.unlabeled_pairs += 1
            continue
        pair.label = label
        out.append(pair)
    return out


def balance_sample(labeled_pairs: Sequence[PagePair], per_class_cap: int,
                   seed: int = 0) -> List[PagePair]:
    """Cap each class at ``per_class_cap`` pairs via seeded uniform sampling.

    FA keeps every available pair; the cap applies to the other classes.
    """
    if per_class_cap <= 0:
        raise ValueError(f"per_class_cap must be positive, got {per_class_cap}")
    by_class: Dict[QualityClass, List[PagePair]] = {c: [] for c in QualityClass}
    for pair in labeled_pairs:
        if pair.label is None:
            raise CorpusError(f"pair {pair.main.title!r} has no label")
        by_class[pair.label.quality].append(pair)
    empty = [c.value for c in QualityClass if not by_class[c]]
    if empty:
        raise CorpusError(f"classes with zero pairs: {', '.join(empty)}")
    rng = random.Random(seed)
    out: List[PagePair] = []
    for ordinal in range(6):
        quality = CLASS_BY_ORDINAL[ordinal]
        bucket = by_class[quality]
        if quality is QualityClass.FA or len(bucket) <= per_class_cap:
            chosen = list(range(len(bucket)))
        else:
            chosen = sorted(rng.sample(range(len(bucket)), per_class_cap))
        out.extend(bucket[i] for i in chosen)
    return out


def _largest_remainder(n: int, ratios: Sequence[float]) -> List[int]:
    exact = [n * r for r in ratios]
    counts = [int(x) for x in exact]
    # hand out the remainder by descending fractional part, earlier split wins ties
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def split_corpus(corpus: Sequence[PagePair], ratios: Tuple[float, float, float] = (0.8, 0.1, 0.1),
                 seed: int = 0) -> CorpusSplit:
    """Stratified train/validation/test split, deterministic given seed.

    Per class, counts follow the largest-remainder rule, so every split
    stays within one item of the exact ratio.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise CorpusError(f"split ratios must sum to 1, got {ratios}")
    by_class: Dict[QualityClass, List[PagePair]] = {}
    for pair in corpus:
        if pair.label is None:
            raise CorpusError(f"pair {pair.main.title!r} has no label")
        by_class.setdefault(pair.label.quality, []).append(pair)
    for quality, bucket in by_class.items():
        if len(bucket) < 3:
            raise CorpusError(f"class {quality.value} has {len(bucket)} pairs; need at least 3")
    rng = random.Random(seed)
    splits: Tuple[List[PagePair], ...] = ([], [], [])
    for ordinal in range(6):
        quality = CLASS_BY_ORDINAL[ordinal]
        bucket = list(by_class.get(quality, []))
        if not bucket:
            continue
        rng.shuffle(bucket)
        n_train, n_val, _ = _largest_remainder(len(bucket), ratios)
        splits[0].extend(bucket[:n_train])
        splits[1].extend(bucket[n_train:n_train + n_val])
        splits[2].extend(bucket[n_train + n_val:])
    return CorpusSplit(train=splits[0], validation=splits[1], test=splits[2], seed=seed)


# ---------------------------------------------------------------------------
# corpus record format: one JSON object per line, UTF-8, LF line endings

def pair_record(pair: PagePair) -> dict:
    return {
        "page_id": pair.main.page_id,
        "title": pair.main.title,
        "label": pair.label.name if pair.label else None,
        "main_text": pair.main.text,
        "talk_text": pair.talk.text,
    }


def write_corpus(path, pairs: Iterable[PagePair]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair_record(pair), ensure_ascii=False))
            fh.write("\n")
            count += 1
    return count


def read_corpus(path) -> List[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def class_counts(pairs: Iterable[PagePair]) -> Dict[str, int]:
    counts = {name: 0 for name in CLASS_NAMES}
    for pair in pairs:
        if pair.label is not None:
            counts[pair.label.name] += 1
    return counts


def format_counts_table(counts: Dict[str, int]) -> str:
    """Class/article-count table, highest class first."""
    lines = ["Class    Article count", "-----    -------------"]
    for name in reversed(CLASS_NAMES):
        lines.append(f"{name:<8} {counts.get(name, 0)}")
    lines.append(f"{'Total':<8} {sum(counts.values())}")
    return "\n".join(lines)
