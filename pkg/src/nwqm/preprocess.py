"""Wikitext to plain text with special meta tokens, section segmentation,
head+tail token budgeting and talk-page sentence splitting.

Meta constructs (infoboxes, links, references, ...) are replaced by single
special tokens; everything else is rendered as plain text. Nesting is
resolved outside-in: the outermost construct decides what survives.
"""

from __future__ import annotations

import html
import re
from dataclasses import dataclass
from typing import List, Optional, Tuple


@dataclass(frozen=True)
class SpecialTokens:
    """Closed vocabulary of meta-content markers. Surfaces use mathematical
    angle brackets so no natural token or HTML tag can collide."""

    infobox: str = "⟨infobox⟩"
    heading_l1: str = "⟨h1⟩"
    heading_l2: str = "⟨h2⟩"
    wikilink: str = "⟨wikilink⟩"
    external_link: str = "⟨extlink⟩"
    inline_reference: str = "⟨ref⟩"
    footnote: str = "⟨footnote⟩"
    image: str = "⟨image⟩"
    quotation: str = "⟨quote⟩"
    category: str = "⟨category⟩"

    def all(self) -> Tuple[str, ...]:
        return (self.infobox, self.heading_l1, self.heading_l2, self.wikilink,
                self.external_link, self.inline_reference, self.footnote,
                self.image, self.quotation, self.category)


SPECIAL_TOKENS = SpecialTokens()


@dataclass
class Section:
    heading: str
    level: int  # >= 1; the lead section is level 1 with an empty heading
    tokens: List[str]


@dataclass
class CleanDocument:
    sections: List[Section]
    source_title: str = ""


@dataclass
class SectionSequence:
    """First ``max_sections`` sections plus the number of left-pad slots the
    summarizer must fill with zero vectors. Padding is bookkeeping, never a
    fake empty section."""

    sections: List[Section]
    pad_count: int


@dataclass
class PreprocessStats:
    malformed_constructs: int = 0
    unknown_templates: int = 0
    empty_documents: int = 0


_FOOTNOTE_TEMPLATES = {"efn", "sfn", "sfnp", "sfnm", "refn", "note", "notetag"}
_QUOTE_PREFIXES = ("quote", "blockquote", "cquote", "quotation", "pull quote",
                   "centered pull quote")

_COMMENT_RE = re.compile(r"<!--.*?-->", re.DOTALL)
_REF_PAIR_RE = re.compile(r"<ref\b[^>/]*?>.*?</ref\s*>", re.DOTALL | re.IGNORECASE)
_REF_SELF_RE = re.compile(r"<ref\b[^>]*?/>", re.IGNORECASE)
_REF_STRAY_RE = re.compile(r"</?ref\b[^>]*?>", re.IGNORECASE)
_HTML_TAG_RE = re.compile(r"</?[A-Za-z][^>\n]*>")
_HEADING_RE = re.compile(r"^(={1,6})\s*(.*?)\s*=+\s*$")
_BARE_URL_RE = re.compile(r"https?://[^\s\]|]+")
_BOLD_ITALIC_RE = re.compile(r"'{2,}")


def _balanced_span(text: str, start: int, open_s: str, close_s: str) -> int:
    """End index (exclusive) of the construct opening at ``start``, or -1."""
    depth = 0
    i = start
    n = len(text)
    while i < n:
        if text.startswith(open_s, i):
            depth += 1
            i += len(open_s)
        elif text.startswith(close_s, i):
            depth -= 1
            i += len(close_s)
            if depth == 0:
                return i
        else:
            i += 1
    return -1


def _template_name(body: str) -> str:
    name = body.split("|", 1)[0]
    return " ".join(name.split()).lower()


def _replace_templates(text: str, tokens: SpecialTokens, stats: PreprocessStats) -> str:
    out = []
    i = 0
    n = len(text)
    while i < n:
        j = text.find("{{", i)
        if j < 0:
            out.append(text[i:])
            break
        out.append(text[i:j])
        end = _balanced_span(text, j, "{{", "}}")
        if end < 0:
            stats.malformed_constructs += 1
            i = j + 2  # drop the stray delimiter, keep scanning
            continue
        name = _template_name(text[j + 2:end - 2])
        if name.startswith("infobox"):
            out.append(f" {tokens.infobox} ")
        elif name in _FOOTNOTE_TEMPLATES:
            out.append(f" {tokens.footnote} ")
        elif name.startswith(_QUOTE_PREFIXES):
            out.append(f" {tokens.quotation} ")
        else:
            stats.unknown_templates += 1
        i = end
    return "".join(out)


def _replace_tables(text: str, stats: PreprocessStats) -> str:
    out = []
    i = 0
    while i < len(text):
        j = text.find("{|", i)
        if j < 0:
            out.append(text[i:])
            break
        out.append(text[i:j])
        end = _balanced_span(text, j, "{|", "|}")
        if end < 0:
            stats.malformed_constructs += 1
            i = j + 2
            continue
        i = end
    return "".join(out)


def _replace_links(text: str, tokens: SpecialTokens, stats: PreprocessStats) -> str:
    out = []
    i = 0
    n = len(text)
    while i < n:
        j = text.find("[[", i)
        if j < 0:
            out.append(text[i:])
            break
        out.append(text[i:j])
        end = _balanced_span(text, j, "[[", "]]")
        if end < 0:
            stats.malformed_constructs += 1
            i = j + 2
            continue
        body = text[j + 2:end - 2]
        target = body.split("|", 1)[0].strip()
        lowered = target.lower()
        if lowered.startswith("category:"):
            out.append(f" {tokens.category} ")
        elif lowered.startswith(("file:", "image:")):
            out.append(f" {tokens.image} ")
        else:
            anchor = body.rsplit("|", 1)[-1].strip() or target
            anchor = _replace_links(anchor, tokens, stats)
            out.append(f" {tokens.wikilink} {anchor} ")
        i = end
    return "".join(out)


def _replace_external_links(text: str, tokens: SpecialTokens) -> str:
    out = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "[" and not text.startswith("[[", i):
            match = re.match(r"\[(https?://[^\s\]]+)(?:\s+([^\]]*))?\]", text[i:])
            if match:
                label = (match.group(2) or "").strip()
                out.append(f" {tokens.external_link} {label} " if label
                           else f" {tokens.external_link} ")
                i += match.end()
                continue
        out.append(ch)
        i += 1
    return _BARE_URL_RE.sub(f" {tokens.external_link} ", "".join(out))


def _scrub_leftovers(text: str, stats: PreprocessStats) -> str:
    # raw delimiters must never reach the token stream
    for raw in ("[[", "]]", "{{", "}}"):
        found = text.count(raw)
        if found:
            stats.malformed_constructs += found
            text = text.replace(raw, " ")
    return text


def _resolve_inline(text: str, tokens: SpecialTokens, stats: PreprocessStats) -> str:
    text = _replace_links(text, tokens, stats)
    text = _replace_external_links(text, tokens)
    text = _BOLD_ITALIC_RE.sub("", text)
    text = _HTML_TAG_RE.sub(" ", text)
    return _scrub_leftovers(text, stats)


def _resolve_block(markup: str, tokens: SpecialTokens, stats: PreprocessStats) -> str:
    """Handle constructs that may span lines, keeping line structure intact."""
    text = html.unescape(markup)
    text = _COMMENT_RE.sub("", text)
    text = _REF_PAIR_RE.sub(f" {tokens.inline_reference} ", text)
    text = _REF_SELF_RE.sub(f" {tokens.inline_reference} ", text)
    if _REF_STRAY_RE.search(text):
        stats.malformed_constructs += 1
        text = _REF_STRAY_RE.sub(f" {tokens.inline_reference} ", text)
    text = _replace_tables(text, stats)
    text = _replace_templates(text, tokens, stats)
    return text


def _split_heading_line(line: str) -> Optional[Tuple[int, str]]:
    match = _HEADING_RE.match(line.strip())
    if not match:
        return None
    return len(match.group(1)), match.group(2).strip()


def sectionize(markup: str, tokens: SpecialTokens = SPECIAL_TOKENS,
               stats: Optional[PreprocessStats] = None) -> List[Tuple[str, int, str]]:
    """Resolve markup and split on heading lines.

    Returns (heading, level, body text) triples; the lead section comes
    first with an empty heading at level 1. Body text still contains the
    special tokens inline.
    """
    stats = stats if stats is not None else PreprocessStats()
    text = _resolve_block(markup or "", tokens, stats)
    sections: List[Tuple[str, int, List[str]]] = [("", 1, [])]
    for line in text.split("\n"):
        heading = _split_heading_line(line)
        if heading is not None:
            level, title = heading
            title = " ".join(_resolve_inline(title, tokens, stats).split())
            sections.append((title, level, []))
        else:
            sections[-1][2].append(_resolve_inline(line, tokens, stats))
    return [(h, lvl, "\n".join(body).strip()) for h, lvl, body in sections]


_WORD_RE = None


def _token_pattern(tokens: SpecialTokens):
    global _WORD_RE
    if _WORD_RE is None:
        special = "|".join(re.escape(t) for t in SPECIAL_TOKENS.all())
        _WORD_RE = re.compile(rf"(?:{special})|[\w]+(?:'[\w]+)*|[^\s\w]")
    return _WORD_RE


def tokenize(text: str, tokens: SpecialTokens = SPECIAL_TOKENS) -> List[str]:
    """Whitespace + punctuation tokenizer; special tokens stay atomic."""
    return _token_pattern(tokens).findall(text)


def wikitext_to_plain(markup: str, title: str = "",
                      tokens: SpecialTokens = SPECIAL_TOKENS,
                      stats: Optional[PreprocessStats] = None) -> CleanDocument:
    """Convert wikitext into ordered sections of plain tokens.

    Heading lines open a new section; the heading contributes its level
    token followed by the heading words. Unknown templates are dropped,
    unbalanced markup is recovered best-effort and counted, never fatal.
    """
    stats = stats if stats is not None else PreprocessStats()
    sections = []
    for heading, level, body in sectionize(markup, tokens, stats):
        toks: List[str] = []
        if heading or level > 1 or sections:
            marker = tokens.heading_l1 if level == 1 else tokens.heading_l2
            toks.append(marker)
            toks.extend(tokenize(heading, tokens))
        toks.extend(tokenize(body, tokens))
        sections.append(Section(heading=heading, level=level, tokens=toks))
    if not sections:
        sections = [Section(heading="", level=1, tokens=[])]
    if len(sections) == 1 and not sections[0].tokens:
        stats.empty_documents += 1
    return CleanDocument(sections=sections, source_title=title)


def plain_text(markup: str, tokens: SpecialTokens = SPECIAL_TOKENS,
               stats: Optional[PreprocessStats] = None) -> str:
    """Flat plain-text rendering (sections joined), for sentence splitting."""
    parts = []
    for heading, _level, body in sectionize(markup, tokens, stats):
        if heading:
            parts.append(heading)
        if body:
            parts.append(body)
    return "\n".join(parts)


def segment_sections(doc: CleanDocument, max_sections: int = 16) -> SectionSequence:
    """Keep the first ``max_sections`` sections and record the left-pad count."""
    kept = doc.sections[:max_sections]
    return SectionSequence(sections=kept, pad_count=max_sections - len(kept))


def apply_token_budget(tokens: List[str], head: int = 128, tail: int = 384) -> List[str]:
    """First ``head`` plus last ``tail`` tokens when over budget, else unchanged."""
    if head < 0 or tail < 0 or head + tail <= 0:
        raise ValueError(f"invalid budget head={head} tail={tail}")
    budget = head + tail
    if len(tokens) <= budget:
        return list(tokens)
    return list(tokens[:head]) + list(tokens[-tail:])


_ABBREVIATIONS = {
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "no", "vs", "etc",
    "fig", "eq", "cf", "al", "e.g", "i.e", "approx",
}
_TERMINATORS = ".!?"


def _word_before(text: str, i: int) -> str:
    j = i
    while j > 0 and (text[j - 1].isalnum() or text[j - 1] == "."):
        j -= 1
    return text[j:i].strip(".")


def split_sentences(text: str) -> List[str]:
    """Deterministic sentence splitter.

    A boundary is a terminator run (., !, ?) followed by whitespace and an
    uppercase letter, unless the dot closes a known abbreviation. The final
    fragment is always a sentence; empty sentences are dropped, and the
    sentences concatenate back to the input modulo whitespace.
    """
    sentences: List[str] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch not in _TERMINATORS:
            i += 1
            continue
        j = i
        while j + 1 < n and text[j + 1] in _TERMINATORS:
            j += 1
        k = j + 1
        while k < n and text[k].isspace():
            k += 1
        boundary = k > j + 1 and k < n and text[k].isupper()
        if boundary and ch == "." and i == j:
            if _word_before(text, i).lower() in _ABBREVIATIONS:
                boundary = False
        if boundary:
            piece = text[start:j + 1].strip()
            if piece:
                sentences.append(piece)
            start = k
            i = k
        else:
            i = j + 1
    piece = text[start:].strip()
    if piece:
        sentences.append(piece)
    return sentences
