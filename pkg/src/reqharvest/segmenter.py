"""Rule-based segmentation of plain-text documents into sentence units.

Lists are collapsed the way annotators collapsed them: fragment items become
one comma-joined sentence hanging off the list's lead line, while items that
are already full sentences stay separate.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

from .corpus import SentenceUnit

ABBREVIATIONS = frozenset({
    "e.g.", "i.e.", "etc.", "fig.", "figs.", "no.", "nos.", "vs.", "cf.", "al.",
    "approx.", "eq.", "sec.", "ch.", "vol.", "p.", "pp.", "ref.", "refs.",
    "mr.", "mrs.", "ms.", "dr.", "prof.", "inc.", "ltd.", "co.", "corp.",
    "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.", "sept.",
    "oct.", "nov.", "dec.", "min.", "max.", "resp.", "incl.", "e.t.c.",
})

TERMINALS = ".!?"

# a bullet or an enumerator ("1.", "1.2)", "a)") followed by whitespace
_MARKER = re.compile(r"^(?P<indent>[ \t]*)(?:[-*•]|\d+(?:\.\d+)*[.)]|[A-Za-z][.)])[ \t]+(?P<body>\S.*)$")
# terminal punctuation, optional closing quotes/brackets, then whitespace
_BOUNDARY = re.compile(r"[.!?]+[\"'”’)\]]*(?=\s)")
_CLOSERS = "\"'”’)]"
_CONJUNCTION = re.compile(r"\b(?:and|or)$", re.IGNORECASE)


class BlockKind(str, enum.Enum):
    PARAGRAPH = "paragraph"
    LIST = "list"


@dataclass(frozen=True)
class Block:
    kind: BlockKind
    text: str = ""
    lead_text: str = ""
    items: tuple[str, ...] = field(default_factory=tuple)
    raw_span: tuple[int, int] = (0, 0)


def _is_boundary(text: str, end: int) -> bool:
    """Whether a terminal punctuation run ending at `end` closes a sentence."""
    rest = text[end:].lstrip()
    if rest and not (rest[0].isupper() or rest[0].isdigit() or rest[0] in "\"'(“‘["):
        return False
    start = text.rfind(" ", 0, end) + 1
    token = text[start:end].lstrip("(\"'[“‘").rstrip(_CLOSERS).lower()
    return token not in ABBREVIATIONS


def split_sentences(paragraph_text: str) -> list[str]:
    """Split a paragraph on terminal punctuation followed by a capital, a digit or the end.

    >>> split_sentences("A shall B. C shall D.")
    ['A shall B.', 'C shall D.']
    >>> split_sentences("See Fig. 3 for details.")
    ['See Fig. 3 for details.']
    """
    text = " ".join(paragraph_text.split())
    sentences = []
    start = 0
    for match in _BOUNDARY.finditer(text):
        if _is_boundary(text, match.end()):
            sentences.append(text[start:match.end()].strip())
            start = match.end()
    sentences.append(text[start:].strip())
    return [s for s in sentences if s]


@dataclass
class _Line:
    start: int        # source offset of the first non-blank character
    end: int          # source offset just past the last non-blank character
    indent: int
    text: str         # whitespace-normalized content (marker removed for items)
    is_item: bool


def _scan_lines(document_text: str) -> list[_Line | None]:
    """One entry per source line; None marks a blank line."""
    lines: list[_Line | None] = []
    offset = 0
    for raw in document_text.splitlines(keepends=True):
        line = raw.rstrip("\r\n")
        content = line.strip()
        if not content:
            lines.append(None)
        else:
            lstripped = line.lstrip()
            start = offset + len(line) - len(lstripped)
            end = offset + len(line.rstrip())
            indent = len(line.expandtabs(4)) - len(line.expandtabs(4).lstrip())
            marker = _MARKER.match(line)
            if marker:
                lines.append(_Line(start, end, indent, " ".join(marker.group("body").split()), True))
            else:
                lines.append(_Line(start, end, indent, " ".join(content.split()), False))
        offset += len(raw)
    return lines


def _split_lead(para: list[_Line]) -> tuple[str, int, str]:
    """Split a colon-terminated paragraph into (remaining text, lead offset, lead)."""
    joined = " ".join(line.text for line in para)
    lead = split_sentences(joined)[-1]
    pos = len(joined) - len(lead)
    # map the lead's position in the joined text back to a source offset
    cursor = 0
    lead_start = para[0].start
    for line in para:
        if pos <= cursor + len(line.text):
            lead_start = min(line.start + (pos - cursor), line.end)
            break
        cursor += len(line.text) + 1
    return joined[:pos].rstrip(), lead_start, lead


def extract_blocks(document_text: str) -> list[Block]:
    """Group a document's lines into paragraph and list blocks.

    A run of bullet or enumerated lines is one list block. When the text just
    before the run ends with a colon, its last sentence becomes the list's
    lead and leaves the paragraph. Deeper-indented unmarked lines continue the
    previous item; nested items join the same sequence in reading order.
    """
    blocks: list[Block] = []
    para: list[_Line] = []
    items: list[str] = []
    item_indent = 0
    lead, list_start, list_end = "", 0, 0
    after_blank = False

    def flush_paragraph():
        if para:
            text = " ".join(line.text for line in para)
            blocks.append(Block(BlockKind.PARAGRAPH, text, raw_span=(para[0].start, para[-1].end)))
            para.clear()

    def flush_list():
        nonlocal lead
        if items:
            blocks.append(Block(BlockKind.LIST, "", lead, tuple(items), (list_start, list_end)))
            items.clear()
            lead = ""

    for line in _scan_lines(document_text):
        if line is None:
            after_blank = True
            continue
        if line.is_item:
            if not items:
                list_start = line.start
                if para and para[-1].text.endswith(":"):
                    remaining, list_start, lead = _split_lead(para)
                    if remaining:
                        blocks.append(Block(BlockKind.PARAGRAPH, remaining, raw_span=(para[0].start, list_start)))
                    para.clear()
                flush_paragraph()
            items.append(line.text)
            item_indent = line.indent
            list_end = line.end
        elif items and not after_blank and line.indent > item_indent:
            items[-1] = f"{items[-1]} {line.text}"
            list_end = line.end
        else:
            flush_list()
            if after_blank:
                flush_paragraph()
            para.append(line)
        after_blank = False
    flush_list()
    flush_paragraph()
    return blocks


def _is_full_sentence(item: str) -> bool:
    return item.rstrip(_CLOSERS).endswith(tuple(TERMINALS))


def flatten_list(block: Block) -> list[str]:
    """Turn a list block into sentences.

    Items that all end in terminal punctuation are kept one per sentence;
    otherwise the items are comma-joined behind the lead with its colon
    removed, so ``"The system shall support:"`` with ``login`` and ``logout``
    becomes ``"The system shall support login, logout"``.
    """
    if block.kind is not BlockKind.LIST:
        raise ValueError("flatten_list expects a list block")
    items = [item for item in block.items if item]
    if items and all(_is_full_sentence(item) for item in items):
        return list(items)
    # separators the source already put at item ends would double up
    parts = [item.rstrip(",;") if i < len(items) - 1 else item for i, item in enumerate(items)]
    parts = [part[:-1].rstrip() if part.endswith(":") else part for part in parts]
    parts = [p for p in parts if p]
    # an item ending in a conjunction already links to the next one
    body = "".join(
        part + ("" if i == len(parts) - 1 else " " if _CONJUNCTION.search(part) else ", ")
        for i, part in enumerate(parts)
    )
    lead = block.lead_text.rstrip()
    if lead.endswith(":"):
        lead = lead[:-1].rstrip()
    return [f"{lead} {body}" if lead else body] if body or lead else []


def _has_alpha(text: str) -> bool:
    return any(ch.isalpha() for ch in text)


def segment(document_text: str, doc_id: str) -> list[SentenceUnit]:
    """Segment a document into unlabeled units with ids ``<doc_id>#<n>``.

    Sentences without any letter (stray numbering, rulers) are dropped.
    """
    if not doc_id:
        raise ValueError("doc_id must be non-empty")
    sentences: list[str] = []
    for block in extract_blocks(document_text):
        if block.kind is BlockKind.LIST:
            sentences.extend(flatten_list(block))
        else:
            sentences.extend(split_sentences(block.text))
    sentences = [s for s in sentences if _has_alpha(s)]
    return [SentenceUnit(f"{doc_id}#{n}", doc_id, text) for n, text in enumerate(sentences)]
