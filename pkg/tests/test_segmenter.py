import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from reqharvest.segmenter import (ABBREVIATIONS, Block, BlockKind, extract_blocks, flatten_list,
                                  segment, split_sentences)

FIXTURES = Path(__file__).parent / "fixtures" / "segmentation"
EXPECTED = json.loads((FIXTURES / "expected.json").read_text(encoding="utf-8"))


def test_single_paragraph_block():
    blocks = extract_blocks("The system shall log in users.\n")
    assert [b.kind for b in blocks] == [BlockKind.PARAGRAPH]
    assert blocks[0].items == ()


def test_list_block_with_lead():
    (block,) = extract_blocks("The system shall support:\n- login\n- logout\n")
    assert block.kind is BlockKind.LIST
    assert block.lead_text == "The system shall support:"
    assert block.items == ("login", "logout")


def test_paragraph_then_indented_numbered_list():
    text = "Some context here.\n  1. a\n  2. b"
    blocks = extract_blocks(text)
    assert [b.kind for b in blocks] == [BlockKind.PARAGRAPH, BlockKind.LIST]
    assert blocks[1].items == ("a", "b")
    assert blocks[1].lead_text == ""


def test_block_spans_are_ordered_and_in_bounds():
    text = (FIXTURES / "16_lead_after_sentence.txt").read_text() + "\n" + \
        (FIXTURES / "14_wrapped_paragraphs.txt").read_text()
    blocks = extract_blocks(text)
    previous = 0
    for block in blocks:
        start, end = block.raw_span
        assert 0 <= start <= end <= len(text)
        assert start >= previous
        previous = start
    assert text[blocks[1].raw_span[0]:].startswith("The system shall support:")


def test_blocks_cover_all_content():
    text = (FIXTURES / "19_two_lists.txt").read_text() + "\nTrailing words here.\n"
    blocks = extract_blocks(text)
    covered = set()
    for b in blocks:
        covered.update(range(*b.raw_span))
    assert all(i in covered for i, ch in enumerate(text) if not ch.isspace())


def test_flatten_fragments():
    block = Block(BlockKind.LIST, lead_text="The system shall support:", items=("login", "logout"))
    assert flatten_list(block) == ["The system shall support login, logout"]


def test_flatten_sentence_items():
    block = Block(BlockKind.LIST, lead_text="Constraints:",
                  items=("It must run offline.", "It must encrypt data."))
    assert flatten_list(block) == ["It must run offline.", "It must encrypt data."]


def test_flatten_single_item():
    block = Block(BlockKind.LIST, lead_text="Records shall keep:", items=("audit trail",))
    assert flatten_list(block) == ["Records shall keep audit trail"]


def test_flatten_leadless():
    block = Block(BlockKind.LIST, items=("a", "b", "c"))
    assert flatten_list(block) == ["a, b, c"]


def test_flatten_rejects_paragraph():
    with pytest.raises(ValueError):
        flatten_list(Block(BlockKind.PARAGRAPH, text="x"))


@pytest.mark.parametrize("text, expected", [
    ("A shall B. C shall D.", ["A shall B.", "C shall D."]),
    ("See Fig. 3 for details.", ["See Fig. 3 for details."]),
    ("", []),
    ("   ", []),
    ("It costs 3.50 euros. Pay now.", ["It costs 3.50 euros.", "Pay now."]),
    ("Step one. 2 more steps follow.", ["Step one.", "2 more steps follow."]),
    ("No terminal punctuation", ["No terminal punctuation"]),
    ("He said \"Stop.\" Then left.", ["He said \"Stop.\"", "Then left."]),
    ("Why? Because.", ["Why?", "Because."]),
    ("lowercase after. stays together", ["lowercase after. stays together"]),
])
def test_split_sentences(text, expected):
    assert split_sentences(text) == expected


@pytest.mark.parametrize("abbrev", sorted(ABBREVIATIONS))
def test_every_protected_abbreviation_holds(abbrev):
    # oracle: a capitalized word after each protected abbreviation must not split
    text = f"Refer to item {abbrev} Alpha for the rest."
    assert split_sentences(text) == [text]


def test_segment_ids_and_composition():
    assert segment("", "doc") == []
    units = segment("First one here. Second one here.", "doc")
    assert [u.id for u in units] == ["doc#0", "doc#1"]
    assert all(u.label is None and u.doc_id == "doc" for u in units)

    text = "Intro paragraph text.\n\nThe system shall provide:\n- search\n- export\n- print\n"
    units = segment(text, "d")
    assert [u.text for u in units] == ["Intro paragraph text.", "The system shall provide search, export, print"]


def test_segment_requires_doc_id():
    with pytest.raises(ValueError):
        segment("Text.", "")


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_fixture_documents(name):
    text = (FIXTURES / f"{name}.txt").read_text(encoding="utf-8")
    assert [u.text for u in segment(text, name)] == EXPECTED[name]


words = st.sampled_from(["The", "system", "shall", "log", "data", "e.g.", "Fig.", "3.5", "users",
                         "It", "must", "work", "etc.", "No.", "5"])
sentence_text = st.lists(words, min_size=1, max_size=12).map(" ".join).map(lambda s: s + ".")
paragraphs = st.lists(sentence_text, min_size=1, max_size=5).map(" ".join)


@settings(max_examples=200, deadline=None)
@given(paragraphs)
def test_split_is_idempotent(text):
    for sentence in split_sentences(text):
        assert split_sentences(sentence) == [sentence]


item = st.text(alphabet="abcdefgh ", min_size=1, max_size=12).filter(lambda s: s.strip())


@settings(max_examples=100, deadline=None)
@given(st.lists(item, min_size=1, max_size=6), st.sampled_from(["", "The system shall support:"]),
       st.sampled_from(["-", "*", "•", "1.", "a)"]))
def test_flattened_text_only_adds_separators(items, lead, marker):
    body = "\n".join(f"{marker} {it}" for it in items)
    text = f"{lead}\n{body}\n" if lead else body + "\n"
    units = segment(text, "p")
    assert len(units) == 1
    # removing inserted separators leaves exactly the source words
    source_words = (lead.rstrip(":").split() if lead else []) + [w for it in items for w in it.split()]
    assert units[0].text.replace(",", " ").split() == source_words


@settings(max_examples=50, deadline=None)
@given(st.lists(st.one_of(paragraphs, st.lists(item, min_size=1, max_size=3).map(
    lambda its: "\n".join(f"- {i}" for i in its))), max_size=6))
def test_unit_ids_strictly_increasing(chunks):
    units = segment("\n\n".join(chunks), "doc")
    numbers = [int(u.id.split("#")[1]) for u in units]
    assert numbers == list(range(len(units)))
