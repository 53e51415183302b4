"""Segmentation: fixture counts, oracle agreement, fuzz and properties."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cyclesynth.corpus import (
    CorpusError,
    RawDocument,
    classify_passage,
    load_documents,
    read_segmented,
    segment_corpus,
    split_paragraphs,
    write_segmented,
)

from fixture_corpus import (
    EXPECTED_ANSWERS,
    EXPECTED_QUESTIONS,
    fuzz_documents,
    oracle_role,
    oracle_split,
    twelve_documents,
)


def test_twelve_document_fixture_counts():
    corpus = segment_corpus(twelve_documents())
    assert corpus.n_questions == EXPECTED_QUESTIONS == 11
    assert corpus.n_answers == EXPECTED_ANSWERS == 9


def test_twelve_document_fixture_per_doc_counts():
    from fixture_corpus import TWELVE_DOCS

    for doc_id, text, (want_q, want_a) in TWELVE_DOCS:
        corpus = segment_corpus([RawDocument(doc_id=doc_id, text=text)])
        assert (corpus.n_questions, corpus.n_answers) == (want_q, want_a), doc_id


def test_split_matches_oracle_on_fixture():
    for doc in twelve_documents():
        got = [text for _id, text in split_paragraphs(doc)]
        assert got == oracle_split(doc.text), doc.doc_id


def test_roles_match_oracle_on_fixture():
    corpus = segment_corpus(twelve_documents())
    for passage in corpus.questions + corpus.answers:
        assert passage.role == oracle_role(passage.text), passage.passage_id


def test_fuzzed_documents_match_oracle():
    # The full 10,000-document sweep lives in the acceptance suite; this is
    # the fast regression slice with a different seed.
    for doc in fuzz_documents(1500, seed=99):
        got = [text for _id, text in split_paragraphs(doc)]
        assert got == oracle_split(doc.text), doc.doc_id


def test_passage_ids_are_unique_and_ordered():
    corpus = segment_corpus(twelve_documents())
    ids = [p.passage_id for p in corpus.questions + corpus.answers]
    assert len(ids) == len(set(ids))
    assert all("#" in pid for pid in ids)


def test_classify_rules():
    assert classify_passage("Anything with a ? inside") == "question"
    assert classify_passage("全角：结束了吗？") == "question"
    assert classify_passage("No marks here.") == "answer"
    with pytest.raises(CorpusError):
        classify_passage("")


def test_duplicate_doc_ids_rejected():
    docs = [RawDocument("same", "a"), RawDocument("same", "b")]
    with pytest.raises(CorpusError):
        segment_corpus(docs)


def test_stats_per_source():
    docs = [RawDocument("d1", "q?", source="s1"), RawDocument("d2", "a.", source="s1"),
            RawDocument("d3", "q2?", source="s2")]
    corpus = segment_corpus(docs)
    assert corpus.stats == {"s1": {"questions": 1, "answers": 1},
                            "s2": {"questions": 1, "answers": 0}}


@given(st.text(alphabet=st.sampled_from("ab?？ \t\n .x"), max_size=200))
@settings(max_examples=300, deadline=None)
def test_split_properties(text):
    doc = RawDocument("h", text)
    passages = split_paragraphs(doc)
    ids = [pid for pid, _ in passages]
    # ids unique and consecutive from zero
    assert ids == [f"h#{i:04d}" for i in range(len(passages))]
    nonblank_lines = sum(1 for line in text.split("\n") if line.strip())
    passage_lines = sum(len(p.split("\n")) for _, p in passages)
    # every non-blank input line lands in exactly one passage
    assert passage_lines == nonblank_lines
    for _, p in passages:
        assert p == p.strip() and p
    # oracle agreement on arbitrary text
    assert [p for _, p in passages] == oracle_split(text)


@given(st.text(min_size=1, max_size=100))
@settings(max_examples=300, deadline=None)
def test_role_soundness(text):
    if not text.strip():
        return
    role = classify_passage(text)
    has_mark = ("?" in text) or ("？" in text)
    assert role == ("question" if has_mark else "answer")


def test_jsonl_load_and_round_trip(tmp_path):
    from conftest import make_documents, write_documents_jsonl

    docs = make_documents(3, 2)
    path = write_documents_jsonl(tmp_path / "docs.jsonl", docs)
    loaded = load_documents(path)
    assert [d.doc_id for d in loaded] == [d.doc_id for d in docs]
    corpus = segment_corpus(loaded)
    out = tmp_path / "segmented.jsonl"
    write_segmented(corpus, out)
    back = read_segmented(out)
    assert [p.to_record() for p in back.questions] == [p.to_record() for p in corpus.questions]
    assert [p.to_record() for p in back.answers] == [p.to_record() for p in corpus.answers]
    assert back.stats == corpus.stats


def test_directory_loading(tmp_path):
    (tmp_path / "one.txt").write_text("Is this loaded?", encoding="utf-8")
    (tmp_path / "two.txt").write_text("It is loaded.", encoding="utf-8")
    docs = load_documents(tmp_path)
    assert [d.doc_id for d in docs] == ["one", "two"]
    corpus = segment_corpus(docs)
    assert corpus.n_questions == 1 and corpus.n_answers == 1


def test_empty_document_text_rejected(tmp_path):
    path = tmp_path / "docs.jsonl"
    path.write_text('{"doc_id": "d1", "text": "  "}\n', encoding="utf-8")
    with pytest.raises(CorpusError):
        load_documents(path)
