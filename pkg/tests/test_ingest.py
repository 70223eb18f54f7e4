import unicodedata

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexqual.errors import IngestError
from lexqual.ingest import (
    DocumentMeta,
    decode_text,
    ingest_corpus,
    iter_document_tokens,
    load_manifest,
    read_token_dump,
    tokenize,
    write_manifest,
    write_token_dump,
)


@pytest.mark.parametrize("text, expected", [
    ("", []),
    ("Wien, kaupunki. 1851", ["Wien", "kaupunki"]),
    ("ylös-kannetaan ja", ["ylös-kannetaan", "ja"]),
    ("a -b c- d--e", ["a", "b", "c", "d", "e"]),
    ("Suomen-maa-ssa!", ["Suomen-maa-ssa"]),
    ("ei'kä", ["ei", "kä"]),
    ("x 1 y", ["x", "y"]),
    ("Åbo\tÄänekoski\nöljy", ["Åbo", "Äänekoski", "öljy"]),
])
def test_tokenize_examples(text, expected):
    assert tokenize(text) == expected


def test_keep_digits():
    assert tokenize("vuonna 1851 Wien", keep_digits=True) == ["vuonna", "1851", "Wien"]
    assert tokenize("vuonna 1851 Wien") == ["vuonna", "Wien"]


def test_combining_marks_stay_attached():
    nfd = unicodedata.normalize("NFD", "Äänekoski")
    assert tokenize(nfd) == [nfd]


def _valid_surface(s):
    if not s or s[0] == "-" or s[-1] == "-" or "--" in s:
        return False
    for part in s.split("-"):
        if not unicodedata.category(part[0]).startswith("L"):
            return False
        if not all(unicodedata.category(c)[0] in "LM" for c in part):
            return False
    return True


text_st = st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cn")), max_size=200)


@settings(max_examples=300)
@given(text_st)
def test_surfaces_respect_character_class(text):
    for tok in tokenize(text):
        assert _valid_surface(tok), tok


@settings(max_examples=300)
@given(text_st, text_st)
def test_concatenation_compatible(a, b):
    assert tokenize(a + " " + b) == tokenize(a) + tokenize(b)


@given(text_st)
def test_deterministic(text):
    assert tokenize(text) == tokenize(text)


def test_invalid_utf8_reports_offset():
    with pytest.raises(IngestError) as info:
        decode_text(b"abc\xffdef", path="x.txt", doc_id="d1")
    assert info.value.offset == 3
    assert "d1" in str(info.value) and "3" in str(info.value)


def _manifest(tmp_path, body):
    p = tmp_path / "manifest.tsv"
    p.write_text(body, encoding="utf-8")
    return p


def test_manifest_two_lines(tmp_path):
    p = _manifest(tmp_path, "# id\tpath\tyear\na\ta.txt\t1851\nb\tsub/b.txt\t1905\tfi\n")
    metas = load_manifest(p)
    assert [(m.doc_id, m.year, m.language_tag) for m in metas] == [("a", 1851, None), ("b", 1905, "fi")]
    assert metas[1].path == tmp_path / "sub" / "b.txt"
    assert metas[0].decade == 1850


def test_manifest_empty(tmp_path):
    assert load_manifest(_manifest(tmp_path, "")) == []


@pytest.mark.parametrize("body, line", [
    ("a\ta.txt\t1851\nb\tb.txt\t18S1\n", 2),
    ("a\ta.txt\n", 1),
    ("a\ta.txt\t1851\na\tb.txt\t1852\n", 2),
    ("#c\na\ta.txt\t999\n", 2),
    ("a\ta.txt\t1_851\n", 1),
    ("a\ta.txt\t1851\tfi\textra\n", 1),
])
def test_manifest_errors_carry_line(tmp_path, body, line):
    with pytest.raises(IngestError) as info:
        load_manifest(_manifest(tmp_path, body))
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_manifest_missing(tmp_path):
    with pytest.raises(IngestError):
        load_manifest(tmp_path / "nope.tsv")


def test_manifest_round_trip(tmp_path):
    metas = [DocumentMeta("a", tmp_path / "a.txt", 1851), DocumentMeta("b", tmp_path / "b.txt", 1900, "sv")]
    write_manifest(metas, tmp_path / "m.tsv")
    assert load_manifest(tmp_path / "m.tsv") == metas


def test_document_meta_year_bounds():
    with pytest.raises(ValueError):
        DocumentMeta("a", "a.txt", 2101)


@pytest.fixture
def two_docs(tmp_path):
    (tmp_path / "old.txt").write_text("Suomen kansa, 1849.\nvanha teksti", encoding="utf-8")
    (tmp_path / "new.txt").write_text("yksi kaksi kolme neljä viisi kuusi seitsemän kahdeksan yhdeksän kymmenen\n",
                                      encoding="utf-8")
    return load_manifest(_manifest(tmp_path, "old\told.txt\t1849\nnew\tnew.txt\t1860\n"))


def test_year_filter(two_docs):
    recs = list(ingest_corpus(two_docs, (1851, 1910)))
    assert len(recs) == 10
    assert {(r.doc_id, r.year) for r in recs} == {("new", 1860)}


def test_no_range_keeps_all_in_order(two_docs):
    recs = list(ingest_corpus(two_docs))
    assert [r.surface for r in recs[:4]] == ["Suomen", "kansa", "vanha", "teksti"]
    assert len(recs) == 14


def test_token_count_is_sum_of_documents(tmp_path):
    metas = []
    total = 0
    for i in range(12):
        text = " ".join(f"sana{j}x" for j in range(i * 7)) + " loppu."
        (tmp_path / f"d{i}.txt").write_text(text, encoding="utf-8")
        metas.append(DocumentMeta(f"d{i}", tmp_path / f"d{i}.txt", 1851 + i))
        total += len(tokenize(text))
    assert sum(1 for _ in ingest_corpus(metas)) == total
    one = [r.surface for r in ingest_corpus(metas)]
    many = [r.surface for r in ingest_corpus(metas, threads=4)]
    assert one == many


def test_unreadable_doc(tmp_path, two_docs):
    missing = DocumentMeta("ghost", tmp_path / "ghost.txt", 1870)
    metas = two_docs + [missing]
    with pytest.raises(IngestError, match="ghost"):
        list(ingest_corpus(metas))
    skipped = []
    recs = list(ingest_corpus(metas, continue_on_error=True, skipped=skipped))
    assert len(recs) == 14
    assert skipped[0][0] == "ghost"


def test_bad_bytes_in_document(tmp_path):
    (tmp_path / "bad.txt").write_bytes("sana ".encode() + b"\xc3\x28")
    meta = DocumentMeta("bad", tmp_path / "bad.txt", 1870)
    with pytest.raises(IngestError) as info:
        list(iter_document_tokens([meta]))
    assert info.value.offset == 5


def test_token_dump_round_trip(tmp_path):
    toks = ["Wien", "ylös-kannetaan", "ä"]
    assert write_token_dump(toks, tmp_path / "t.txt") == 3
    assert read_token_dump(tmp_path / "t.txt") == toks
