"""Corpus ingestion: manifests, decoding and tokenization."""

from __future__ import annotations

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import regex

from .errors import IngestError

logger = logging.getLogger(__name__)

YEAR_MIN, YEAR_MAX = 1000, 2100

# A word is a run of letters (combining marks ride along with their base
# letter); single hyphens survive only between two letter runs.
_LETTER_RUN = r"\p{L}[\p{L}\p{M}]*"
_ALNUM_RUN = r"[\p{L}\p{Nd}][\p{L}\p{M}\p{Nd}]*"
TOKEN_RE = regex.compile(rf"{_LETTER_RUN}(?:-{_LETTER_RUN})*")
TOKEN_DIGITS_RE = regex.compile(rf"{_ALNUM_RUN}(?:-{_ALNUM_RUN})*")
_YEAR_TEXT = regex.compile(r"-?[0-9]+")


@dataclass(frozen=True)
class DocumentMeta:
    doc_id: str
    path: Path
    year: int
    language_tag: Optional[str] = None

    def __post_init__(self):
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")
        if not str(self.path):
            raise ValueError("path must be non-empty")
        if not YEAR_MIN <= self.year <= YEAR_MAX:
            raise ValueError(f"year {self.year} outside [{YEAR_MIN}, {YEAR_MAX}]")

    @property
    def decade(self) -> int:
        return self.year // 10 * 10


@dataclass(frozen=True, slots=True)
class TokenRecord:
    surface: str
    doc_id: str
    year: int


def tokenize(text: str, keep_digits: bool = False) -> list[str]:
    """Split text into surface word forms, preserving case and order.

    >>> tokenize("Wien, kaupunki. 1851")
    ['Wien', 'kaupunki']
    >>> tokenize("ylös-kannetaan ja")
    ['ylös-kannetaan', 'ja']
    """
    pattern = TOKEN_DIGITS_RE if keep_digits else TOKEN_RE
    return pattern.findall(text, concurrent=True)


def decode_text(data: bytes, path=None, doc_id=None) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise IngestError(
            f"invalid UTF-8 byte sequence ({exc.reason})",
            path=path, offset=exc.start, doc_id=doc_id,
        ) from None


def load_manifest(path) -> list[DocumentMeta]:
    """Parse a ``doc_id<TAB>path<TAB>year[<TAB>language_tag]`` manifest.

    Relative document paths are resolved against the manifest's directory.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IngestError(f"cannot read manifest: {exc.strerror}", path=path) from None
    text = decode_text(raw, path=path)

    metas: list[DocumentMeta] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) not in (3, 4):
            raise IngestError(f"expected 3 or 4 tab-separated columns, got {len(cols)}",
                              path=path, line=lineno)
        doc_id, doc_path, year_text = cols[0], cols[1], cols[2]
        lang = cols[3] if len(cols) == 4 and cols[3] else None
        if not _YEAR_TEXT.fullmatch(year_text):
            raise IngestError(f"year {year_text!r} is not an integer", path=path, line=lineno)
        year = int(year_text)
        if doc_id in seen:
            raise IngestError(f"duplicate doc_id {doc_id!r}", path=path, line=lineno)
        doc_file = Path(doc_path)
        if not doc_file.is_absolute():
            doc_file = path.parent / doc_file
        try:
            meta = DocumentMeta(doc_id, doc_file, year, lang)
        except ValueError as exc:
            raise IngestError(str(exc), path=path, line=lineno) from None
        seen.add(doc_id)
        metas.append(meta)
    return metas


def write_manifest(metas: Iterable[DocumentMeta], path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for m in metas:
            cols = [m.doc_id, str(m.path), str(m.year)]
            if m.language_tag:
                cols.append(m.language_tag)
            f.write("\t".join(cols) + "\n")


def select_documents(metas: Sequence[DocumentMeta], year_range=None) -> list[DocumentMeta]:
    if year_range is None:
        return list(metas)
    lo, hi = year_range
    return [m for m in metas if lo <= m.year <= hi]


def read_document(meta: DocumentMeta, keep_digits: bool = False) -> list[str]:
    try:
        raw = Path(meta.path).read_bytes()
    except OSError as exc:
        raise IngestError(f"cannot read document: {exc.strerror}",
                          path=meta.path, doc_id=meta.doc_id) from None
    return tokenize(decode_text(raw, path=meta.path, doc_id=meta.doc_id), keep_digits)


def _bounded_map(pool, fn, items, window):
    """Ordered ``pool.map`` keeping at most ``window`` documents in flight."""
    pending = deque()
    for item in items:
        pending.append(pool.submit(fn, item))
        if len(pending) >= window:
            yield pending.popleft().result()
    while pending:
        yield pending.popleft().result()


def iter_document_tokens(
    metas: Sequence[DocumentMeta],
    year_range=None,
    *,
    keep_digits: bool = False,
    continue_on_error: bool = False,
    skipped: Optional[list] = None,
    threads: int = 1,
) -> Iterator[tuple[DocumentMeta, list[str]]]:
    """Yield ``(meta, tokens)`` per selected document, in manifest order.

    With ``threads > 1`` documents are tokenized concurrently but still
    yielded in manifest order.
    """
    docs = select_documents(metas, year_range)

    def work(meta):
        try:
            return meta, read_document(meta, keep_digits), None
        except IngestError as exc:
            return meta, None, exc

    if threads > 1:
        pool = ThreadPoolExecutor(max_workers=threads)
        results = _bounded_map(pool, work, docs, window=threads * 4)
    else:
        pool = None
        results = map(work, docs)
    try:
        for meta, tokens, exc in results:
            if exc is not None:
                if not continue_on_error:
                    raise exc
                logger.warning("skipping %s: %s", meta.doc_id, exc)
                if skipped is not None:
                    skipped.append((meta.doc_id, str(exc)))
                continue
            yield meta, tokens
    finally:
        if pool is not None:
            pool.shutdown(wait=True, cancel_futures=True)


def ingest_corpus(metas: Sequence[DocumentMeta], year_range=None, **kwargs) -> Iterator[TokenRecord]:
    """Stream year-tagged tokens for every document inside ``year_range``."""
    for meta, tokens in iter_document_tokens(metas, year_range, **kwargs):
        for surface in tokens:
            yield TokenRecord(surface, meta.doc_id, meta.year)


def write_token_dump(surfaces: Iterable, path) -> int:
    """Write one surface form per line; returns the number of lines."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for tok in surfaces:
            f.write((tok.surface if isinstance(tok, TokenRecord) else tok) + "\n")
            n += 1
    return n


def read_token_dump(path) -> list[str]:
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f if line != "\n"]
