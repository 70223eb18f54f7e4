"""Corpus-scale counting shared by the CLI stages."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .freq import DEFAULT_SPILL_THRESHOLD, CountAccumulator, FrequencyTable, merge_tables, read_table, write_table
from .ingest import DocumentMeta, iter_document_tokens
from .profile import corpus_fingerprint

logger = logging.getLogger(__name__)


@dataclass
class CorpusCounts:
    table: FrequencyTable
    decades: dict[int, FrequencyTable]
    documents: list[tuple[str, int]]
    skipped: list = field(default_factory=list)

    @property
    def fingerprint(self) -> str:
        return corpus_fingerprint(self.documents)


def scan_corpus(metas: Sequence[DocumentMeta], year_range=None, *, keep_digits: bool = False,
                fold_case: bool = False, threads: int = 1, continue_on_error: bool = False,
                spill_threshold: Optional[int] = DEFAULT_SPILL_THRESHOLD, tmpdir=None) -> CorpusCounts:
    """Tokenize and count every selected document, per decade and overall."""
    accs: dict[int, CountAccumulator] = {}
    documents = []
    skipped: list = []
    for meta, tokens in iter_document_tokens(metas, year_range, keep_digits=keep_digits,
                                             continue_on_error=continue_on_error,
                                             skipped=skipped, threads=threads):
        acc = accs.get(meta.decade)
        if acc is None:
            acc = accs[meta.decade] = CountAccumulator(spill_threshold, tmpdir=tmpdir, fold_case=fold_case)
        acc.add(tokens)
        documents.append((meta.doc_id, meta.year))
    decades = {d: accs[d].finish(label=str(d)) for d in sorted(accs)}
    table = merge_tables(decades.values()) if decades else FrequencyTable()
    logger.info("counted %d tokens, %d types in %d documents", table.n_tokens, table.n_types, len(documents))
    return CorpusCounts(table, decades, documents, skipped)


def write_counts(counts: CorpusCounts, directory) -> list[Path]:
    """Overall table, one table per decade and the document list."""
    directory = Path(directory)
    (directory / "decades").mkdir(parents=True, exist_ok=True)
    paths = [directory / "table.tsv"]
    write_table(counts.table, paths[0])
    for decade, table in counts.decades.items():
        p = directory / "decades" / f"{decade}.tsv"
        write_table(table, p)
        paths.append(p)
    docs = directory / "documents.tsv"
    with open(docs, "w", encoding="utf-8", newline="\n") as f:
        for doc_id, year in counts.documents:
            f.write(f"{doc_id}\t{year}\n")
    paths.append(docs)
    return paths


def read_counts(directory) -> CorpusCounts:
    directory = Path(directory)
    table = read_table(directory / "table.tsv")
    decades = {}
    ddir = directory / "decades"
    if ddir.is_dir():
        for p in sorted(ddir.glob("*.tsv")):
            decades[int(p.stem)] = read_table(p, label=p.stem)
    documents = []
    docs = directory / "documents.tsv"
    if docs.exists():
        for line in docs.read_text(encoding="utf-8").splitlines():
            if line:
                doc_id, year = line.split("\t")
                documents.append((doc_id, int(year)))
    return CorpusCounts(table, dict(sorted(decades.items())), documents)
