"""Synthetic lexicons, token streams and corpora for validation runs."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .ingest import DocumentMeta, write_manifest

FINNISH_LETTERS = "aaaaeeeiiiiooouuuyäääöklmnnnprsssttttvvhj"


def make_lexicon(n_forms: int, seed: int = 0, alphabet: str = FINNISH_LETTERS,
                 min_len: int = 3, max_len: int = 12) -> list[str]:
    """``n_forms`` distinct random words, in generation order."""
    rng = np.random.default_rng(seed)
    letters = np.array(list(alphabet))
    forms: dict[str, None] = {}
    while len(forms) < n_forms:
        need = n_forms - len(forms)
        lengths = rng.integers(min_len, max_len + 1, size=need * 2)
        picks = rng.integers(0, len(letters), size=int(lengths.sum()))
        pos = 0
        for n in lengths.tolist():
            forms.setdefault("".join(letters[picks[pos:pos + n]]), None)
            pos += n
            if len(forms) >= n_forms:
                break
    return list(forms)


def zipf_indices(n_types: int, n_tokens: int, exponent: float = 1.07, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    weights = 1.0 / np.arange(1, n_types + 1, dtype=np.float64) ** exponent
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    return np.minimum(np.searchsorted(cdf, rng.random(n_tokens), side="right"), n_types - 1)


def zipf_stream(forms: Sequence[str], n_tokens: int, exponent: float = 1.07, seed: int = 0) -> list[str]:
    arr = np.asarray(forms, dtype=object)
    return arr[zipf_indices(len(forms), n_tokens, exponent, seed)].tolist()


def uniform_stream(forms: Sequence[str], n_tokens: int, seed: int = 0) -> list[str]:
    rng = np.random.default_rng(seed)
    arr = np.asarray(forms, dtype=object)
    return arr[rng.integers(0, len(forms), size=n_tokens)].tolist()


def random_counts(seed: int, kind: str = "zipf", max_types: int = 2000) -> dict[str, int]:
    """A random frequency table for property tests."""
    rng = np.random.default_rng(seed)
    v = int(rng.integers(0, max_types + 1))
    if kind == "zipf":
        counts = rng.zipf(1.3 + rng.random(), size=v)
        counts = np.minimum(counts, 10**9)
    else:
        counts = rng.integers(1, int(rng.integers(2, 200)) + 1, size=v)
    return {f"w{i}": int(c) for i, c in enumerate(counts.tolist())}


def write_corpus(directory, tokens: Sequence[str], n_docs: int = 10,
                 years: Optional[Sequence[int]] = None, words_per_line: int = 12,
                 seed: int = 0) -> Path:
    """Spread ``tokens`` over ``n_docs`` text files plus a manifest.

    Punctuation and numbers are sprinkled in; tokenizing the files yields
    exactly ``tokens`` again.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    if years is None:
        years = [1851 + (i * 59) // max(1, n_docs - 1) for i in range(n_docs)]
    bounds = np.linspace(0, len(tokens), n_docs + 1).astype(int)
    metas = []
    puncts = np.array([" ", " ", " ", " ", ", ", ". ", " 1851 ", "; "], dtype=object)
    for d in range(n_docs):
        chunk = tokens[bounds[d]:bounds[d + 1]]
        seps = puncts[rng.integers(0, len(puncts), size=len(chunk))]
        lines = []
        for start in range(0, len(chunk), words_per_line):
            words = chunk[start:start + words_per_line]
            sep = seps[start:start + words_per_line]
            lines.append("".join(w + s for w, s in zip(words, sep)).rstrip())
        name = f"doc{d:04d}.txt"
        (directory / name).write_text("\n".join(lines) + "\n", encoding="utf-8")
        metas.append(DocumentMeta(f"doc{d:04d}", Path(name), int(years[d])))
    manifest = directory / "manifest.tsv"
    write_manifest(metas, manifest)
    return manifest
