"""Frequency tables, spectra, band slices and length statistics."""

from __future__ import annotations

import heapq
import logging
import os
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

from .errors import SchemaError
from .ingest import TokenRecord

logger = logging.getLogger(__name__)

TMPDIR_ENV = "LEXQUAL_TMPDIR"
DEFAULT_SPILL_THRESHOLD = 5_000_000


class FrequencyTable:
    """Immutable map from surface type to token count.

    Iteration and :meth:`ranked` follow the canonical order: count
    descending, then surface ascending.
    """

    __slots__ = ("_counts", "n_tokens", "n_types", "label", "_ranked")

    def __init__(self, counts: Mapping[str, int] = (), label=None):
        counts = dict(counts)
        total = 0
        for surface, c in counts.items():
            if not isinstance(c, int) or c < 1:
                raise ValueError(f"count for {surface!r} must be a positive integer, got {c!r}")
            total += c
        self._counts = counts
        self.n_tokens = total
        self.n_types = len(counts)
        self.label = label
        self._ranked = None

    @property
    def entries(self) -> Mapping[str, int]:
        return MappingProxyType(self._counts)

    def ranked(self) -> list[tuple[str, int]]:
        if self._ranked is None:
            self._ranked = sorted(self._counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return self._ranked

    def __len__(self):
        return self.n_types

    def __iter__(self):
        return (s for s, _ in self.ranked())

    def __contains__(self, surface):
        return surface in self._counts

    def __getitem__(self, surface) -> int:
        return self._counts[surface]

    def get(self, surface, default=0) -> int:
        return self._counts.get(surface, default)

    def items(self):
        return iter(self.ranked())

    def __eq__(self, other):
        if not isinstance(other, FrequencyTable):
            return NotImplemented
        return self._counts == other._counts

    __hash__ = None

    def __repr__(self):
        label = f" label={self.label!r}" if self.label is not None else ""
        return f"<FrequencyTable N={self.n_tokens} V={self.n_types}{label}>"

    def relabel(self, label) -> "FrequencyTable":
        t = FrequencyTable.__new__(FrequencyTable)
        t._counts, t.n_tokens, t.n_types, t._ranked = self._counts, self.n_tokens, self.n_types, self._ranked
        t.label = label
        return t


def _surfaces(tokens: Iterable) -> Iterator[str]:
    for tok in tokens:
        yield tok.surface if isinstance(tok, TokenRecord) else tok


def _spill_dir(tmpdir=None) -> str:
    return str(tmpdir or os.environ.get(TMPDIR_ENV) or tempfile.gettempdir())


class CountAccumulator:
    """Exact type counting with bounded memory.

    When the number of distinct in-memory types exceeds ``spill_threshold``
    the current counts are written out as a sorted run; :meth:`finish`
    merges all runs deterministically.
    """

    def __init__(self, spill_threshold: Optional[int] = DEFAULT_SPILL_THRESHOLD,
                 tmpdir=None, fold_case: bool = False, chunk_size: int = 100_000):
        if spill_threshold is not None and spill_threshold < 1:
            raise ValueError("spill_threshold must be >= 1")
        self.spill_threshold = spill_threshold
        self.fold_case = fold_case
        self.chunk_size = chunk_size
        self._tmpdir = tmpdir
        self._counter: Counter = Counter()
        self._runs: list[str] = []
        self._workdir: Optional[tempfile.TemporaryDirectory] = None

    @property
    def n_runs(self) -> int:
        return len(self._runs)

    def _maybe_spill(self):
        if self.spill_threshold is not None and len(self._counter) > self.spill_threshold:
            self._spill()

    def _spill(self):
        if self._workdir is None:
            self._workdir = tempfile.TemporaryDirectory(prefix="lexqual-", dir=_spill_dir(self._tmpdir))
        run = os.path.join(self._workdir.name, f"run{len(self._runs):05d}.tsv")
        with open(run, "w", encoding="utf-8", newline="\n") as f:
            for surface in sorted(self._counter):
                f.write(f"{surface}\t{self._counter[surface]}\n")
        logger.debug("spilled %d types to %s", len(self._counter), run)
        self._runs.append(run)
        self._counter = Counter()

    def add(self, tokens: Iterable) -> None:
        it = _surfaces(tokens)
        if self.fold_case:
            it = (s.lower() for s in it)
        if self.spill_threshold is None:
            self._counter.update(it)
            return
        chunk = []
        for s in it:
            chunk.append(s)
            if len(chunk) >= self.chunk_size:
                self._counter.update(chunk)
                chunk.clear()
                self._maybe_spill()
        self._counter.update(chunk)
        self._maybe_spill()

    def add_counts(self, counts: Mapping[str, int]) -> None:
        if self.fold_case:
            for s, c in counts.items():
                self._counter[s.lower()] += c
        else:
            self._counter.update(counts)
        self._maybe_spill()

    def _iter_run(self, path):
        with open(path, encoding="utf-8") as f:
            for line in f:
                surface, count = line.rstrip("\n").split("\t")
                yield surface, int(count)

    def iter_sorted(self) -> Iterator[tuple[str, int]]:
        """Merged ``(surface, count)`` pairs in surface order."""
        if not self._runs:
            for s in sorted(self._counter):
                yield s, self._counter[s]
            return
        if self._counter:
            self._spill()
        merged = heapq.merge(*(self._iter_run(r) for r in self._runs))
        current, total = None, 0
        for surface, count in merged:
            if surface == current:
                total += count
                continue
            if current is not None:
                yield current, total
            current, total = surface, count
        if current is not None:
            yield current, total

    def finish(self, label=None) -> FrequencyTable:
        try:
            if not self._runs:
                return FrequencyTable(self._counter, label=label)
            return FrequencyTable(dict(self.iter_sorted()), label=label)
        finally:
            self.close()

    def close(self):
        if self._workdir is not None:
            self._workdir.cleanup()
            self._workdir = None
        self._runs = []


def count_tokens(tokens: Iterable, *, spill_threshold: Optional[int] = DEFAULT_SPILL_THRESHOLD,
                 tmpdir=None, fold_case: bool = False, label=None) -> FrequencyTable:
    """Count surface forms (strings or TokenRecords) exactly."""
    acc = CountAccumulator(spill_threshold, tmpdir=tmpdir, fold_case=fold_case)
    acc.add(tokens)
    return acc.finish(label=label)


def merge_tables(tables: Iterable[FrequencyTable], label=None) -> FrequencyTable:
    merged: Counter = Counter()
    for t in tables:
        merged.update(t.entries)
    return FrequencyTable(merged, label=label)


def count_sharded(shards: Sequence[Iterable], *, workers: int = 1, **kwargs) -> FrequencyTable:
    """Count each shard independently, then merge; equals single-pass counting."""
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tables = list(pool.map(lambda s: count_tokens(s, **kwargs), shards))
    else:
        tables = [count_tokens(s, **kwargs) for s in shards]
    return merge_tables(tables)


def count_by_decade(records: Iterable[TokenRecord], **kwargs) -> dict[int, FrequencyTable]:
    buckets: dict[int, list[str]] = {}
    for r in records:
        buckets.setdefault(r.year // 10 * 10, []).append(r.surface)
    return {d: count_tokens(buckets[d], label=str(d), **kwargs) for d in sorted(buckets)}


# -- spectra ---------------------------------------------------------------

@dataclass(frozen=True)
class FrequencySpectrum:
    """``classes[m]`` is V(m, N): the number of types seen exactly m times."""

    classes: Mapping[int, int]

    @property
    def n_types(self) -> int:
        return sum(self.classes.values())

    @property
    def n_tokens(self) -> int:
        return sum(m * v for m, v in self.classes.items())

    def __getitem__(self, m: int) -> int:
        return self.classes.get(m, 0)

    def rows(self) -> list[tuple[int, int]]:
        return sorted(self.classes.items())


def spectrum(table: FrequencyTable) -> FrequencySpectrum:
    return FrequencySpectrum(dict(sorted(Counter(table.entries.values()).items())))


# -- band slices -----------------------------------------------------------

@dataclass(frozen=True)
class TopK:
    k: int

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError(f"top-K band needs K >= 1, got {self.k}")

    def __str__(self):
        return f"top-{self.k}"


@dataclass(frozen=True)
class FreqClass:
    m: int

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError(f"frequency class needs m >= 1, got {self.m}")

    def __str__(self):
        return f"class-{self.m}"


Selector = Union[TopK, FreqClass]


@dataclass(frozen=True)
class BandSlice:
    selector: Selector
    types: list[tuple[str, int]] = field(repr=False)
    token_mass: int
    n_tokens: int

    @property
    def coverage(self) -> Fraction:
        return Fraction(self.token_mass, self.n_tokens) if self.n_tokens else Fraction(0)

    @property
    def cutoff_count(self) -> Optional[int]:
        """Smallest count inside the slice."""
        return self.types[-1][1] if self.types else None

    def __len__(self):
        return len(self.types)


def select_band(table: FrequencyTable, selector: Selector) -> BandSlice:
    if isinstance(selector, int):
        selector = TopK(selector)
    if isinstance(selector, TopK):
        types = table.ranked()[: selector.k]
    elif isinstance(selector, FreqClass):
        types = [(s, c) for s, c in table.ranked() if c == selector.m]
    else:
        raise TypeError(f"unknown band selector {selector!r}")
    return BandSlice(selector, types, sum(c for _, c in types), table.n_tokens)


def frequency_classes(table: FrequencyTable, max_m: int) -> dict[int, list[tuple[str, int]]]:
    """All classes 1..max_m in one pass over the table."""
    out: dict[int, list] = {m: [] for m in range(1, max_m + 1)}
    for s, c in table.ranked():
        if c <= max_m:
            out[c].append((s, c))
    return out


# -- lengths ---------------------------------------------------------------

@dataclass(frozen=True)
class LengthStats:
    n_types: int
    mean_type_length: Fraction
    n_recognized: Optional[int] = None
    n_unrecognized: Optional[int] = None
    mean_recognized: Optional[Fraction] = None
    mean_unrecognized: Optional[Fraction] = None


def _mean(lengths: list[int]) -> Optional[Fraction]:
    return Fraction(sum(lengths), len(lengths)) if lengths else None


def length_stats(band: Union[BandSlice, Sequence], verdicts: Optional[Mapping] = None) -> LengthStats:
    """Unweighted mean surface length (in code points) over a slice's types.

    ``verdicts`` maps surfaces to a bool or to an object with a
    ``recognized`` attribute; when given, per-verdict means are added.
    """
    types = band.types if isinstance(band, BandSlice) else list(band)
    surfaces = [t[0] if isinstance(t, tuple) else t for t in types]
    if not surfaces:
        raise ValueError("length statistics need a non-empty slice")
    lengths = [len(s) for s in surfaces]
    if verdicts is None:
        return LengthStats(len(lengths), _mean(lengths))
    rec, unrec = [], []
    for s, n in zip(surfaces, lengths):
        v = verdicts[s]
        (rec if getattr(v, "recognized", v) else unrec).append(n)
    return LengthStats(len(lengths), _mean(lengths), len(rec), len(unrec), _mean(rec), _mean(unrec))


# -- files -----------------------------------------------------------------

def write_table(table: FrequencyTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"#N={table.n_tokens} V={table.n_types}\n")
        for surface, count in table.ranked():
            f.write(f"{surface}\t{count}\n")


def _parse_header(line: str, path) -> dict[str, int]:
    fields = {}
    for part in line[1:].split():
        key, _, value = part.partition("=")
        try:
            fields[key] = int(value)
        except ValueError:
            raise SchemaError(f"{path}: bad header field {part!r}") from None
    return fields


def read_table(path, label=None) -> FrequencyTable:
    counts: dict[str, int] = {}
    header = None
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if lineno == 1 and line.startswith("#"):
                header = _parse_header(line, path)
                continue
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise SchemaError(f"{path}:{lineno}: expected surface<TAB>count")
            surface, count = parts
            try:
                c = int(count)
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: count {count!r} is not an integer") from None
            if c < 1 or surface in counts:
                raise SchemaError(f"{path}:{lineno}: invalid or duplicate entry {surface!r}")
            counts[surface] = c
    table = FrequencyTable(counts, label=label)
    if header is None or "N" not in header or "V" not in header:
        raise SchemaError(f"{path}: missing '#N=<int> V=<int>' header")
    if header["N"] != table.n_tokens or header["V"] != table.n_types:
        raise SchemaError(f"{path}: header N={header['N']} V={header['V']} does not match "
                          f"contents N={table.n_tokens} V={table.n_types}")
    return table


def write_spectrum(spec: FrequencySpectrum, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("#m\tV_m\n")
        for m, v in spec.rows():
            f.write(f"{m}\t{v}\n")


def read_spectrum(path) -> FrequencySpectrum:
    classes = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            try:
                m, v = (int(x) for x in line.split("\t"))
            except ValueError:
                raise SchemaError(f"{path}:{lineno}: expected m<TAB>V_m integers") from None
            if m < 1 or v < 1 or m in classes:
                raise SchemaError(f"{path}:{lineno}: invalid spectrum row")
            classes[m] = v
    return FrequencySpectrum(dict(sorted(classes.items())))
