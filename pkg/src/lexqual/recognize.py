"""Word recognition chain.

A word type is "known" when one of the stages below accepts it, tried in
this fixed order: exact lexicon lookup, lowercase fold of an
initial-uppercase word, suffix-replacement rules, w->v normalization
(re-running the first three stages on the normalized form), and finally an
optional external analyzer reached over a line protocol.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import queue
import shlex
import subprocess
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .errors import (
    AdapterCrashError,
    AdapterTimeoutError,
    ConfigError,
    CountMismatchError,
    MalformedReplyError,
)
from .freq import FrequencyTable

logger = logging.getLogger(__name__)

_WV = str.maketrans({"w": "v", "W": "V"})


def normalize_wv(word: str) -> str:
    """Replace every w/W with v/V; nothing else changes."""
    return word.translate(_WV)


class Stage(str, Enum):
    EXACT = "exact"
    CASE_VARIANT = "case_variant"
    AFFIX = "affix"
    WV_NORMALIZED = "wv_normalized"
    EXTERNAL = "external"
    NONE = "none"


STAGE_ORDER = tuple(Stage)


@dataclass(frozen=True, slots=True)
class Verdict:
    recognized: bool
    stage: Stage
    normalized_form: Optional[str] = None

    def __post_init__(self):
        if self.recognized == (self.stage is Stage.NONE):
            raise ValueError("stage must be 'none' exactly when the word is unrecognized")
        if (self.normalized_form is not None) != (self.stage is Stage.WV_NORMALIZED):
            raise ValueError("normalized_form is set only for wv_normalized verdicts")


_SHARED = {s: Verdict(s is not Stage.NONE, s) for s in Stage if s is not Stage.WV_NORMALIZED}
UNRECOGNIZED = _SHARED[Stage.NONE]


# -- resources -------------------------------------------------------------

def _read_lines(path) -> Iterable[tuple[int, str]]:
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n").rstrip("\r")
            if line.strip() and not line.startswith("#"):
                yield lineno, line


@dataclass(frozen=True)
class Lexicon:
    forms: frozenset
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "forms", frozenset(self.forms))
        for f in self.forms:
            if not f or any(ch.isspace() for ch in f):
                raise ValueError(f"invalid lexicon entry {f!r}")

    @classmethod
    def from_file(cls, path) -> "Lexicon":
        forms = set()
        for lineno, line in _read_lines(path):
            form = line.strip()
            if any(ch.isspace() for ch in form):
                raise ConfigError(f"{path}:{lineno}: lexicon entry contains whitespace")
            forms.add(form)
        return cls(frozenset(forms), source=str(path))

    def __contains__(self, word) -> bool:
        return word in self.forms

    def __len__(self):
        return len(self.forms)

    @cached_property
    def digest(self) -> str:
        h = hashlib.sha256()
        for f in sorted(self.forms):
            h.update(f.encode("utf-8") + b"\n")
        return h.hexdigest()

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for form in sorted(self.forms):
                f.write(form + "\n")


@dataclass(frozen=True)
class AffixRuleSet:
    """Ordered suffix replacements ``(strip, add)``."""

    rules: tuple
    max_applications: int = 1

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(tuple(r) for r in self.rules))
        if self.max_applications < 1:
            raise ValueError("max_applications must be >= 1")
        for strip, add in self.rules:
            if not strip:
                raise ValueError("affix rule needs a non-empty strip suffix")
            if strip == add:
                raise ValueError(f"affix rule ({strip!r}, {add!r}) is an identity")

    @classmethod
    def from_file(cls, path, max_applications: int = 1) -> "AffixRuleSet":
        rules = []
        for lineno, line in _read_lines(path):
            parts = line.split("\t")
            if len(parts) == 1:
                parts.append("")
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: expected strip<TAB>add")
            rules.append((parts[0], parts[1]))
        try:
            return cls(tuple(rules), max_applications)
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class AdapterConfig:
    command: str
    batch_size: int = 10_000
    timeout: float = 60.0
    processes: int = 1

    def __post_init__(self):
        if not self.command.strip():
            raise ValueError("adapter command is empty")
        if self.batch_size < 1 or self.timeout <= 0 or self.processes < 1:
            raise ValueError("adapter batch_size, timeout and processes must be positive")


@dataclass(frozen=True)
class ChainConfig:
    lexicon: Lexicon
    affix: Optional[AffixRuleSet] = None
    case_variant: bool = True
    wv: bool = True
    external: Optional[AdapterConfig] = None

    def with_wv(self, enabled: bool) -> "ChainConfig":
        return replace(self, wv=enabled)

    def describe(self) -> dict:
        return {
            "lexicon_sha256": self.lexicon.digest,
            "lexicon_size": len(self.lexicon),
            "affix_rules": [list(r) for r in self.affix.rules] if self.affix else [],
            "affix_max_applications": self.affix.max_applications if self.affix else 0,
            "case_variant": self.case_variant,
            "wv": self.wv,
            "external": self.external.command if self.external else None,
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# -- internal stages -------------------------------------------------------

class Recognizer:
    """Applies a :class:`ChainConfig`; pure apart from the adapter stage."""

    def __init__(self, chain: ChainConfig):
        self.chain = chain
        self._forms = chain.lexicon.forms
        self._rules = chain.affix.rules if chain.affix else ()
        self._depth = chain.affix.max_applications if chain.affix else 0

    def _affix_hit(self, starts: Sequence[str]) -> bool:
        forms, seen = self._forms, set(starts)
        frontier = list(starts)
        for _ in range(self._depth):
            nxt = []
            for w in frontier:
                for strip, add in self._rules:
                    if w.endswith(strip):
                        cand = w[: len(w) - len(strip)] + add
                        if not cand or cand in seen:
                            continue
                        if cand in forms:
                            return True
                        seen.add(cand)
                        nxt.append(cand)
            if not nxt:
                break
            frontier = nxt
        return False

    def base_stage(self, word: str) -> Optional[Stage]:
        """First of exact / case_variant / affix accepting ``word``."""
        forms = self._forms
        if word in forms:
            return Stage.EXACT
        folded = None
        if self.chain.case_variant and word[:1].isupper():
            folded = word.lower()
            if folded == word:
                folded = None
            elif folded in forms:
                return Stage.CASE_VARIANT
        if self._rules:
            starts = [word] if folded is None else [word, folded]
            if self._affix_hit(starts):
                return Stage.AFFIX
        return None

    def internal(self, word: str) -> Optional[Verdict]:
        """Verdict from the lexicon-backed stages, or None if all fail."""
        stage = self.base_stage(word)
        if stage is not None:
            return _SHARED[stage]
        if self.chain.wv and ("w" in word or "W" in word):
            norm = normalize_wv(word)
            if self.base_stage(norm) is not None:
                return Verdict(True, Stage.WV_NORMALIZED, norm)
        return None

    def recognize_words(self, words: Sequence[str]) -> list[Verdict]:
        out: list[Optional[Verdict]] = [self.internal(w) for w in words]
        if self.chain.external is not None:
            pending = [i for i, v in enumerate(out) if v is None]
            if pending:
                replies = external_recognize_batch([words[i] for i in pending], self.chain.external)
                for i, (_, ok) in zip(pending, replies):
                    out[i] = _SHARED[Stage.EXTERNAL] if ok else UNRECOGNIZED
        return [UNRECOGNIZED if v is None else v for v in out]

    def recognize(self, word: str) -> Verdict:
        return self.recognize_words([word])[0]


def recognize_word(word: str, chain: ChainConfig) -> Verdict:
    return Recognizer(chain).recognize(word)


# -- external adapter ------------------------------------------------------

class _AdapterSession:
    """One adapter subprocess speaking ``word\\n`` -> ``surface\\t0|1\\n``."""

    def __init__(self, config: AdapterConfig):
        self.config = config
        try:
            argv = shlex.split(config.command)
            self.proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
            )
        except (OSError, ValueError) as exc:
            raise AdapterCrashError(f"cannot launch adapter {config.command!r}: {exc}") from None
        # no newline translation in either direction: the protocol is "\n"-framed
        self.stdin = io.TextIOWrapper(self.proc.stdin, encoding="utf-8", newline="\n", write_through=True)
        self.stdout = io.TextIOWrapper(self.proc.stdout, encoding="utf-8", errors="replace", newline="\n")
        self.stderr = io.TextIOWrapper(self.proc.stderr, encoding="utf-8", errors="replace")
        self.lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._read, daemon=True)
        self._reader.start()
        self._stderr_tail: list[str] = []
        self._err_reader = threading.Thread(target=self._drain_stderr, daemon=True)
        self._err_reader.start()

    def _read(self):
        try:
            for line in self.stdout:
                self.lines.put(line)
        except (OSError, ValueError):
            pass
        self.lines.put(None)

    def _drain_stderr(self):
        try:
            for line in self.stderr:
                self._stderr_tail.append(line.rstrip("\n"))
                del self._stderr_tail[:-20]
        except (OSError, ValueError):
            pass

    def _write(self, payload: str, close: bool, errors: list):
        try:
            self.stdin.write(payload)
            self.stdin.flush()
            if close:
                self.stdin.close()
        except (BrokenPipeError, OSError, ValueError) as exc:
            errors.append(exc)

    def _crash(self, what: str):
        try:
            code = self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            code = None
        tail = "; ".join(self._stderr_tail[-3:])
        detail = f" (exit status {code}{', stderr: ' + tail if tail else ''})"
        return AdapterCrashError(f"adapter {what}{detail}")

    def _next_line(self, deadline: float) -> Optional[str]:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise queue.Empty
        return self.lines.get(timeout=remaining)

    def exchange(self, batch: Sequence[str], last: bool) -> list[bool]:
        deadline = time.monotonic() + self.config.timeout
        write_errors: list = []
        writer = threading.Thread(
            target=self._write, args=("".join(w + "\n" for w in batch), last, write_errors), daemon=True)
        writer.start()
        replies = []
        try:
            for i, word in enumerate(batch):
                line = self._next_line(deadline)
                if line is None:
                    try:
                        code = self.proc.wait(timeout=5)
                    except subprocess.TimeoutExpired:
                        code = None
                    if code != 0:
                        raise self._crash(f"exited after {i} of {len(batch)} replies")
                    raise CountMismatchError(
                        f"adapter sent {i} reply lines for a batch of {len(batch)} words")
                replies.append(self._parse(line, word))
        except queue.Empty:
            self.kill()
            raise AdapterTimeoutError(
                f"adapter gave {len(replies)} of {len(batch)} replies within {self.config.timeout:g} s") from None
        writer.join(timeout=max(0.0, deadline - time.monotonic()))
        if write_errors:
            raise self._crash(f"closed its input early ({write_errors[0]})")
        return replies

    @staticmethod
    def _parse(line: str, word: str) -> bool:
        body = line[:-1] if line.endswith("\n") else line
        parts = body.split("\t")
        if len(parts) != 2 or parts[1] not in ("0", "1"):
            raise MalformedReplyError(f"malformed adapter reply {body!r} for {word!r}")
        if parts[0] != word:
            raise MalformedReplyError(f"adapter replied for {parts[0]!r} where {word!r} was expected")
        return parts[1] == "1"

    def finish(self):
        deadline = time.monotonic() + self.config.timeout
        extra = 0
        try:
            while True:
                line = self._next_line(deadline)
                if line is None:
                    break
                if line.strip():
                    extra += 1
        except queue.Empty:
            self.kill()
            raise AdapterTimeoutError("adapter did not exit after its input was closed") from None
        code = self.proc.wait(timeout=max(1.0, deadline - time.monotonic()))
        if extra:
            raise CountMismatchError(f"adapter sent {extra} reply lines beyond the request")
        if code != 0:
            raise self._crash("exited abnormally")

    def kill(self):
        if self.proc.poll() is None:
            self.proc.kill()
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            pass

    def close(self):
        for stream in (self.stdin, self.stdout, self.stderr):
            try:
                stream.close()
            except (OSError, ValueError):
                pass
        self.kill()


def _run_session(words: Sequence[str], config: AdapterConfig) -> list[bool]:
    session = _AdapterSession(config)
    try:
        out: list[bool] = []
        size = config.batch_size
        if not words:
            session.stdin.close()
        for start in range(0, len(words), size):
            batch = words[start:start + size]
            out.extend(session.exchange(batch, last=start + size >= len(words)))
        session.finish()
        return out
    finally:
        session.close()


def external_recognize_batch(words: Sequence[str], config: AdapterConfig) -> list[tuple[str, bool]]:
    """Ask an external analyzer about ``words``; replies are joined positionally.

    With ``config.processes > 1`` the words are split into contiguous
    partitions, each served by its own adapter process. Any protocol
    failure discards all partial results.
    """
    words = list(words)
    for w in words:
        if not w or "\n" in w or "\t" in w:
            raise ValueError(f"word {w!r} cannot be sent over the adapter protocol")
    parts = min(config.processes, max(1, len(words)))
    if parts == 1:
        flags = _run_session(words, config)
    else:
        step = -(-len(words) // parts)
        chunks = [words[i:i + step] for i in range(0, len(words), step)]
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            flags = [f for chunk in pool.map(lambda c: _run_session(c, config), chunks) for f in chunk]
    return list(zip(words, flags))


# -- table classification --------------------------------------------------

@dataclass
class RecognitionStats:
    """Per-type verdicts joined to counts, with token/type aggregates."""

    table: FrequencyTable
    verdicts: Mapping[str, Verdict] = field(repr=False)
    chain_fingerprint: str = ""
    recognized_tokens: int = 0
    recognized_types: int = 0
    stage_types: dict = field(default_factory=dict)
    stage_tokens: dict = field(default_factory=dict)

    @classmethod
    def from_verdicts(cls, table: FrequencyTable, verdicts: Mapping[str, Verdict],
                      chain_fingerprint: str = "") -> "RecognitionStats":
        stage_types = {s: 0 for s in STAGE_ORDER}
        stage_tokens = {s: 0 for s in STAGE_ORDER}
        for surface, count in table.entries.items():
            st = verdicts[surface].stage
            stage_types[st] += 1
            stage_tokens[st] += count
        rec_types = table.n_types - stage_types[Stage.NONE]
        rec_tokens = table.n_tokens - stage_tokens[Stage.NONE]
        return cls(table, verdicts, chain_fingerprint, rec_tokens, rec_types, stage_types, stage_tokens)

    @property
    def n_tokens(self) -> int:
        return self.table.n_tokens

    @property
    def n_types(self) -> int:
        return self.table.n_types

    @property
    def unrecognized_tokens(self) -> int:
        return self.n_tokens - self.recognized_tokens

    @property
    def unrecognized_types(self) -> int:
        return self.n_types - self.recognized_types

    @property
    def empty(self) -> bool:
        return self.n_tokens == 0

    @property
    def token_rate(self) -> Fraction:
        return Fraction(self.recognized_tokens, self.n_tokens) if self.n_tokens else Fraction(0)

    @property
    def type_rate(self) -> Fraction:
        return Fraction(self.recognized_types, self.n_types) if self.n_types else Fraction(0)

    def is_recognized(self, surface: str) -> bool:
        return self.verdicts[surface].recognized

    def restrict(self, table: FrequencyTable) -> "RecognitionStats":
        """Reuse these verdicts for a sub-table (e.g. one decade)."""
        return RecognitionStats.from_verdicts(table, self.verdicts, self.chain_fingerprint)


def classify_table(table: FrequencyTable, chain: ChainConfig) -> RecognitionStats:
    surfaces = [s for s, _ in table.ranked()]
    verdicts = dict(zip(surfaces, Recognizer(chain).recognize_words(surfaces)))
    return RecognitionStats.from_verdicts(table, verdicts, chain.fingerprint())
