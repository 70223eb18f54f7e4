"""Seeded OCR-noise simulation with per-token ground truth.

Randomness is counter based: every draw is a hash of ``(seed, token index,
lane)``, so any partition of the corpus can be corrupted independently and
the pieces concatenated into exactly the serial result.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError, SchemaError
from .ingest import TokenRecord

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB
_UNIT = 2.0 ** -53

LANE_SELECT = 0
LANE_REPAIR = 1 << 20


def _mix(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _C1) & _MASK
    z = ((z ^ (z >> 27)) * _C2) & _MASK
    return z ^ (z >> 31)


def counter_hash(seed: int, index: int, lane: int = 0) -> int:
    """64-bit hash of ``(seed, index, lane)``."""
    return _mix(_mix(seed ^ _GOLDEN) + _mix(index + 1) + (lane + 1) * _GOLDEN)


def counter_uniform(seed: int, index: int, lane: int = 0) -> float:
    return (counter_hash(seed, index, lane) >> 11) * _UNIT


def _mix_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_C1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_C2)
    return z ^ (z >> np.uint64(31))


def counter_uniform_array(seed: int, start: int, count: int, lane: int = 0) -> np.ndarray:
    """Vectorised :func:`counter_uniform` for indices ``start .. start+count-1``."""
    with np.errstate(over="ignore"):
        idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
        base = np.uint64((_mix(seed ^ _GOLDEN) + (lane + 1) * _GOLDEN) & _MASK)
        h = _mix_np(base + _mix_np(idx))
    return (h >> np.uint64(11)).astype(np.float64) * _UNIT


@dataclass(frozen=True)
class NoiseModel:
    target_wer: float
    confusion_pairs: tuple
    min_mutations: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "confusion_pairs",
                           tuple((a, b, float(w)) for a, b, w in self.confusion_pairs))
        if not 0.0 <= self.target_wer <= 1.0:
            raise ConfigError(f"target_wer {self.target_wer} outside [0, 1]")
        if self.min_mutations < 1:
            raise ConfigError("min_mutations_per_corrupted_word must be >= 1")
        if not 0 <= self.seed <= _MASK:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.target_wer > 0 and not self.confusion_pairs:
            raise ConfigError("a positive target_wer needs at least one confusion pair")
        for a, b, w in self.confusion_pairs:
            if len(a) != 1 or len(b) != 1 or not a.isalpha() or not b.isalpha():
                raise ConfigError(f"confusion pair ({a!r}, {b!r}) must map a letter to a letter")
            if a == b:
                raise ConfigError(f"confusion pair ({a!r}, {b!r}) is an identity")
            if not w > 0:
                raise ConfigError(f"confusion pair ({a!r}, {b!r}) needs a positive weight")

    @classmethod
    def from_dict(cls, d) -> "NoiseModel":
        try:
            return cls(float(d["target_wer"]), tuple(tuple(p) for p in d["confusion_pairs"]),
                       int(d.get("min_mutations_per_corrupted_word", 1)), int(d.get("seed", 0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid noise model: {exc!r}") from None

    @classmethod
    def from_file(cls, path) -> "NoiseModel":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read noise model {path}: {exc}") from None

    @classmethod
    def default(cls, target_wer: Optional[float] = None, seed: Optional[int] = None) -> "NoiseModel":
        d = json.loads(resources.files("lexqual").joinpath("data/fraktur_confusions.json").read_text("utf-8"))
        if target_wer is not None:
            d["target_wer"] = target_wer
        if seed is not None:
            d["seed"] = seed
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "target_wer": self.target_wer,
            "confusion_pairs": [list(p) for p in self.confusion_pairs],
            "min_mutations_per_corrupted_word": self.min_mutations,
            "seed": self.seed,
        }

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


@dataclass
class GroundTruth:
    corrupted: np.ndarray
    collisions: np.ndarray
    uncorruptible: int = 0

    def __post_init__(self):
        self.corrupted = np.asarray(self.corrupted, dtype=bool)
        self.collisions = np.asarray(self.collisions, dtype=bool)
        if self.corrupted.shape != self.collisions.shape:
            raise ValueError("flag arrays differ in length")
        if np.any(self.collisions & ~self.corrupted):
            raise ValueError("a collision must be a corrupted token")

    @property
    def n_tokens(self) -> int:
        return int(self.corrupted.size)

    @property
    def corrupted_count(self) -> int:
        return int(self.corrupted.sum())

    @property
    def collision_count(self) -> int:
        return int(self.collisions.sum())

    @property
    def true_wer(self) -> Fraction:
        return Fraction(self.corrupted_count, self.n_tokens) if self.n_tokens else Fraction(0)

    @classmethod
    def concat(cls, parts: Sequence["GroundTruth"]) -> "GroundTruth":
        if not parts:
            return cls(np.zeros(0, bool), np.zeros(0, bool))
        return cls(np.concatenate([p.corrupted for p in parts]),
                   np.concatenate([p.collisions for p in parts]),
                   sum(p.uncorruptible for p in parts))

    def __eq__(self, other):
        if not isinstance(other, GroundTruth):
            return NotImplemented
        return (np.array_equal(self.corrupted, other.corrupted)
                and np.array_equal(self.collisions, other.collisions)
                and self.uncorruptible == other.uncorruptible)

    def header(self) -> str:
        from .profile import rate_str
        return (f"#lexqual-ground-truth N={self.n_tokens} corrupted={self.corrupted_count} "
                f"true_wer={rate_str(self.true_wer)} collision_count={self.collision_count} "
                f"uncorruptible={self.uncorruptible}\n")

    def write(self, path) -> None:
        """Summary header line, then the corrupted and collision bitmaps."""
        with open(path, "wb") as f:
            f.write(self.header().encode("ascii"))
            f.write(np.packbits(self.corrupted).tobytes())
            f.write(np.packbits(self.collisions).tobytes())

    @classmethod
    def read(cls, path) -> "GroundTruth":
        data = Path(path).read_bytes()
        nl = data.find(b"\n")
        if nl < 0 or not data.startswith(b"#lexqual-ground-truth "):
            raise SchemaError(f"{path}: not a ground-truth file")
        fields = dict(part.split("=", 1) for part in data[:nl].decode("ascii").split()[1:])
        try:
            n = int(fields["N"])
            expected = {k: int(fields[k]) for k in ("corrupted", "collision_count", "uncorruptible")}
        except (KeyError, ValueError):
            raise SchemaError(f"{path}: bad ground-truth header") from None
        nbytes = (n + 7) // 8
        body = np.frombuffer(data[nl + 1:], dtype=np.uint8)
        if body.size != 2 * nbytes:
            raise SchemaError(f"{path}: bitmap size does not match N={n}")
        corrupted = np.unpackbits(body[:nbytes], count=n).astype(bool)
        collisions = np.unpackbits(body[nbytes:], count=n).astype(bool)
        gt = cls(corrupted, collisions, expected["uncorruptible"])
        if gt.corrupted_count != expected["corrupted"] or gt.collision_count != expected["collision_count"]:
            raise SchemaError(f"{path}: bitmap counts disagree with the header")
        return gt


def _pair_index(pairs) -> dict[str, list[tuple[str, float]]]:
    index: dict[str, list] = {}
    for a, b, w in pairs:
        index.setdefault(a, []).append((b, w))
    return index


def _with_case(original: str, target: str) -> str:
    if original.isupper():
        up = target.upper()
        if len(up) == 1:
            return up
    return target


def mutate_word(word: str, model: NoiseModel, index: int, pairs=None) -> str:
    """Apply up to ``model.min_mutations`` substitutions at distinct positions.

    Returns ``word`` unchanged when it has no confusable character.
    """
    pairs = pairs if pairs is not None else _pair_index(model.confusion_pairs)
    chars = list(word)
    used: set[int] = set()
    for step in range(model.min_mutations):
        options = []
        total = 0.0
        for pos, ch in enumerate(chars):
            if pos in used:
                continue
            for target, weight in pairs.get(ch.lower(), ()):
                total += weight
                options.append((total, pos, target))
        if not options:
            break
        x = counter_uniform(model.seed, index, 1 + step) * total
        for upto, pos, target in options:
            if x < upto:
                break
        chars[pos] = _with_case(chars[pos], target)
        used.add(pos)
    return "".join(chars)


def corrupt_corpus(tokens: Iterable, model: NoiseModel, lexicon=None, start_index: int = 0):
    """Corrupt a token stream; returns ``(noisy tokens, GroundTruth)``.

    Tokens may be strings or :class:`TokenRecord`; the output keeps the
    input's element type. ``start_index`` is the global index of the first
    token, for corrupting one partition of a larger corpus.
    """
    tokens = list(tokens)
    n = len(tokens)
    surfaces = [t.surface if isinstance(t, TokenRecord) else t for t in tokens]
    corrupted = np.zeros(n, dtype=bool)
    collisions = np.zeros(n, dtype=bool)
    uncorruptible = 0
    out = list(tokens)
    if model.target_wer > 0 and n:
        u = counter_uniform_array(model.seed, start_index, n, LANE_SELECT)
        selected = np.flatnonzero(u < model.target_wer)
        pairs = _pair_index(model.confusion_pairs)
        forms = getattr(lexicon, "forms", lexicon)
        if forms is not None and not isinstance(forms, (set, frozenset)):
            forms = frozenset(forms)
        for i in selected.tolist():
            word = surfaces[i]
            noisy = mutate_word(word, model, start_index + i, pairs)
            if noisy == word:
                uncorruptible += 1
                continue
            corrupted[i] = True
            if forms is not None and noisy in forms:
                collisions[i] = True
            tok = tokens[i]
            out[i] = TokenRecord(noisy, tok.doc_id, tok.year) if isinstance(tok, TokenRecord) else noisy
    return out, GroundTruth(corrupted, collisions, uncorruptible)


def repair_tokens(noisy: Sequence, clean: Sequence, truth: GroundTruth, fraction: Fraction, seed: int = 0):
    """Restore a deterministic ``fraction`` of the corrupted tokens.

    Returns ``(repaired tokens, repaired index array)``. The repaired set is
    the ``round(fraction * corrupted)`` corrupted indices with the smallest
    counter hash.
    """
    if len(noisy) != len(clean) or len(noisy) != truth.n_tokens:
        raise DataError("noisy, clean and ground truth differ in length")
    idx = np.flatnonzero(truth.corrupted)
    k = round(Fraction(fraction) * idx.size)
    order = sorted(idx.tolist(), key=lambda i: counter_hash(seed, i, LANE_REPAIR))
    chosen = np.array(sorted(order[:k]), dtype=np.int64)
    out = list(noisy)
    for i in chosen.tolist():
        out[i] = clean[i]
    return out, chosen


def estimator_error(profile, truth: GroundTruth) -> dict:
    """Signed gaps between the estimated and true error rates.

    ``raw_gap`` is ``(1 - raw token rate) - true WER``; ``adjusted_gap``
    credits real-word collisions, which recognition cannot see.
    """
    raw = getattr(profile, "raw", profile)
    if raw.n_tokens != truth.n_tokens:
        raise DataError(f"profile has N={raw.n_tokens} but ground truth has N={truth.n_tokens}")
    unrec_rate = 1 - raw.token_rate
    n = truth.n_tokens
    collision_rate = Fraction(truth.collision_count, n) if n else Fraction(0)
    return {
        "raw_gap": unrec_rate - truth.true_wer,
        "adjusted_gap": unrec_rate - (truth.true_wer - collision_rate),
    }
