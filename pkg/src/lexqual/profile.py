"""Quality profile: raw rates, band/spectrum/decade/length reports, w/v
recovery, OOV calibration and the unrecognized-token decomposition.

Every token quantity is an exact integer and every rate an exact
:class:`~fractions.Fraction`; decimals appear only when rendering.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .errors import (
    CalibrationError,
    IncompatibleProfilesError,
    InconsistentInputError,
    PartitionOverlapError,
    SchemaError,
)
from .freq import FrequencyTable
from .recognize import ChainConfig, RecognitionStats, Recognizer, Stage, classify_table

logger = logging.getLogger(__name__)

DEFAULT_BANDS = (1_000, 10_000, 100_000, 500_000, 1_000_000)
DEFAULT_BAND_K = 1_000_000
DEFAULT_M_MAX = 10
# Edited late-19th-century reference material: 13.5 % measured OOV floor,
# 20 % upper estimate.
DEFAULT_OOV_INTERVAL = (Fraction(135, 1000), Fraction(20, 100))
PROFILE_VERSION = 1


# -- rendering -------------------------------------------------------------

def ratio(num: int, den: int) -> Fraction:
    return Fraction(num, den) if den else Fraction(0)


def rate_str(value: Fraction) -> str:
    """Decimal string with 4 significant digits, e.g. ``0.6928``."""
    value = Fraction(value)
    if value == 0:
        return "0.000"
    with localcontext() as ctx:
        ctx.prec = 4
        d = Decimal(value.numerator) / Decimal(value.denominator)
        d = d.quantize(Decimal(1).scaleb(d.adjusted() - 3))
    return format(d, "f")


def pct_str(value: Fraction, places: int = 1) -> str:
    """Percentage rendered like the published tables, e.g. ``69.3``."""
    with localcontext() as ctx:
        ctx.prec = 50
        d = Decimal(value.numerator) * 100 / Decimal(value.denominator)
        return format(d.quantize(Decimal(1).scaleb(-places)), "f")


def _fraction_str(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def _parse_fraction(text: str) -> Fraction:
    return Fraction(text)


# -- raw rates -------------------------------------------------------------

@dataclass(frozen=True)
class RawRates:
    n_tokens: int
    n_types: int
    recognized_tokens: int
    recognized_types: int

    def __post_init__(self):
        if not 0 <= self.recognized_tokens <= self.n_tokens:
            raise InconsistentInputError("recognized tokens must lie within [0, N]")
        if not 0 <= self.recognized_types <= self.n_types:
            raise InconsistentInputError("recognized types must lie within [0, V]")

    @property
    def empty(self) -> bool:
        return self.n_tokens == 0

    @property
    def unrecognized_tokens(self) -> int:
        return self.n_tokens - self.recognized_tokens

    @property
    def unrecognized_types(self) -> int:
        return self.n_types - self.recognized_types

    @property
    def token_rate(self) -> Fraction:
        return ratio(self.recognized_tokens, self.n_tokens)

    @property
    def type_rate(self) -> Fraction:
        return ratio(self.recognized_types, self.n_types)

    def to_dict(self) -> dict:
        return {
            "tokens": self.n_tokens,
            "types": self.n_types,
            "recognized_tokens": self.recognized_tokens,
            "recognized_types": self.recognized_types,
            "unrecognized_tokens": self.unrecognized_tokens,
            "unrecognized_types": self.unrecognized_types,
            "token_rate": rate_str(self.token_rate),
            "type_rate": rate_str(self.type_rate),
            "empty": self.empty,
        }

    @classmethod
    def from_dict(cls, d) -> "RawRates":
        return cls(d["tokens"], d["types"], d["recognized_tokens"], d["recognized_types"])


def raw_rates(stats) -> RawRates:
    """Token and type recognition rates of anything carrying N, V and the
    recognized counts (a :class:`RecognitionStats` or published figures)."""
    return RawRates(stats.n_tokens, stats.n_types, stats.recognized_tokens, stats.recognized_types)


# -- frequency bands -------------------------------------------------------

@dataclass(frozen=True)
class BandRow:
    k: int
    band_types: int
    unrec_types: int
    band_tokens: int
    unrec_tokens: int
    n_tokens: int

    @property
    def unrec_type_pct(self) -> Fraction:
        return ratio(self.unrec_types, self.band_types)

    @property
    def coverage(self) -> Fraction:
        return ratio(self.band_tokens, self.n_tokens)

    @property
    def unrec_token_pct(self) -> Fraction:
        return ratio(self.unrec_tokens, self.band_tokens)

    def to_dict(self) -> dict:
        return {
            "K": self.k,
            "band_types": self.band_types,
            "unrec_types": self.unrec_types,
            "unrec_type_pct": rate_str(self.unrec_type_pct),
            "band_tokens": self.band_tokens,
            "coverage_pct": rate_str(self.coverage),
            "unrec_tokens": self.unrec_tokens,
            "unrec_token_pct": rate_str(self.unrec_token_pct),
            "N": self.n_tokens,
        }

    @classmethod
    def from_dict(cls, d) -> "BandRow":
        return cls(d["K"], d["band_types"], d["unrec_types"], d["band_tokens"], d["unrec_tokens"], d["N"])


def _check_k_list(k_list: Sequence[int]) -> list[int]:
    ks = [int(k) for k in k_list]
    if not ks or any(k < 1 for k in ks) or any(a >= b for a, b in zip(ks, ks[1:])):
        raise ValueError(f"band sizes must be positive and strictly increasing, got {ks}")
    return ks


def band_report(stats: RecognitionStats, k_list: Sequence[int] = DEFAULT_BANDS) -> list[BandRow]:
    """Unrecognized types/tokens inside each top-K band (ties broken by surface)."""
    ks = _check_k_list(k_list)
    n_types = stats.n_types
    clamped = []
    for k in ks:
        if k > n_types:
            if n_types == 0:
                continue
            logger.warning("band K=%d exceeds V=%d; clamped", k, n_types)
            k = n_types
        if not clamped or clamped[-1] != k:
            clamped.append(k)
    rows = []
    ranked = stats.table.ranked()
    verdicts = stats.verdicts
    tokens = unrec_types = unrec_tokens = 0
    pos = 0
    for k in clamped:
        for surface, count in ranked[pos:k]:
            tokens += count
            if not verdicts[surface].recognized:
                unrec_types += 1
                unrec_tokens += count
        pos = k
        rows.append(BandRow(k, k, unrec_types, tokens, unrec_tokens, stats.n_tokens))
    return rows


# -- frequency spectrum ----------------------------------------------------

@dataclass(frozen=True)
class SpectrumRow:
    m: int
    n_types: int
    unrec_types: int

    def __post_init__(self):
        if not 0 <= self.unrec_types <= self.n_types:
            raise InconsistentInputError(f"class m={self.m}: unrecognized types exceed V(m,N)")

    @property
    def tokens(self) -> int:
        return self.m * self.n_types

    @property
    def unrec_tokens(self) -> int:
        return self.m * self.unrec_types

    @property
    def unrec_type_pct(self) -> Fraction:
        return ratio(self.unrec_types, self.n_types)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "V_m": self.n_types,
            "unrec_types": self.unrec_types,
            "unrec_type_pct": rate_str(self.unrec_type_pct),
            "unrec_tokens": self.unrec_tokens,
        }

    @classmethod
    def from_dict(cls, d) -> "SpectrumRow":
        return cls(d["m"], d["V_m"], d["unrec_types"])


def spectrum_report(stats: RecognitionStats, m_range: Iterable[int] = range(1, DEFAULT_M_MAX + 1)) -> list[SpectrumRow]:
    ms = sorted(set(m_range))
    if not ms or ms[0] < 1:
        raise ValueError("m_range must contain at least one class m >= 1")
    wanted = set(ms)
    types = dict.fromkeys(ms, 0)
    unrec = dict.fromkeys(ms, 0)
    verdicts = stats.verdicts
    for surface, count in stats.table.entries.items():
        if count in wanted:
            types[count] += 1
            if not verdicts[surface].recognized:
                unrec[count] += 1
    return [SpectrumRow(m, types[m], unrec[m]) for m in ms]


# -- length statistics -----------------------------------------------------

@dataclass(frozen=True)
class LengthRow:
    band: str
    n_types: int
    total_length: int
    n_unrecognized: int
    unrecognized_length: int

    @property
    def n_recognized(self) -> int:
        return self.n_types - self.n_unrecognized

    @property
    def mean_length(self) -> Optional[Fraction]:
        return Fraction(self.total_length, self.n_types) if self.n_types else None

    @property
    def mean_unrecognized(self) -> Optional[Fraction]:
        return Fraction(self.unrecognized_length, self.n_unrecognized) if self.n_unrecognized else None

    @property
    def mean_recognized(self) -> Optional[Fraction]:
        n = self.n_recognized
        return Fraction(self.total_length - self.unrecognized_length, n) if n else None

    @property
    def unrec_type_pct(self) -> Fraction:
        return ratio(self.n_unrecognized, self.n_types)

    def to_dict(self) -> dict:
        def r(x):
            return None if x is None else rate_str(x)
        return {
            "band": self.band,
            "n_types": self.n_types,
            "total_length": self.total_length,
            "n_unrecognized": self.n_unrecognized,
            "unrecognized_length": self.unrecognized_length,
            "mean_length": r(self.mean_length),
            "mean_recognized": r(self.mean_recognized),
            "mean_unrecognized": r(self.mean_unrecognized),
            "unrec_type_pct": rate_str(self.unrec_type_pct),
        }

    @classmethod
    def from_dict(cls, d) -> "LengthRow":
        return cls(d["band"], d["n_types"], d["total_length"], d["n_unrecognized"], d["unrecognized_length"])


def _length_row(label: str, types, verdicts) -> LengthRow:
    total = unrec = unrec_len = 0
    for surface, _ in types:
        n = len(surface)
        total += n
        if not verdicts[surface].recognized:
            unrec += 1
            unrec_len += n
    return LengthRow(label, len(types), total, unrec, unrec_len)


def length_report(stats: RecognitionStats, k_list: Sequence[int] = DEFAULT_BANDS,
                  m_range: Iterable[int] = range(1, DEFAULT_M_MAX + 1)) -> list[LengthRow]:
    """Mean type lengths per top-K band and per rare frequency class."""
    ranked = stats.table.ranked()
    rows = []
    seen = set()
    for k in _check_k_list(k_list):
        k = min(k, len(ranked))
        if k == 0 or k in seen:
            continue
        seen.add(k)
        rows.append(_length_row(f"top-{k}", ranked[:k], stats.verdicts))
    ms = sorted(set(m_range))
    classes: dict[int, list] = {m: [] for m in ms}
    for surface, count in ranked:
        if count in classes:
            classes[count].append((surface, count))
    for m in ms:
        if classes[m]:
            rows.append(_length_row(f"class-{m}", classes[m], stats.verdicts))
    return rows


# -- w/v recovery ----------------------------------------------------------

@dataclass(frozen=True)
class WvRecovery:
    band_k: int
    w_types: int
    w_tokens: int
    unrec_before_types: int
    unrec_before_tokens: int
    unrec_after_types: int
    unrec_after_tokens: int
    n_tokens: int

    def __post_init__(self):
        if not (0 <= self.unrec_after_types <= self.unrec_before_types <= self.w_types
                and 0 <= self.unrec_after_tokens <= self.unrec_before_tokens <= self.w_tokens):
            raise InconsistentInputError("w/v recovery counts are not nested")

    @property
    def recovered_tokens(self) -> int:
        return self.unrec_before_tokens - self.unrec_after_tokens

    @property
    def recovered_types(self) -> int:
        return self.unrec_before_types - self.unrec_after_types

    @property
    def w_token_share(self) -> Fraction:
        return ratio(self.w_tokens, self.n_tokens)

    def to_dict(self) -> dict:
        return {
            "band_K": self.band_k,
            "w_types": self.w_types,
            "w_tokens": self.w_tokens,
            "w_token_share": rate_str(self.w_token_share),
            "unrec_before_types": self.unrec_before_types,
            "unrec_before_tokens": self.unrec_before_tokens,
            "unrec_before_type_pct": rate_str(ratio(self.unrec_before_types, self.w_types)),
            "unrec_before_token_pct": rate_str(ratio(self.unrec_before_tokens, self.w_tokens)),
            "unrec_after_types": self.unrec_after_types,
            "unrec_after_tokens": self.unrec_after_tokens,
            "unrec_after_type_pct": rate_str(ratio(self.unrec_after_types, self.w_types)),
            "unrec_after_token_pct": rate_str(ratio(self.unrec_after_tokens, self.w_tokens)),
            "recovered_types": self.recovered_types,
            "recovered_tokens": self.recovered_tokens,
            "N": self.n_tokens,
        }

    @classmethod
    def from_dict(cls, d) -> "WvRecovery":
        return cls(d["band_K"], d["w_types"], d["w_tokens"], d["unrec_before_types"],
                   d["unrec_before_tokens"], d["unrec_after_types"], d["unrec_after_tokens"], d["N"])


def _has_w(surface: str) -> bool:
    return "w" in surface or "W" in surface


def _verdicts_under(stats: RecognitionStats, chain: ChainConfig, words: list[str]):
    if stats.chain_fingerprint and stats.chain_fingerprint == chain.fingerprint():
        return [stats.verdicts[w] for w in words]
    return Recognizer(chain).recognize_words(words)


def wv_recovery(stats: RecognitionStats, chain: ChainConfig, band_k: int = DEFAULT_BAND_K) -> WvRecovery:
    """Unrecognized w-containing types of the top band, before and after
    the w->v retry. With ``chain.wv`` off nothing is recovered."""
    if band_k < 1:
        raise ValueError("band_k must be >= 1")
    band = stats.table.ranked()[:band_k]
    k = len(band)
    w_items = [(s, c) for s, c in band if _has_w(s)]
    words = [s for s, _ in w_items]
    before = _verdicts_under(stats, chain.with_wv(False), words)
    after = _verdicts_under(stats, chain.with_wv(True), words) if chain.wv else before
    b_types = b_tok = a_types = a_tok = 0
    for (_, count), vb, va in zip(w_items, before, after):
        if not vb.recognized:
            b_types += 1
            b_tok += count
        if not va.recognized:
            a_types += 1
            a_tok += count
    return WvRecovery(k, len(w_items), sum(c for _, c in w_items), b_types, b_tok, a_types, a_tok,
                      stats.n_tokens)


# -- OOV calibration -------------------------------------------------------

@dataclass(frozen=True)
class OovCalibration:
    low: Fraction
    high: Fraction
    provenance: tuple = ()
    source: str = "references"

    def __post_init__(self):
        object.__setattr__(self, "low", Fraction(self.low))
        object.__setattr__(self, "high", Fraction(self.high))
        if not 0 <= self.low <= self.high <= 1:
            raise CalibrationError(f"OOV interval [{self.low}, {self.high}] is not inside [0, 1]")

    @classmethod
    def default(cls) -> "OovCalibration":
        return cls(*DEFAULT_OOV_INTERVAL, source="default")

    @classmethod
    def from_token_bounds(cls, low_tokens: int, high_tokens: int, residual_tokens: int) -> "OovCalibration":
        """Express an absolute OOV token estimate as fractions of a residual."""
        if residual_tokens <= 0:
            raise CalibrationError("residual must be positive to express token bounds as fractions")
        return cls(Fraction(low_tokens, residual_tokens), Fraction(high_tokens, residual_tokens),
                   source="token_bounds")

    def to_dict(self) -> dict:
        return {
            "oov_fraction_low": rate_str(self.low),
            "oov_fraction_high": rate_str(self.high),
            "oov_fraction_low_exact": _fraction_str(self.low),
            "oov_fraction_high_exact": _fraction_str(self.high),
            "source": self.source,
            "provenance": [{"reference": name, "token_oov_rate": rate_str(rate),
                            "token_oov_rate_exact": _fraction_str(rate)} for name, rate in self.provenance],
        }

    @classmethod
    def from_dict(cls, d) -> "OovCalibration":
        prov = tuple((p["reference"], _parse_fraction(p["token_oov_rate_exact"])) for p in d["provenance"])
        return cls(_parse_fraction(d["oov_fraction_low_exact"]), _parse_fraction(d["oov_fraction_high_exact"]),
                   prov, d["source"])


def reference_oov_rate(stats) -> Fraction:
    """Token OOV rate of an edited reference corpus: 1 - token recognition rate."""
    return 1 - raw_rates(stats).token_rate


def calibrate_oov(references, use_defaults: bool = True) -> OovCalibration:
    """OOV interval spanning the token OOV rates of the given references.

    ``references`` is a mapping or a sequence of ``(name, stats)`` pairs;
    an unnamed sequence of stats objects is also accepted.
    """
    if isinstance(references, Mapping):
        items = list(references.items())
    else:
        items = [r if isinstance(r, tuple) else (f"ref{i}", r) for i, r in enumerate(references or ())]
    if not items:
        if use_defaults:
            return OovCalibration.default()
        raise CalibrationError("no reference corpora given and default OOV interval disabled")
    prov = []
    for name, stats in items:
        if raw_rates(stats).empty:
            raise CalibrationError(f"reference {name!r} has no tokens")
        prov.append((str(name), reference_oov_rate(stats)))
    rates = [r for _, r in prov]
    return OovCalibration(min(rates), max(rates), tuple(prov), "references")


# -- decomposition ---------------------------------------------------------

@dataclass(frozen=True)
class Decomposition:
    n_tokens: int
    recognized_tokens: int
    recovered_tokens: int
    unrec_top: int
    unrec_rare: int
    unrec_mid: int
    oov_est_low: int
    oov_est_high: int
    band_k: Optional[int] = None
    m_max: Optional[int] = None

    @property
    def unrecognized(self) -> int:
        return self.n_tokens - self.recognized_tokens

    @property
    def residual_top(self) -> int:
        """Top-band unrecognized tokens left after w/v recovery."""
        return self.unrec_top - self.recovered_tokens

    @property
    def hard_errors(self) -> int:
        return self.unrec_rare + self.unrec_mid

    @property
    def hard_errors_low(self) -> int:
        return self.unrec_rare

    @property
    def hard_errors_high(self) -> int:
        return self.unrec_rare + self.unrec_mid

    @property
    def easy_errors_low(self) -> int:
        return self.residual_top - self.oov_est_high

    @property
    def easy_errors_high(self) -> int:
        return self.residual_top - self.oov_est_low

    @property
    def raw_rate(self) -> Fraction:
        return ratio(self.recognized_tokens, self.n_tokens)

    @property
    def recovered_rate(self) -> Fraction:
        return ratio(self.recognized_tokens + self.recovered_tokens, self.n_tokens)

    @property
    def approx_rate_low(self) -> Fraction:
        return ratio(self.recognized_tokens + self.recovered_tokens + self.oov_est_low, self.n_tokens)

    @property
    def approx_rate_high(self) -> Fraction:
        return ratio(self.recognized_tokens + self.recovered_tokens + self.oov_est_high, self.n_tokens)

    def to_dict(self) -> dict:
        return {
            "N": self.n_tokens,
            "R_tok": self.recognized_tokens,
            "U": self.unrecognized,
            "W_rec": self.recovered_tokens,
            "U_top": self.unrec_top,
            "U_rare": self.unrec_rare,
            "U_mid": self.unrec_mid,
            "residual_top": self.residual_top,
            "oov_est_low": self.oov_est_low,
            "oov_est_high": self.oov_est_high,
            "hard_errors": self.hard_errors,
            "hard_errors_low": self.hard_errors_low,
            "hard_errors_high": self.hard_errors_high,
            "easy_errors_low": self.easy_errors_low,
            "easy_errors_high": self.easy_errors_high,
            "raw_rate": rate_str(self.raw_rate),
            "recovered_rate": rate_str(self.recovered_rate),
            "approx_rate_low": rate_str(self.approx_rate_low),
            "approx_rate_high": rate_str(self.approx_rate_high),
            "band_K": self.band_k,
            "m_max": self.m_max,
        }

    @classmethod
    def from_dict(cls, d) -> "Decomposition":
        return cls(d["N"], d["R_tok"], d["W_rec"], d["U_top"], d["U_rare"], d["U_mid"],
                   d["oov_est_low"], d["oov_est_high"], d.get("band_K"), d.get("m_max"))


def decompose(n_tokens: int, recognized_tokens: int, unrec_top: int, unrec_rare: int,
              recovered_tokens: int, calibration: OovCalibration,
              band_k: Optional[int] = None, m_max: Optional[int] = None) -> Decomposition:
    """Split the unrecognized tokens into top-band, rare-class and middle
    buckets, and bound the OOV share of the post-recovery top residual."""
    unrec = n_tokens - recognized_tokens
    if unrec < 0 or min(unrec_top, unrec_rare, recovered_tokens) < 0:
        raise InconsistentInputError("token counts must be non-negative with R_tok <= N")
    if unrec_top + unrec_rare > unrec:
        raise PartitionOverlapError(
            f"U_top + U_rare = {unrec_top + unrec_rare} exceeds the {unrec} unrecognized tokens")
    if recovered_tokens > unrec_top:
        raise InconsistentInputError(f"recovered tokens {recovered_tokens} exceed U_top {unrec_top}")
    residual = unrec_top - recovered_tokens
    oov_low = round(calibration.low * residual)
    oov_high = round(calibration.high * residual)
    return Decomposition(n_tokens, recognized_tokens, recovered_tokens, unrec_top, unrec_rare,
                         unrec - unrec_top - unrec_rare, oov_low, oov_high, band_k, m_max)


def decompose_unrecognized(stats: RecognitionStats, recovery: WvRecovery, calibration: OovCalibration,
                           band_k: int = DEFAULT_BAND_K, m_max: int = DEFAULT_M_MAX) -> Decomposition:
    ranked = stats.table.ranked()
    band = ranked[:band_k]
    if band and band[-1][1] <= m_max:
        raise PartitionOverlapError(
            f"top-{band_k} band reaches frequency {band[-1][1]}, overlapping classes m <= {m_max}")
    if recovery.band_k != len(band):
        raise InconsistentInputError(
            f"w/v recovery covers the top {recovery.band_k} types, decomposition the top {len(band)}")
    verdicts = stats.verdicts
    unrec_top = sum(c for s, c in band if not verdicts[s].recognized)
    unrec_rare = sum(c for s, c in ranked[len(band):] if c <= m_max and not verdicts[s].recognized)
    return decompose(stats.n_tokens, stats.recognized_tokens, unrec_top, unrec_rare,
                     recovery.recovered_tokens, calibration, len(band), m_max)


def decomposition_band(table: FrequencyTable, band_k: int, m_max: int) -> int:
    """Largest band size <= band_k whose cutoff frequency exceeds m_max."""
    above = sum(1 for c in table.entries.values() if c > m_max)
    if band_k > above:
        logger.warning("decomposition band clamped from %d to %d types (frequency > %d)",
                       band_k, above, m_max)
        return above
    return band_k


# -- decades ---------------------------------------------------------------

@dataclass(frozen=True)
class DecadeRow:
    decade: int
    n_tokens: int
    recognized_tokens: int

    @property
    def token_rate(self) -> Fraction:
        return ratio(self.recognized_tokens, self.n_tokens)

    def to_dict(self) -> dict:
        return {"decade": self.decade, "N": self.n_tokens, "recognized_tokens": self.recognized_tokens,
                "token_rate": rate_str(self.token_rate)}

    @classmethod
    def from_dict(cls, d) -> "DecadeRow":
        return cls(d["decade"], d["N"], d["recognized_tokens"])


def decade_report(per_decade) -> list[DecadeRow]:
    """One row per decade with tokens; ``per_decade`` maps decade -> stats."""
    items = per_decade.items() if isinstance(per_decade, Mapping) else per_decade
    rows = [DecadeRow(int(d), s.n_tokens, s.recognized_tokens) for d, s in items if s.n_tokens > 0]
    return sorted(rows, key=lambda r: r.decade)


def pooled_rate(rows: Sequence[DecadeRow]) -> Fraction:
    return ratio(sum(r.recognized_tokens for r in rows), sum(r.n_tokens for r in rows))


# -- profile bundle --------------------------------------------------------

@dataclass
class QualityProfile:
    raw: RawRates
    bands: list[BandRow]
    spectrum: list[SpectrumRow]
    decades: list[DecadeRow]
    lengths: list[LengthRow]
    wv: WvRecovery
    calibration: OovCalibration
    decomposition: Decomposition
    fingerprints: dict = field(default_factory=dict)
    stage_counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "version": PROFILE_VERSION,
            "raw": {**self.raw.to_dict(), "stages": self.stage_counts},
            "bands": [r.to_dict() for r in self.bands],
            "spectrum": [r.to_dict() for r in self.spectrum],
            "decades": [r.to_dict() for r in self.decades],
            "lengths": [r.to_dict() for r in self.lengths],
            "wv": self.wv.to_dict(),
            "calibration": self.calibration.to_dict(),
            "decomposition": self.decomposition.to_dict(),
            "fingerprints": dict(self.fingerprints),
        }

    @classmethod
    def from_dict(cls, d) -> "QualityProfile":
        try:
            return cls(
                raw=RawRates.from_dict(d["raw"]),
                bands=[BandRow.from_dict(r) for r in d["bands"]],
                spectrum=[SpectrumRow.from_dict(r) for r in d["spectrum"]],
                decades=[DecadeRow.from_dict(r) for r in d["decades"]],
                lengths=[LengthRow.from_dict(r) for r in d["lengths"]],
                wv=WvRecovery.from_dict(d["wv"]),
                calibration=OovCalibration.from_dict(d["calibration"]),
                decomposition=Decomposition.from_dict(d["decomposition"]),
                fingerprints=dict(d["fingerprints"]),
                stage_counts=dict(d["raw"].get("stages", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"not a quality profile document: {exc!r}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False, ensure_ascii=False) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "QualityProfile":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def csv_sections(self) -> dict[str, str]:
        d = self.to_dict()
        raw = {k: v for k, v in d["raw"].items() if k != "stages"}
        cal = {k: v for k, v in d["calibration"].items() if k != "provenance"}
        sections = {
            "raw": [raw],
            "bands": d["bands"],
            "spectrum": d["spectrum"],
            "decades": d["decades"],
            "lengths": d["lengths"],
            "wv": [d["wv"]],
            "calibration": [cal],
            "decomposition": [d["decomposition"]],
        }
        headers = {
            "raw": list(raw), "wv": list(d["wv"]), "calibration": list(cal),
            "decomposition": list(d["decomposition"]),
            "bands": ["K", "band_types", "unrec_types", "unrec_type_pct", "band_tokens", "coverage_pct",
                      "unrec_tokens", "unrec_token_pct", "N"],
            "spectrum": ["m", "V_m", "unrec_types", "unrec_type_pct", "unrec_tokens"],
            "decades": ["decade", "N", "recognized_tokens", "token_rate"],
            "lengths": ["band", "n_types", "total_length", "n_unrecognized", "unrecognized_length",
                        "mean_length", "mean_recognized", "mean_unrecognized", "unrec_type_pct"],
        }
        out = {}
        for name, rows in sections.items():
            buf = io.StringIO()
            w = csv.DictWriter(buf, fieldnames=headers[name], lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow({k: ("" if v is None else v) for k, v in row.items()})
            out[name] = buf.getvalue()
        return out

    def write_csv(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, text in self.csv_sections().items():
            p = directory / f"{name}.csv"
            p.write_text(text, encoding="utf-8")
            paths.append(p)
        return paths

    def summary_lines(self) -> list[str]:
        r, dec = self.raw, self.decomposition
        return [
            f"tokens N={r.n_tokens:,}  types V={r.n_types:,}",
            f"raw token rate {pct_str(r.token_rate)} %  raw type rate {pct_str(r.type_rate)} %",
            f"w/v recovered tokens {self.wv.recovered_tokens:,}",
            f"approximated recognition rate {pct_str(dec.approx_rate_low)}-{pct_str(dec.approx_rate_high)} %",
        ]


def table_fingerprint(table: FrequencyTable) -> str:
    h = hashlib.sha256()
    for surface, count in table.ranked():
        h.update(f"{surface}\t{count}\n".encode("utf-8"))
    return h.hexdigest()


def corpus_fingerprint(doc_ids: Optional[Sequence] = None, n_tokens: Optional[int] = None) -> str:
    """Identity of the corpus being profiled, independent of its OCR text.

    Built from ``(doc_id, year)`` pairs when documents are known, otherwise
    from the token count; re-OCRed or corrected text keeps its fingerprint.
    """
    h = hashlib.sha256()
    if doc_ids is not None:
        for item in doc_ids:
            h.update(("\t".join(str(x) for x in (item if isinstance(item, tuple) else (item,))) + "\n").encode())
    else:
        h.update(f"N={n_tokens}".encode())
    return h.hexdigest()


def build_profile(table: FrequencyTable, chain: ChainConfig, *,
                  decade_tables: Optional[Mapping[int, FrequencyTable]] = None,
                  k_list: Sequence[int] = DEFAULT_BANDS, m_max: int = DEFAULT_M_MAX,
                  band_k: int = DEFAULT_BAND_K, calibration: Optional[OovCalibration] = None,
                  use_default_calibration: bool = True,
                  corpus_id: Optional[str] = None) -> tuple[QualityProfile, RecognitionStats]:
    """Run the full estimation procedure over one frequency table.

    The raw rates come from the chain with w/v retry disabled; the retry
    (if enabled in ``chain``) only feeds the recovery step.
    """
    if calibration is None:
        calibration = calibrate_oov([], use_defaults=use_default_calibration)
    raw_chain = chain.with_wv(False)
    stats = classify_table(table, raw_chain)
    k_eff = decomposition_band(table, band_k, m_max)
    if k_eff > 0:
        recovery = wv_recovery(stats, chain, band_k=k_eff)
        decomposition = decompose_unrecognized(stats, recovery, calibration, band_k=k_eff, m_max=m_max)
    else:
        recovery = WvRecovery(0, 0, 0, 0, 0, 0, 0, stats.n_tokens)
        unrec_rare = sum(c for s, c in table.entries.items() if c <= m_max and not stats.is_recognized(s))
        decomposition = decompose(stats.n_tokens, stats.recognized_tokens, 0, unrec_rare, 0,
                                  calibration, 0, m_max)
    decades = decade_report({d: stats.restrict(t) for d, t in (decade_tables or {}).items()})
    config = {
        "chain": chain.describe(),
        "bands": list(k_list),
        "m_max": m_max,
        "band_K": band_k,
        "calibration": calibration.to_dict(),
    }
    fingerprints = {
        "config": hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest(),
        "chain": raw_chain.fingerprint(),
        "corpus": corpus_id if corpus_id is not None else corpus_fingerprint(n_tokens=table.n_tokens),
        "table": table_fingerprint(table),
    }
    stage_counts = {s.value: {"types": stats.stage_types[s], "tokens": stats.stage_tokens[s]}
                    for s in Stage}
    profile = QualityProfile(
        raw=raw_rates(stats),
        bands=band_report(stats, k_list),
        spectrum=spectrum_report(stats, range(1, m_max + 1)),
        decades=decades,
        lengths=length_report(stats, k_list, range(1, m_max + 1)),
        wv=recovery,
        calibration=calibration,
        decomposition=decomposition,
        fingerprints=fingerprints,
        stage_counts=stage_counts,
    )
    return profile, stats


# -- before/after comparison -----------------------------------------------

IMPROVEMENT_RANGE = (100_000, 1_000_000)


@dataclass(frozen=True)
class Thresholds:
    token_rate_pp: Optional[Fraction] = Fraction(3)
    type_rate_pp: Optional[Fraction] = None
    hapax_drop_abs: Optional[int] = 10_000_000
    hapax_drop_rel: Optional[Fraction] = None


@dataclass(frozen=True)
class BandDelta:
    k: int
    unrec_token_pct_delta: Fraction
    unrec_type_pct_delta: Fraction
    flagged: bool

    def to_dict(self) -> dict:
        return {"K": self.k, "unrec_token_pp_delta": rate_str(self.unrec_token_pct_delta * 100),
                "unrec_type_pp_delta": rate_str(self.unrec_type_pct_delta * 100),
                "improvement_range": self.flagged}


@dataclass(frozen=True)
class ImprovementReport:
    token_rate_delta: Fraction
    type_rate_delta: Fraction
    band_deltas: list
    hapax_unrec_before: int
    hapax_unrec_after: int
    rare_unrec_before: int
    rare_unrec_after: int
    checks: dict
    warnings: tuple = ()

    @property
    def token_rate_delta_pp(self) -> Fraction:
        return self.token_rate_delta * 100

    @property
    def type_rate_delta_pp(self) -> Fraction:
        return self.type_rate_delta * 100

    @property
    def hapax_drop(self) -> int:
        return self.hapax_unrec_before - self.hapax_unrec_after

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "token_rate_delta_pp": rate_str(self.token_rate_delta_pp),
            "token_rate_delta_exact": _fraction_str(self.token_rate_delta),
            "type_rate_delta_pp": rate_str(self.type_rate_delta_pp),
            "type_rate_delta_exact": _fraction_str(self.type_rate_delta),
            "bands": [b.to_dict() for b in self.band_deltas],
            "hapax_unrec_before": self.hapax_unrec_before,
            "hapax_unrec_after": self.hapax_unrec_after,
            "hapax_drop": self.hapax_drop,
            "rare_unrec_before": self.rare_unrec_before,
            "rare_unrec_after": self.rare_unrec_after,
            "checks": dict(self.checks),
            "passed": self.passed,
            "warnings": list(self.warnings),
        }


def _unrec_types_at(profile: QualityProfile, ms) -> int:
    return sum(r.unrec_types for r in profile.spectrum if r.m in ms)


def compare_profiles(before: QualityProfile, after: QualityProfile,
                     thresholds: Thresholds = Thresholds(), force: bool = False) -> ImprovementReport:
    warnings = []
    if before.fingerprints.get("corpus") != after.fingerprints.get("corpus"):
        if not force:
            raise IncompatibleProfilesError("profiles describe different corpora (use force to compare anyway)")
        warnings.append("corpus fingerprints differ")
    if before.fingerprints.get("chain") != after.fingerprints.get("chain"):
        warnings.append("profiles were produced with different recognizer chains")
    tok = after.raw.token_rate - before.raw.token_rate
    typ = after.raw.type_rate - before.raw.type_rate
    after_bands = {r.k: r for r in after.bands}
    band_deltas = []
    for b in before.bands:
        a = after_bands.get(b.k)
        if a is None:
            continue
        band_deltas.append(BandDelta(
            b.k, a.unrec_token_pct - b.unrec_token_pct, a.unrec_type_pct - b.unrec_type_pct,
            IMPROVEMENT_RANGE[0] <= b.k <= IMPROVEMENT_RANGE[1]))
    rare = set(r.m for r in before.spectrum) & set(r.m for r in after.spectrum)
    hb, ha = _unrec_types_at(before, {1}), _unrec_types_at(after, {1})
    checks = {}
    if thresholds.token_rate_pp is not None:
        checks["token_rate"] = tok * 100 >= thresholds.token_rate_pp
    if thresholds.type_rate_pp is not None:
        checks["type_rate"] = typ * 100 >= thresholds.type_rate_pp
    if thresholds.hapax_drop_rel is not None:
        checks["hapax_drop"] = hb > 0 and Fraction(hb - ha, hb) >= thresholds.hapax_drop_rel
    elif thresholds.hapax_drop_abs is not None:
        checks["hapax_drop"] = hb - ha >= thresholds.hapax_drop_abs
    return ImprovementReport(tok, typ, band_deltas, hb, ha, _unrec_types_at(before, rare),
                             _unrec_types_at(after, rare), checks, tuple(warnings))
