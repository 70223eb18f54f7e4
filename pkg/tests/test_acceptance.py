"""Acceptance suite: one test per criterion, each timed against its budget.

A pass/fail line per criterion is printed in the terminal summary.
"""

import time
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import digi_counts as digi
from lexqual.cli import main
from lexqual.errors import (
    AdapterCrashError,
    AdapterTimeoutError,
    CountMismatchError,
    MalformedReplyError,
)
from lexqual.freq import FrequencyTable, count_sharded, count_tokens, spectrum
from lexqual.profile import (
    OovCalibration,
    Thresholds,
    build_profile,
    compare_profiles,
    decompose,
    raw_rates,
    wv_recovery,
)
from lexqual.recognize import AdapterConfig, ChainConfig, Lexicon, classify_table, external_recognize_batch, \
    normalize_wv
from lexqual.simulate import NoiseModel, corrupt_corpus, repair_tokens
from lexqual.synth import make_lexicon, random_counts, uniform_stream, write_corpus, zipf_indices, zipf_stream
from oracles import naive_count, naive_spectrum


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.2f}s, budget {self.seconds}s"


def pp(x):
    return float(x) * 100


def test_published_count_replay():
    """1. published counts replay through the report arithmetic"""
    with Budget(1.0):
        rates = raw_rates(digi.raw())
        bands = digi.band_rows()
        spec = digi.spectrum_rows()
        wv = digi.recovery()
        u_top = bands[-1].unrec_tokens
        u_rare = sum(r.unrec_tokens for r in spec)
        cal = OovCalibration.from_token_bounds(*digi.OOV_TOKENS, u_top - wv.recovered_tokens)
        d = decompose(digi.N, rates.recognized_tokens, u_top, u_rare, wv.recovered_tokens, cal,
                      bands[-1].k, spec[-1].m)
    assert abs(pp(rates.token_rate) - 69.3) <= 0.05
    assert abs(pp(bands[0].coverage) - 33.1) <= 0.05
    assert abs(pp(spec[0].unrec_type_pct) - 98.0) <= 0.05
    assert abs(sum(r.unrec_tokens for r in spec[1:]) - 83_380_000) <= 50_000
    assert d.hard_errors_low == d.unrec_rare == 225_583_729
    assert d.unrec_mid == 79_882_818 == digi.U - u_top - u_rare
    lo, hi = pp(d.approx_rate_low), pp(d.approx_rate_high)
    assert abs(lo - 74) <= 1 and abs(hi - 75) <= 1


def test_spectrum_identities():
    """2. spectrum identities on 1000 random tables"""
    with Budget(10.0):
        for seed in range(1000):
            counts = random_counts(seed, "zipf" if seed % 2 else "uniform")
            table = FrequencyTable(counts)
            spec = spectrum(table)
            assert sum(spec.classes.values()) == table.n_types == len(counts)
            assert sum(m * v for m, v in spec.classes.items()) == table.n_tokens == sum(counts.values())
            assert dict(spec.classes) == naive_spectrum(counts)


def test_counting_oracle_10m(tmp_path):
    """3. sharded counting of 10M tokens equals a naive count; 10M pipeline end to end"""
    forms = np.asarray(make_lexicon(200_000, seed=21), dtype=object)
    stream = forms[zipf_indices(len(forms), 10_000_000, seed=22)].tolist()
    expected = naive_count(stream)
    n = len(stream)
    configs = [
        [stream],
        [stream[: n // 2], stream[n // 2:]],
        [stream[i:i + 1_000_003] for i in range(0, n, 1_000_003)],
        [stream[i::7] for i in range(7)],
    ]
    for shards in configs:
        assert count_sharded(shards).entries == expected
    spilled = count_tokens(stream[:2_000_000], spill_threshold=50_000, tmpdir=tmp_path)
    assert spilled.entries == naive_count(stream[:2_000_000])

    manifest = write_corpus(tmp_path / "corpus", stream, n_docs=40)
    lexicon = tmp_path / "lex.txt"
    lexicon.write_text("\n".join(forms[:150_000].tolist()) + "\n", encoding="utf-8")
    del stream, configs
    with Budget(60.0):
        code = main(["profile", "--manifest", str(manifest), "--lexicon", str(lexicon),
                     "--threads", "2", "--out", str(tmp_path / "out")])
    assert code == 0
    assert (tmp_path / "out" / "profile.json").exists()


def _wer_corpus(wer, seed=31):
    lexicon = make_lexicon(50_000, seed=seed)
    clean = uniform_stream(lexicon, 100_000, seed=seed + 1)
    noisy, truth = corrupt_corpus(clean, NoiseModel.default(wer, seed + 2), lexicon)
    return lexicon, clean, noisy, truth


@pytest.mark.parametrize("wer", [0.05, 0.20])
def test_noise_oracle_estimation(wer):
    """4. unrecognized rate tracks injected WER minus collisions"""
    with Budget(5.0):
        lexicon, clean, noisy, truth = _wer_corpus(wer)
        chain = ChainConfig(Lexicon(frozenset(lexicon)))
        profile, stats = build_profile(count_tokens(noisy), chain)
    unrec_rate = 1 - profile.raw.token_rate
    target = truth.true_wer - Fraction(truth.collision_count, truth.n_tokens)
    assert abs(pp(unrec_rate - target)) <= 0.5
    assert abs(float(truth.true_wer) - wer) <= 0.01
    free = ~truth.collisions
    verdict_unrec = np.array([not stats.is_recognized(t) for t in noisy])
    assert np.array_equal(verdict_unrec[free], truth.corrupted[free])


def test_wv_recovery_oracle():
    """5. w/v recovery equals the substitution oracle"""
    lexicon = make_lexicon(5_000, seed=41)
    forms = frozenset(lexicon)
    clean = zipf_stream(lexicon, 200_000, seed=42)
    rng = np.random.default_rng(43)
    f = 0.25
    picked = rng.random(len(clean)) < f
    tokens, oracle = [], 0
    for t, p in zip(clean, picked.tolist()):
        if p and "v" in t:
            t = t.replace("v", "w")
            if t not in forms:
                oracle += 1
        tokens.append(t)
    assert oracle > 10_000
    table = count_tokens(tokens)
    chain = ChainConfig(Lexicon(forms))
    stats = classify_table(table, chain.with_wv(False))
    rec = wv_recovery(stats, chain, band_k=table.n_types)
    assert rec.recovered_tokens == oracle
    assert wv_recovery(stats, chain.with_wv(False), band_k=table.n_types).recovered_tokens == 0
    _normalize_wv_properties()


@settings(max_examples=500, deadline=None)
@given(st.text())
def _normalize_wv_properties(s):
    n = normalize_wv(s)
    assert normalize_wv(n) == n
    assert "w" not in n and "W" not in n
    assert len(n) == len(s)


def test_determinism(tmp_path):
    """6. repeated pipeline runs give byte-identical artifacts"""
    lexicon = make_lexicon(3_000, seed=51)
    tokens = zipf_stream(lexicon, 120_000, seed=52)
    manifest = write_corpus(tmp_path / "corpus", tokens, n_docs=12)
    lex = tmp_path / "lex.txt"
    lex.write_text("\n".join(lexicon[:2_500]) + "\n", encoding="utf-8")
    dump = tmp_path / "clean.txt"
    dump.write_text("\n".join(tokens[:30_000]) + "\n", encoding="utf-8")

    def run(tag, threads):
        out = tmp_path / tag
        common = ["--threads", str(threads)]
        assert main(["freq", "--manifest", str(manifest), *common, "--out", str(out / "freq")]) == 0
        assert main(["profile", "--manifest", str(manifest), "--lexicon", str(lex), *common,
                     "--bands", "10,100,1000", "--band-k", "100", "--format", "csv",
                     "--out", str(out / "profile")]) == 0
        assert main(["simulate", "--tokens", str(dump), "--wer", "0.1", "--seed", "5", "--lexicon", str(lex),
                     "--bands", "10,100", "--band-k", "50", *common, "--out", str(out / "sim")]) == 0
        return {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}

    first = run("a", 1)
    assert len(first) > 15
    assert run("b", 1) == first
    assert run("c", 4) == first


def test_improvement_detection():
    """7. repair of 30% of corrupted tokens is measured exactly"""
    lexicon, clean, noisy, truth = _wer_corpus(0.20)
    chain = ChainConfig(Lexicon(frozenset(lexicon)))
    before, _ = build_profile(count_tokens(noisy), chain)

    def repaired(fraction, seed):
        fixed, idx = repair_tokens(noisy, clean, truth, fraction, seed=seed)
        after, _ = build_profile(count_tokens(fixed), chain)
        # every repaired non-colliding token moves from unrecognized to recognized
        direct = Fraction(int((~truth.collisions[idx]).sum()), len(clean))
        return after, direct

    thresholds = Thresholds(hapax_drop_abs=None)
    for fraction, seed in [(Fraction(3, 10), 1), (Fraction(1, 10), 2), (Fraction(3, 20), 3)]:
        after, direct = repaired(fraction, seed)
        report = compare_profiles(before, after, thresholds)
        assert report.token_rate_delta == direct == after.raw.token_rate - before.raw.token_rate
        assert report.type_rate_delta == after.raw.type_rate - before.raw.type_rate
        assert report.checks["token_rate"] == (direct * 100 >= 3)
    after, direct = repaired(Fraction(3, 10), 1)
    assert direct * 100 >= 3
    exact = Thresholds(token_rate_pp=direct * 100, hapax_drop_abs=None)
    assert compare_profiles(before, after, exact).checks["token_rate"]
    above = Thresholds(token_rate_pp=direct * 100 + Fraction(1, 10**9), hapax_drop_abs=None)
    assert not compare_profiles(before, after, above).checks["token_rate"]


WORDS = ["talo", "Wien", "ylös-kannetaan", "ä", "kaupunki", "wapaa", "x"]


def test_adapter_conformance(tmp_path, fake_adapter):
    """8. external adapter protocol conformance"""

    def cfg(*mode, **kw):
        return AdapterConfig(fake_adapter(*mode), **{"timeout": 10.0, **kw})

    assert external_recognize_batch(WORDS, cfg("identity")) == [(w, True) for w in WORDS]
    assert external_recognize_batch(WORDS, cfg("reject")) == [(w, False) for w in WORDS]
    lex = tmp_path / "lex.txt"
    lex.write_text("talo\nwapaa\n", encoding="utf-8")
    for batch, procs in [(1, 1), (3, 2), (1000, 1), (2, 5)]:
        out = external_recognize_batch(WORDS, cfg("lexicon", lex, batch_size=batch, processes=procs))
        assert out == [(w, w in {"talo", "wapaa"}) for w in WORDS]
    log = tmp_path / "seen.log"
    many = [f"s{i}" for i in range(12_345)]
    assert [w for w, _ in external_recognize_batch(many, cfg("log", log, batch_size=1000))] == many
    assert log.read_text().split() == ["12345"]
    for mode, error in [(("short",), CountMismatchError), (("extra",), CountMismatchError),
                        (("crash", 1), AdapterCrashError), (("garbage", 0), MalformedReplyError),
                        (("reorder",), MalformedReplyError)]:
        with pytest.raises(error):
            external_recognize_batch(WORDS[:3], cfg(*mode))
    with pytest.raises(AdapterTimeoutError):
        external_recognize_batch(WORDS, cfg("hang", 1, timeout=0.5))
