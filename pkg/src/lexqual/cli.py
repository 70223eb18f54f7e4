"""``lexqual`` command line: ingest, freq, analyze, calibrate, profile,
compare, simulate and report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .errors import ConfigError, LexqualError
from .freq import count_tokens, read_table, spectrum, write_spectrum
from .ingest import load_manifest, read_token_dump, write_token_dump, iter_document_tokens
from .pipeline import CorpusCounts, read_counts, scan_corpus, write_counts
from .profile import (
    DEFAULT_BAND_K,
    DEFAULT_M_MAX,
    DEFAULT_BANDS,
    OovCalibration,
    QualityProfile,
    Thresholds,
    build_profile,
    calibrate_oov,
    compare_profiles,
    corpus_fingerprint,
    pct_str,
    rate_str,
)
from .recognize import AdapterConfig, AffixRuleSet, ChainConfig, Lexicon, classify_table
from .simulate import NoiseModel, corrupt_corpus, estimator_error

logger = logging.getLogger("lexqual")


# -- argument helpers ------------------------------------------------------

def _year_range(text: str):
    lo, sep, hi = text.partition(":")
    try:
        lo_i, hi_i = int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI years, got {text!r}") from None
    if not sep or lo_i > hi_i:
        raise argparse.ArgumentTypeError(f"expected LO:HI with LO <= HI, got {text!r}")
    return lo_i, hi_i


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return n


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("inputs")
    g.add_argument("--manifest", type=Path, help="document manifest (TSV)")
    g.add_argument("--years", type=_year_range, metavar="LO:HI", help="inclusive publication-year range")
    g.add_argument("--tokens", type=Path, help="token dump, one surface per line")
    g.add_argument("--table", type=Path, help="frequency-table file")
    g.add_argument("--counts", type=Path, help="directory written by 'freq'")
    g.add_argument("--keep-digits", action="store_true", help="keep digit runs as tokens")
    g.add_argument("--fold-case", action="store_true", help="lowercase before counting")
    g.add_argument("--continue-on-error", action="store_true", help="skip unreadable documents")
    g.add_argument("--spill-threshold", type=_positive, default=5_000_000,
                   help="distinct types held in memory before spilling to LEXQUAL_TMPDIR")
    r = p.add_argument_group("recognizer chain")
    r.add_argument("--lexicon", type=Path, help="lexicon file, one form per line")
    r.add_argument("--affix", type=Path, help="affix rules, strip<TAB>add per line")
    r.add_argument("--affix-max", type=_positive, default=1, help="maximum rule applications")
    r.add_argument("--no-case-variant", action="store_true", help="disable the lowercase-fold stage")
    r.add_argument("--adapter", metavar="CMD", help="external analyzer command")
    r.add_argument("--adapter-batch", type=_positive, default=10_000)
    r.add_argument("--adapter-timeout", type=float, default=60.0)
    r.add_argument("--adapter-processes", type=_positive, default=1)
    r.add_argument("--wv", type=_on_off, default=True, metavar="on|off", help="w->v normalization retry")
    a = p.add_argument_group("analysis")
    a.add_argument("--bands", type=_int_list, default=list(DEFAULT_BANDS), help="comma-separated top-K sizes")
    a.add_argument("--mmax", type=_positive, default=DEFAULT_M_MAX, help="largest rare frequency class")
    a.add_argument("--band-k", type=_positive, default=DEFAULT_BAND_K, help="top band used by the decomposition")
    o = p.add_argument_group("run")
    o.add_argument("--out", type=Path, help="output directory")
    o.add_argument("--threads", type=_positive, default=1)
    o.add_argument("--seed", type=int)
    o.add_argument("--format", choices=("json", "csv"), default="json")
    o.add_argument("-v", "--verbose", action="store_true")
    return p


def _require_files(*paths):
    for p in paths:
        if p is not None and not Path(p).exists():
            raise ConfigError(f"input file not found: {p}")


def _out_dir(args) -> Path:
    if args.out is None:
        raise ConfigError("--out DIR is required")
    try:
        args.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {args.out}: {exc.strerror}") from None
    return args.out


def _chain(args) -> ChainConfig:
    if args.lexicon is None:
        raise ConfigError("--lexicon is required for recognition")
    _require_files(args.lexicon, args.affix)
    affix = AffixRuleSet.from_file(args.affix, args.affix_max) if args.affix else None
    external = None
    if args.adapter:
        try:
            external = AdapterConfig(args.adapter, args.adapter_batch, args.adapter_timeout, args.adapter_processes)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return ChainConfig(Lexicon.from_file(args.lexicon), affix, not args.no_case_variant, args.wv, external)


def _load_counts(args) -> CorpusCounts:
    _require_files(args.manifest, args.tokens, args.table, args.counts)
    if args.counts is not None:
        return read_counts(args.counts)
    if args.table is not None:
        return CorpusCounts(read_table(args.table), {}, [])
    if args.tokens is not None:
        table = count_tokens(read_token_dump(args.tokens), spill_threshold=args.spill_threshold,
                             fold_case=args.fold_case)
        return CorpusCounts(table, {}, [])
    if args.manifest is not None:
        return scan_corpus(load_manifest(args.manifest), args.years, keep_digits=args.keep_digits,
                           fold_case=args.fold_case, threads=args.threads,
                           continue_on_error=args.continue_on_error, spill_threshold=args.spill_threshold)
    raise ConfigError("no input: give --manifest, --tokens, --table or --counts")


def _corpus_id(counts: CorpusCounts) -> str:
    if counts.documents:
        return counts.fingerprint
    return corpus_fingerprint(n_tokens=counts.table.n_tokens)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _emit_profile(profile: QualityProfile, out: Path, fmt: str) -> None:
    profile.write(out / "profile.json")
    if fmt == "csv":
        profile.write_csv(out / "csv")
    for line in profile.summary_lines():
        print(line)


# -- subcommands -----------------------------------------------------------

def cmd_ingest(args) -> int:
    if args.manifest is None:
        raise ConfigError("ingest needs --manifest")
    _require_files(args.manifest)
    out = _out_dir(args)
    metas = load_manifest(args.manifest)
    docs = []

    def surfaces():
        for meta, tokens in iter_document_tokens(metas, args.years, keep_digits=args.keep_digits,
                                                 continue_on_error=args.continue_on_error,
                                                 threads=args.threads):
            docs.append((meta.doc_id, meta.year, len(tokens)))
            yield from tokens

    n = write_token_dump(surfaces(), out / "tokens.txt")
    with open(out / "documents.tsv", "w", encoding="utf-8", newline="\n") as f:
        for doc_id, year, count in docs:
            f.write(f"{doc_id}\t{year}\t{count}\n")
    print(f"documents {len(docs):,}  tokens N={n:,}")
    return 0


def cmd_freq(args) -> int:
    out = _out_dir(args)
    counts = _load_counts(args)
    write_counts(counts, out)
    write_spectrum(spectrum(counts.table), out / "spectrum.tsv")
    print(f"tokens N={counts.table.n_tokens:,}  types V={counts.table.n_types:,}")
    return 0


def cmd_analyze(args) -> int:
    out = _out_dir(args)
    chain = _chain(args)
    counts = _load_counts(args)
    stats = classify_table(counts.table, chain)
    with open(out / "verdicts.tsv", "w", encoding="utf-8", newline="\n") as f:
        f.write("#surface\tcount\tstage\tnormalized_form\n")
        for surface, count in counts.table.ranked():
            v = stats.verdicts[surface]
            f.write(f"{surface}\t{count}\t{v.stage.value}\t{v.normalized_form or ''}\n")
    summary = {
        "tokens": stats.n_tokens,
        "types": stats.n_types,
        "recognized_tokens": stats.recognized_tokens,
        "recognized_types": stats.recognized_types,
        "token_rate": rate_str(stats.token_rate),
        "type_rate": rate_str(stats.type_rate),
        "empty": stats.empty,
        "stages": {s.value: {"types": stats.stage_types[s], "tokens": stats.stage_tokens[s]}
                   for s in stats.stage_types},
        "chain": stats.chain_fingerprint,
    }
    _write_json(out / "recognition.json", summary)
    print(f"tokens N={stats.n_tokens:,}  types V={stats.n_types:,}")
    print(f"token rate {pct_str(stats.token_rate)} %  type rate {pct_str(stats.type_rate)} %")
    return 0


def _parse_reference(text: str):
    name, sep, path = text.partition("=")
    if not sep or not name or not path:
        raise ConfigError(f"--reference expects NAME=TABLE, got {text!r}")
    return name, Path(path)


def cmd_calibrate(args) -> int:
    out = _out_dir(args)
    refs = [_parse_reference(r) for r in args.reference]
    stats = {}
    if refs:
        chain = _chain(args)
        _require_files(*(p for _, p in refs))
        for name, path in refs:
            stats[name] = classify_table(read_table(path), chain.with_wv(False))
    cal = calibrate_oov(stats, use_defaults=not args.no_default_calibration)
    _write_json(out / "calibration.json", cal.to_dict())
    for name, rate in cal.provenance:
        print(f"{name}: token OOV rate {pct_str(rate)} %")
    print(f"OOV interval {pct_str(cal.low)}-{pct_str(cal.high)} % ({cal.source})")
    return 0


def _load_calibration(args):
    if args.calibration is None:
        return None
    _require_files(args.calibration)
    try:
        return OovCalibration.from_dict(json.loads(args.calibration.read_text(encoding="utf-8")))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{args.calibration}: invalid calibration file ({exc!r})") from None


def _profile(args, counts: CorpusCounts, chain: ChainConfig, calibration=None):
    try:
        return build_profile(counts.table, chain, decade_tables=counts.decades, k_list=args.bands,
                             m_max=args.mmax, band_k=args.band_k, calibration=calibration,
                             use_default_calibration=not args.no_default_calibration,
                             corpus_id=_corpus_id(counts))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_profile(args) -> int:
    out = _out_dir(args)
    chain = _chain(args)
    calibration = _load_calibration(args)
    if calibration is None and args.no_default_calibration:
        calibrate_oov([], use_defaults=False)
    counts = _load_counts(args)
    profile, _ = _profile(args, counts, chain, calibration)
    _emit_profile(profile, out, args.format)
    return 0


def cmd_compare(args) -> int:
    _require_files(args.before, args.after)
    before, after = QualityProfile.load(args.before), QualityProfile.load(args.after)
    thresholds = Thresholds(
        token_rate_pp=Fraction(args.min_token_pp) if args.min_token_pp is not None else None,
        type_rate_pp=Fraction(args.min_type_pp) if args.min_type_pp is not None else None,
        hapax_drop_abs=args.hapax_drop,
        hapax_drop_rel=Fraction(args.hapax_drop_rel) if args.hapax_drop_rel is not None else None,
    )
    report = compare_profiles(before, after, thresholds, force=args.force)
    if args.out is not None:
        _write_json(_out_dir(args) / "comparison.json", report.to_dict())
    for w in report.warnings:
        print(f"warning: {w}")
    print(f"token rate delta {pct_str(report.token_rate_delta)} pp"
          f"  type rate delta {pct_str(report.type_rate_delta)} pp")
    print(f"unrecognized hapax types {report.hapax_unrec_before:,} -> {report.hapax_unrec_after:,}")
    for name, ok in report.checks.items():
        print(f"{name}: {'PASS' if ok else 'FAIL'}")
    return 0


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    _require_files(args.noise, args.tokens, args.manifest)
    model = NoiseModel.from_file(args.noise) if args.noise else NoiseModel.default()
    if args.wer is not None or args.seed is not None:
        d = model.to_dict()
        if args.wer is not None:
            d["target_wer"] = args.wer
        if args.seed is not None:
            d["seed"] = args.seed
        model = NoiseModel.from_dict(d)
    if args.tokens is not None:
        tokens = read_token_dump(args.tokens)
    elif args.manifest is not None:
        tokens = [t for _, toks in iter_document_tokens(load_manifest(args.manifest), args.years,
                                                         keep_digits=args.keep_digits, threads=args.threads)
                  for t in toks]
    else:
        raise ConfigError("simulate needs --tokens or --manifest")
    chain = _chain(args) if args.lexicon is not None else None
    noisy, truth = corrupt_corpus(tokens, model, chain.lexicon if chain else None)
    model.write(out / "noise_model.json")
    write_token_dump(noisy, out / "noisy_tokens.txt")
    truth.write(out / "ground_truth.gt")
    print(f"tokens N={truth.n_tokens:,}  corrupted {truth.corrupted_count:,} "
          f"(true WER {pct_str(truth.true_wer, 2)} %)  collisions {truth.collision_count:,}")
    if chain is not None:
        table = count_tokens(noisy, spill_threshold=args.spill_threshold)
        counts = CorpusCounts(table, {}, [])
        profile, _ = _profile(args, counts, chain, _load_calibration(args))
        _emit_profile(profile, out, args.format)
        gaps = estimator_error(profile, truth)
        _write_json(out / "estimator_error.json",
                    {k: {"value": rate_str(v), "exact": f"{v.numerator}/{v.denominator}"} for k, v in gaps.items()})
        print(f"raw gap {rate_str(gaps['raw_gap'])}  adjusted gap {rate_str(gaps['adjusted_gap'])}")
    return 0


def cmd_report(args) -> int:
    _require_files(args.profile)
    profile = QualityProfile.load(args.profile)
    if args.out is not None:
        out = _out_dir(args)
        if args.format == "csv":
            profile.write_csv(out)
        else:
            profile.write(out / "profile.json")
    for line in profile.summary_lines():
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="lexqual", description="Lexical quality profiling of OCRed corpora.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("ingest", parents=[common], help="tokenize documents into a token dump").set_defaults(func=cmd_ingest)
    sub.add_parser("freq", parents=[common], help="frequency tables and spectrum").set_defaults(func=cmd_freq)
    sub.add_parser("analyze", parents=[common], help="recognize every word type").set_defaults(func=cmd_analyze)

    p = sub.add_parser("calibrate", parents=[common], help="OOV interval from edited reference corpora")
    p.add_argument("--reference", action="append", default=[], metavar="NAME=TABLE")
    p.add_argument("--no-default-calibration", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("profile", parents=[common], help="full quality profile")
    p.add_argument("--calibration", type=Path, help="calibration.json from 'calibrate'")
    p.add_argument("--no-default-calibration", action="store_true")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("compare", parents=[common], help="before/after improvement check")
    p.add_argument("before", type=Path)
    p.add_argument("after", type=Path)
    p.add_argument("--min-token-pp", type=str, default="3")
    p.add_argument("--min-type-pp", type=str)
    p.add_argument("--hapax-drop", type=int, default=10_000_000)
    p.add_argument("--hapax-drop-rel", type=str)
    p.add_argument("--force", action="store_true", help="compare profiles of different corpora")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", parents=[common], help="inject seeded OCR noise")
    p.add_argument("--noise", type=Path, help="noise model JSON (default: shipped Fraktur confusions)")
    p.add_argument("--wer", type=float, help="override the model's target WER")
    p.add_argument("--calibration", type=Path)
    p.add_argument("--no-default-calibration", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", parents=[common], help="render a stored profile")
    p.add_argument("--profile", type=Path, required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except LexqualError as exc:
        print(f"lexqual: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
