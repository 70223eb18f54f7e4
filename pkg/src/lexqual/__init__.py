"""Lexical quality estimation for large OCRed text collections."""

__version__ = "0.1.0"

from .errors import LexqualError
from .freq import FrequencyTable, count_tokens, select_band, spectrum
from .ingest import DocumentMeta, TokenRecord, ingest_corpus, load_manifest, tokenize
from .profile import QualityProfile, build_profile, compare_profiles
from .recognize import ChainConfig, Lexicon, Verdict, classify_table, normalize_wv, recognize_word

__all__ = [
    "ChainConfig",
    "DocumentMeta",
    "FrequencyTable",
    "Lexicon",
    "LexqualError",
    "QualityProfile",
    "TokenRecord",
    "Verdict",
    "build_profile",
    "classify_table",
    "compare_profiles",
    "count_tokens",
    "ingest_corpus",
    "load_manifest",
    "normalize_wv",
    "recognize_word",
    "select_band",
    "spectrum",
    "tokenize",
]
