"""Published counts for the 1851-1910 Digi word list (FINTWOL columns)."""

from lexqual.profile import BandRow, RawRates, SpectrumRow, WvRecovery

N = 2_385_349_514
R_TOK = 1_652_668_099
V = 177_300_000
U = 732_681_415

# K, unrecognized types, band tokens, unrecognized tokens
BANDS = [
    (1_000, 120, 790_710_542, 61_170_210),
    (10_000, 1_767, 1_317_532_256, 152_388_093),
    (100_000, 31_457, 1_782_767_935, 287_109_856),
    (500_000, 245_267, 1_983_275_749, 387_237_305),
    (1_000_000, 577_974, 2_043_976_151, 427_214_868),
]

# m, V(m,N), unrecognized types
SPECTRUM = [
    (1, 145_056_481, 142_221_709),
    (2, 13_432_504, 12_626_341),
    (3, 5_223_322, 4_808_344),
    (4, 2_820_741, 2_558_814),
    (5, 1_787_757, 1_599_055),
    (6, 1_240_895, 1_098_022),
    (7, 914_598, 804_520),
    (8, 704_610, 614_653),
    (9, 560_762, 485_741),
    (10, 458_734, 394_511),
]

W_TYPES, W_TOKENS = 92_749, 78_438_010
W_UNREC_BEFORE = (91_886, 76_450_673)
W_UNREC_AFTER = (54_049, 24_016_996)

OOV_TOKENS = (50_000_000, 75_000_000)


def raw():
    # type-level recognition at 3.8 % (Omorfi row)
    return RawRates(N, V, R_TOK, round(V * 38 / 1000))


def band_rows():
    return [BandRow(k, k, ut, bt, uk, N) for k, ut, bt, uk in BANDS]


def spectrum_rows():
    return [SpectrumRow(m, v, u) for m, v, u in SPECTRUM]


def recovery():
    return WvRecovery(1_000_000, W_TYPES, W_TOKENS, *W_UNREC_BEFORE, *W_UNREC_AFTER, N)
