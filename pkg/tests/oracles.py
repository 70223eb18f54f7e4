"""Deliberately naive reference implementations used as test oracles."""

from fractions import Fraction


def naive_count(tokens):
    counts = {}
    for t in tokens:
        counts[t] = counts.get(t, 0) + 1
    return counts


def naive_spectrum(counts):
    out = {}
    for c in counts.values():
        out[c] = out.get(c, 0) + 1
    return out


def naive_top_k(counts, k):
    # selection by repeated scan, no shared sort key with the implementation
    remaining = dict(counts)
    picked = []
    for _ in range(min(k, len(remaining))):
        best = None
        for s, c in remaining.items():
            if best is None or c > best[1] or (c == best[1] and s < best[0]):
                best = (s, c)
        picked.append(best)
        del remaining[best[0]]
    return picked


def naive_base(word, lexicon, rules=(), depth=0, case_variant=True):
    """Stage name of the first lexicon-backed stage accepting ``word``."""
    if word in lexicon:
        return "exact"
    starts = [word]
    if case_variant and word[:1].isupper() and word.lower() != word:
        if word.lower() in lexicon:
            return "case_variant"
        starts.append(word.lower())
    # exhaustive enumeration of every rule sequence up to ``depth``
    level = list(starts)
    for _ in range(depth):
        nxt = []
        for w in level:
            for strip, add in rules:
                if w.endswith(strip):
                    cand = w[: len(w) - len(strip)] + add
                    if cand:
                        if cand in lexicon:
                            return "affix"
                        nxt.append(cand)
        level = nxt
    return None


def naive_verdict(word, lexicon, rules=(), depth=0, case_variant=True, wv=True):
    st = naive_base(word, lexicon, rules, depth, case_variant)
    if st:
        return st
    if wv and ("w" in word or "W" in word):
        norm = word.replace("w", "v").replace("W", "V")
        if naive_base(norm, lexicon, rules, depth, case_variant):
            return "wv_normalized"
    return "none"


def naive_rates(counts, recognized):
    n = sum(counts.values())
    r_tok = sum(c for s, c in counts.items() if recognized(s))
    r_typ = sum(1 for s in counts if recognized(s))
    return Fraction(r_tok, n) if n else Fraction(0), Fraction(r_typ, len(counts)) if counts else Fraction(0)
