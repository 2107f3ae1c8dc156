"""Column-name similarity: five features per pair, all symmetric, all bounded.

The block is [embedding cosine; BLEU; edit similarity; LCS ratio; containment]
in that fixed order. String metrics are normalized to [0,1] so the classifier
sees scale-stable inputs; the embedding cosine lives in [-1,1].
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .embedding import cosine

NAME_FEATURE_NAMES = ("name_cos", "name_bleu", "name_edit", "name_lcs", "name_one_in_one")


@dataclass(frozen=True)
class NameFeatureVector:
    cos_name: float
    bleu: float
    edit_sim: float
    lcs_ratio: float
    one_in_one: int

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.cos_name, self.bleu, self.edit_sim, self.lcs_ratio, self.one_in_one],
            dtype=np.float64,
        )


def tokenize_name(name: str) -> list[str]:
    """Lowercase tokens: split on non-alphanumeric runs and camelCase bumps."""
    split = re.sub(r"(?<=[a-z])(?=[A-Z])", " ", name)
    return [t for t in re.split(r"[\W_]+", split.lower()) if t]


def _ngram_precision(candidate: list[str], reference: list[str], n: int) -> float:
    """Modified (clipped) n-gram precision with add-one smoothing for n >= 2."""
    cand_grams = Counter(tuple(candidate[i : i + n]) for i in range(len(candidate) - n + 1))
    ref_grams = Counter(tuple(reference[i : i + n]) for i in range(len(reference) - n + 1))
    total = sum(cand_grams.values())
    clipped = sum(min(count, ref_grams[gram]) for gram, count in cand_grams.items())
    if n >= 2:
        return (clipped + 1) / (total + 1)
    return clipped / total if total else 0.0


def _bleu_directed(candidate: list[str], reference: list[str]) -> float:
    if not candidate or not reference:
        return 0.0
    max_n = min(4, len(candidate))
    log_sum = 0.0
    for n in range(1, max_n + 1):
        p = _ngram_precision(candidate, reference, n)
        if p == 0.0:
            return 0.0
        log_sum += math.log(p)
    score = math.exp(log_sum / max_n)
    c, r = len(candidate), len(reference)
    if c < r:
        score *= math.exp(1 - r / c)
    return score


def bleu_score(a: str, b: str) -> float:
    """Token-level BLEU, symmetrized by averaging both directions."""
    ta, tb = tokenize_name(a), tokenize_name(b)
    return (_bleu_directed(ta, tb) + _bleu_directed(tb, ta)) / 2.0


def damerau_levenshtein(a: str, b: str) -> int:
    """Unrestricted Damerau-Levenshtein distance (adjacent transpositions).

    Minimum number of insertions, deletions, substitutions and adjacent
    transpositions turning ``a`` into ``b``; a true metric, unlike the
    restricted optimal-string-alignment variant.
    """
    if a == b:
        return 0
    la, lb = len(a), len(b)
    if not la:
        return lb
    if not lb:
        return la
    inf = la + lb
    last_row_of: dict[str, int] = {}
    # matrix with a sentinel border at index 0; strings are 1-based at +1
    h = [[inf] * (lb + 2) for _ in range(la + 2)]
    h[1][0:] = [inf] + list(range(lb + 1))
    for i in range(1, la + 1):
        h[i + 1][0] = inf
        h[i + 1][1] = i
    for i in range(1, la + 1):
        last_match_col = 0
        for j in range(1, lb + 1):
            i1 = last_row_of.get(b[j - 1], 0)
            j1 = last_match_col
            if a[i - 1] == b[j - 1]:
                cost = 0
                last_match_col = j
            else:
                cost = 1
            h[i + 1][j + 1] = min(
                h[i][j] + cost,  # substitution / match
                h[i + 1][j] + 1,  # insertion
                h[i][j + 1] + 1,  # deletion
                h[i1][j1] + (i - i1 - 1) + 1 + (j - j1 - 1),  # transposition
            )
        last_row_of[a[i - 1]] = i
    return h[la + 1][lb + 1]


def edit_similarity(a: str, b: str) -> float:
    """1 - normalized Damerau-Levenshtein on lowercased names; both empty -> 1."""
    la, lb = a.lower(), b.lower()
    longest = max(len(la), len(lb))
    if longest == 0:
        return 1.0
    return 1.0 - damerau_levenshtein(la, lb) / longest


def lcs_length(a: str, b: str) -> int:
    """Character-level longest common subsequence length (two-row DP)."""
    if not a or not b:
        return 0
    if len(b) > len(a):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for ch in a:
        cur = [0]
        for j, cb in enumerate(b, start=1):
            if ch == cb:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def lcs_ratio(a: str, b: str) -> float:
    """LCS length over the longer name's length; either empty -> 0."""
    la, lb = a.lower(), b.lower()
    longest = max(len(la), len(lb))
    if longest == 0:
        return 0.0
    return lcs_length(la, lb) / longest


def one_in_one(a: str, b: str) -> int:
    """1 iff one lowercased name contains the other.

    The empty string only counts as contained when both names are empty.
    """
    la, lb = a.lower(), b.lower()
    if not la or not lb:
        return 1 if la == lb else 0
    return 1 if (la in lb or lb in la) else 0


def name_features(provider, a: str, b: str) -> NameFeatureVector:
    return NameFeatureVector(
        cos_name=cosine(provider.embed(a), provider.embed(b)),
        bleu=bleu_score(a, b),
        edit_sim=edit_similarity(a, b),
        lcs_ratio=lcs_ratio(a, b),
        one_in_one=one_in_one(a, b),
    )
