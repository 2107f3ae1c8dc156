"""Per-column value statistics and their pairwise normalized differences.

Each column yields a fixed 26-slot vector: a 4-way type one-hot, six string
length statistics, six numeric statistics gated by a presence flag, and
eight character-composition statistics gated by a presence flag. Pairs are
compared elementwise with |a-b| / (|a|+|b|+eps), which is total, bounded to
[0,1), symmetric, and zero on identical inputs.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

from .embedding import embed_value_set
from .schema import Column, DataTypeLabel, detect_column_type, parse_numeric, sample_text_values

DEFAULT_EPSILON = 1e-9

VALUE_FEATURE_NAMES = (
    "type_url",
    "type_numeric",
    "type_date",
    "type_string",
    "length_mean",
    "length_min",
    "length_max",
    "length_variance",
    "length_cv",
    "unique_length_ratio",
    "numeric_mean",
    "numeric_min",
    "numeric_max",
    "numeric_variance",
    "numeric_cv",
    "numeric_unique_ratio",
    "numeric_present",
    "whitespace_ratio_mean",
    "whitespace_ratio_cv",
    "punctuation_ratio_mean",
    "punctuation_ratio_cv",
    "special_ratio_mean",
    "special_ratio_cv",
    "numeric_ratio_mean",
    "numeric_ratio_cv",
    "text_present",
)

_TYPE_ORDER = (
    DataTypeLabel.URL,
    DataTypeLabel.NUMERIC,
    DataTypeLabel.DATE,
    DataTypeLabel.STRING,
)

_ASCII_PUNCT = frozenset(string.punctuation)


@dataclass(frozen=True)
class ColumnValueFeatures:
    type_label: DataTypeLabel
    length: tuple[float, ...]  # mean, min, max, variance, cv, unique_length_ratio
    numeric: tuple[float, ...]  # mean, min, max, variance, cv, unique_ratio
    numeric_present: int
    character: tuple[float, ...]  # mean/cv of whitespace, punct, special, digit ratios
    text_present: int

    def as_array(self) -> np.ndarray:
        onehot = [1.0 if self.type_label is t else 0.0 for t in _TYPE_ORDER]
        return np.array(
            onehot
            + list(self.length)
            + list(self.numeric)
            + [float(self.numeric_present)]
            + list(self.character)
            + [float(self.text_present)],
            dtype=np.float64,
        )

    def as_dict(self) -> dict[str, float]:
        return dict(zip(VALUE_FEATURE_NAMES, self.as_array().tolist()))


def _spread_stats(values: list[float]) -> tuple[float, float, float, float, float]:
    """mean, min, max, population variance, cv (stddev / |mean|, 0 at mean 0)."""
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    var = float(arr.var())
    cv = (var ** 0.5) / abs(mean) if mean != 0.0 else 0.0
    return mean, float(arr.min()), float(arr.max()), var, cv


def length_features(col: Column) -> tuple[float, ...]:
    """Statistics of cell character counts over non-empty cells."""
    cells = col.non_empty()
    if not cells:
        return (0.0,) * 6
    lengths = [len(c) for c in cells]
    mean, lo, hi, var, cv = _spread_stats(lengths)
    unique_ratio = len(set(lengths)) / len(cells)
    return (mean, lo, hi, var, cv, unique_ratio)


def numeric_features(col: Column, type_label: DataTypeLabel | None = None) -> tuple[tuple[float, ...], int]:
    """Parsed-value statistics; zeros with flag 0 unless the column is numeric."""
    if type_label is None:
        type_label = detect_column_type(col)
    if type_label != DataTypeLabel.NUMERIC:
        return (0.0,) * 6, 0
    parsed = [v for v in (parse_numeric(c) for c in col.non_empty()) if v is not None]
    if not parsed:
        return (0.0,) * 6, 1
    mean, lo, hi, var, cv = _spread_stats(parsed)
    unique_ratio = len(set(parsed)) / len(parsed)
    return (mean, lo, hi, var, cv, unique_ratio), 1


def _char_ratios(cell: str) -> tuple[float, float, float, float]:
    n = len(cell)
    ws = punct = special = digit = 0
    for ch in cell:
        if ch.isspace():
            ws += 1
        elif ch in _ASCII_PUNCT:
            punct += 1
        elif not ch.isalnum():
            special += 1
        if ch.isdigit():
            digit += 1
    return ws / n, punct / n, special / n, digit / n


def character_features(col: Column, type_label: DataTypeLabel | None = None) -> tuple[tuple[float, ...], int]:
    """Mean and cv of whitespace/punctuation/special/digit ratios per cell.

    Numeric columns take the zeros-with-flag-0 path; everything else
    (including dates and URLs, which are strings) is measured.
    """
    if type_label is None:
        type_label = detect_column_type(col)
    if type_label == DataTypeLabel.NUMERIC:
        return (0.0,) * 8, 0
    cells = col.non_empty()
    if not cells:
        return (0.0,) * 8, 1
    ratios = np.array([_char_ratios(c) for c in cells], dtype=np.float64)
    out = []
    for k in range(4):
        mean = float(ratios[:, k].mean())
        std = float(ratios[:, k].std())
        out.append(mean)
        out.append(std / abs(mean) if mean != 0.0 else 0.0)
    return tuple(out), 1


def column_value_features(col: Column, type_label: DataTypeLabel | None = None) -> ColumnValueFeatures:
    if type_label is None:
        type_label = detect_column_type(col)
    numeric, numeric_present = numeric_features(col, type_label)
    character, text_present = character_features(col, type_label)
    return ColumnValueFeatures(
        type_label=type_label,
        length=length_features(col),
        numeric=numeric,
        numeric_present=numeric_present,
        character=character,
        text_present=text_present,
    )


def normalized_abs_diff(fa: np.ndarray, fb: np.ndarray, eps: float = DEFAULT_EPSILON) -> np.ndarray:
    """Elementwise |a-b| / (|a|+|b|+eps); in [0,1), exactly symmetric."""
    if eps <= 0:
        raise ValueError("eps must be positive, got %r" % eps)
    fa = np.asarray(fa, dtype=np.float64)
    fb = np.asarray(fb, dtype=np.float64)
    return np.abs(fa - fb) / (np.abs(fa) + np.abs(fb) + eps)


def value_pair(
    fa: ColumnValueFeatures, fb: ColumnValueFeatures, eps: float = DEFAULT_EPSILON
) -> np.ndarray:
    """Normalized difference vector over the fixed feature serialization."""
    return normalized_abs_diff(fa.as_array(), fb.as_array(), eps)


def value_embedding(
    provider, col: Column, seed: int, type_label: DataTypeLabel | None = None
) -> np.ndarray:
    """Mean embedding of up to 20 sampled text values; zero vector for numeric columns."""
    if type_label is None:
        type_label = detect_column_type(col)
    if type_label == DataTypeLabel.NUMERIC:
        dim = provider.dim if provider.dim is not None else 0
        return np.zeros(dim or 1, dtype=np.float64)
    return embed_value_set(provider, sample_text_values(col, 20, seed))
