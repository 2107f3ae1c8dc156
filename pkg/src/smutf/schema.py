"""Tabular schemas: CSV ingestion, cell/column type detection, value sampling.

A schema is an ordered list of named columns, each holding the raw string
cells of one table column (empty string marks a missing cell). Tables are
row-capped at load time by uniform whole-row sampling so that downstream
feature extraction sees aligned rows.
"""

from __future__ import annotations

import csv
import random
import re
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum

from .errors import DataError

DEFAULT_ROW_CAP = 100

CURRENCY_SYMBOLS = "$€£¥"  # $, euro, pound, yen


class DataTypeLabel(Enum):
    URL = "url"
    NUMERIC = "numeric"
    DATE = "date"
    STRING = "string"


@dataclass(frozen=True)
class Column:
    """One table column: a name (possibly empty or masked) and raw cells."""

    name: str
    values: tuple[str, ...]

    def non_empty(self) -> list[str]:
        return [v for v in self.values if v != ""]


@dataclass(frozen=True)
class Schema:
    name: str
    columns: tuple[Column, ...]

    def __post_init__(self):
        if not self.columns:
            raise DataError("schema %r has no columns" % self.name)

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]


def load_csv(path: str, row_cap: int = DEFAULT_ROW_CAP, seed: int = 0) -> Schema:
    """Load an RFC 4180 CSV (header row required) into a Schema.

    Tables with more than ``row_cap`` data rows are reduced to a uniform
    random sample of whole rows chosen with ``seed``; original row order is
    kept so cross-column alignment is preserved. Empty header cells are
    renamed to ``col{index}``.
    """
    if row_cap < 1:
        raise DataError("row_cap must be positive, got %d" % row_cap)
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh, strict=True)
            try:
                rows = list(reader)
            except csv.Error as exc:
                raise DataError("malformed CSV in %s: %s" % (path, exc)) from exc
    except OSError as exc:
        raise DataError("cannot read %s: %s" % (path, exc)) from exc

    if not rows or not any(cell != "" for cell in rows[0]):
        raise DataError("%s has no header row with columns" % path)

    header = [name if name != "" else "col%d" % i for i, name in enumerate(rows[0])]
    n_cols = len(header)
    data = rows[1:]
    if len(data) > row_cap:
        rng = random.Random(seed)
        keep = sorted(rng.sample(range(len(data)), row_cap))
        data = [data[i] for i in keep]

    # Ragged rows: pad short ones with missing markers, drop extra cells.
    cells = [[(row[j] if j < len(row) else "") for j in range(n_cols)] for row in data]
    columns = tuple(
        Column(name=header[j], values=tuple(row[j] for row in cells))
        for j in range(n_cols)
    )
    return Schema(name=path, columns=columns)


_URL_RE = re.compile(r"^(https?|ftp)://\S+$", re.IGNORECASE)

_DATE_FORMATS = (
    "%Y-%m-%d",
    "%Y/%m/%d",
    "%d-%m-%Y",
    "%d/%m/%Y",
    "%m/%d/%Y",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%d %b %Y",
    "%d %B %Y",
    "%b %d, %Y",
    "%B %d, %Y",
)


def _parses_as_date(text: str) -> bool:
    for fmt in _DATE_FORMATS:
        try:
            datetime.strptime(text, fmt)
            return True
        except ValueError:
            continue
    return False


def strip_currency(text: str) -> tuple[str, bool]:
    """Remove one leading currency symbol; report whether one was present."""
    if text and text[0] in CURRENCY_SYMBOLS:
        return text[1:], True
    return text, False


def parse_numeric(cell: str) -> float | None:
    """Parse a cell as a decimal number under the same rules as type detection.

    Strips one leading currency symbol, thousands-separator commas, one
    leading sign, and an optional trailing ``%``. Returns None when the cell
    is not numeric.
    """
    s = cell.strip()
    s, _ = strip_currency(s)
    s = s.replace(",", "")
    if s.endswith("%"):
        s = s[:-1]
    if not any(ch.isdigit() for ch in s):
        return None
    if s and s[0] in "+-":
        body = s[1:]
    else:
        body = s
    if not re.fullmatch(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?", body):
        return None
    try:
        return float(s)
    except ValueError:
        return None


def has_currency_prefix(cell: str) -> bool:
    s = cell.strip()
    return bool(s) and s[0] in CURRENCY_SYMBOLS


def detect_cell_type(cell: str) -> DataTypeLabel:
    """Classify one cell. Total function; empty cells are STRING.

    Priority is URL > DATE > NUMERIC: a URL is never a date, and dates made
    of digits must not fall through to numeric.
    """
    s = cell.strip()
    if not s:
        return DataTypeLabel.STRING
    if _URL_RE.match(s):
        return DataTypeLabel.URL
    if _parses_as_date(s):
        return DataTypeLabel.DATE
    if parse_numeric(s) is not None:
        return DataTypeLabel.NUMERIC
    return DataTypeLabel.STRING


COLUMN_TYPE_SHARE = 0.9


def detect_column_type(col: Column) -> DataTypeLabel:
    """Dominant cell type of a column.

    A non-STRING label wins only with a >= 0.9 share of the non-empty cells,
    so a few dirty cells cannot flip the type. All-empty columns are STRING.
    """
    cells = col.non_empty()
    if not cells:
        return DataTypeLabel.STRING
    counts = {label: 0 for label in DataTypeLabel}
    for cell in cells:
        counts[detect_cell_type(cell)] += 1
    total = len(cells)
    for label in (DataTypeLabel.URL, DataTypeLabel.DATE, DataTypeLabel.NUMERIC):
        if counts[label] / total >= COLUMN_TYPE_SHARE:
            return label
    return DataTypeLabel.STRING


def sample_text_values(col: Column, k: int = 20, seed: int = 0) -> list[str]:
    """Uniform sample without replacement of min(k, #non-empty) values."""
    if k < 1:
        raise ValueError("k must be >= 1, got %d" % k)
    pool = col.non_empty()
    if len(pool) <= k:
        return list(pool)
    return random.Random(seed).sample(pool, k)
