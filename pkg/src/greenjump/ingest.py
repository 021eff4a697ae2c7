"""Trade-record parsing and the (year, country, product) export tensor.

Export values are whole US dollars held as Python ints, so totals are exact
no matter how many rows are summed.
"""

from __future__ import annotations

import csv
import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

HS6_RE = re.compile(r"^[0-9]{6}$")
ISO3_RE = re.compile(r"^[A-Z]{3}$")

DEFAULT_SCHEMA = {
    "year": "year",
    "country": "reporter_iso",
    "product": "hs6",
    "value": "trade_value_usd",
}
# Column names of the serialized tensor; also a valid schema for reading it back.
TENSOR_SCHEMA = {"year": "year", "country": "country", "product": "product", "value": "value"}
REQUIRED_ROLES = ("year", "country", "product", "value")


@dataclass(frozen=True, order=True)
class ExportRecord:
    year: int
    country: str
    product: str
    value: int

    def __post_init__(self):
        if self.value < 0:
            raise DataError(f"negative export value {self.value}")
        if not HS6_RE.match(self.product):
            raise DataError(f"product code {self.product!r} is not a 6-digit HS code")
        if not ISO3_RE.match(self.country):
            raise DataError(f"country code {self.country!r} is not an uppercase ISO alpha-3 code")


@dataclass(frozen=True)
class RejectedRow:
    line: int
    reason: str


@dataclass
class TradeCsv:
    """Outcome of reading one trade file: accepted records plus the rejects."""

    path: Path
    records: list[ExportRecord]
    rejected: list[RejectedRow] = field(default_factory=list)

    @property
    def row_count(self) -> int:
        return len(self.records) + len(self.rejected)


def _parse_value(text: str) -> int:
    try:
        value = Decimal(text.strip())
    except InvalidOperation:
        raise ValueError(f"non-numeric value {text!r}") from None
    if not value.is_finite():
        raise ValueError(f"non-finite value {text!r}")
    if value < 0:
        raise ValueError(f"negative value {text!r}")
    if value != value.to_integral_value():
        raise ValueError(f"value {text!r} is not a whole number of dollars")
    return int(value)


def _parse_row(row: Mapping[str, str], schema: Mapping[str, str]) -> ExportRecord:
    year_text = row[schema["year"]].strip()
    if not re.fullmatch(r"[0-9]{4}", year_text):
        raise ValueError(f"malformed year {year_text!r}")
    country = row[schema["country"]].strip().upper()
    if not ISO3_RE.match(country):
        raise ValueError(f"malformed country code {row[schema['country']]!r}")
    product = row[schema["product"]].strip()
    if not HS6_RE.match(product):
        raise ValueError(f"malformed HS6 code {product!r}")
    return ExportRecord(int(year_text), country, product, _parse_value(row[schema["value"]]))


def read_trade_csv(path, schema: Mapping[str, str] | None = None) -> TradeCsv:
    """Parse a trade CSV, keeping per-line rejection reasons.

    ``schema`` maps the roles year/country/product/value to column names;
    unspecified roles fall back to :data:`DEFAULT_SCHEMA`.
    """
    path = Path(path)
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    if not path.is_file():
        raise DataError(f"trade file not found: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        missing = [f"{role} ({schema[role]!r})" for role in REQUIRED_ROLES
                   if schema[role] not in reader.fieldnames]
        if missing:
            raise DataError(f"{path}: missing required column(s): {', '.join(missing)}")
        result = TradeCsv(path, [])
        for row in reader:
            # header is line 1
            line = reader.line_num
            try:
                result.records.append(_parse_row(row, schema))
            except (ValueError, AttributeError) as exc:
                reason = str(exc) if not isinstance(exc, AttributeError) else "short row"
                result.rejected.append(RejectedRow(line, reason))
                logger.warning("%s:%d: row rejected: %s", path, line, reason)
    if result.row_count == 0:
        raise DataError(f"{path}: no data rows")
    logger.info("%s: %d rows read, %d accepted, %d rejected",
                path, result.row_count, len(result.records), len(result.rejected))
    return result


def load_trade_csv(path, schema: Mapping[str, str] | None = None) -> list[ExportRecord]:
    """Return one :class:`ExportRecord` per valid row of ``path``.

    Malformed rows are logged with their line number and skipped; a missing
    required column or an empty file raises :class:`DataError`. Duplicate
    rows are returned as-is (aggregation happens in :func:`build_export_tensor`).
    """
    return read_trade_csv(path, schema).records


@dataclass(frozen=True)
class GreenProductList:
    codes: frozenset[str]

    def __post_init__(self):
        bad = sorted(c for c in self.codes if not HS6_RE.match(c))
        if bad:
            raise DataError(f"invalid HS6 code in green list: {bad[0]!r}")

    def __len__(self):
        return len(self.codes)

    def __contains__(self, code):
        return code in self.codes

    def __iter__(self):
        return iter(sorted(self.codes))


def load_green_list(path) -> GreenProductList:
    """Read one HS6 code per line (or a single-column CSV, optional header)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"green list not found: {path}")
    codes = []
    with path.open(newline="", encoding="utf-8-sig") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row if c.strip()]
            if not cells:
                continue
            if len(cells) > 1:
                raise DataError(f"{path}:{lineno}: expected a single column, got {len(cells)}")
            token = cells[0]
            if lineno == 1 and not token.isdigit():
                # header
                continue
            if not HS6_RE.match(token):
                raise DataError(f"{path}:{lineno}: invalid HS6 code {token!r}")
            codes.append(token)
    green = GreenProductList(frozenset(codes))
    logger.info("%s: %d green products (%d lines)", path, len(green), len(codes))
    return green


@dataclass(frozen=True)
class ExportTensor:
    """Aggregated export values keyed by (year, country, product).

    Axes are sorted; ``values`` holds only the keys that appeared in the
    input, absent keys read as zero.
    """

    years: tuple[int, ...]
    countries: tuple[str, ...]
    products: tuple[str, ...]
    values: Mapping[tuple[int, str, str], int]

    def __getitem__(self, key: tuple[int, str, str]) -> int:
        return self.values.get(key, 0)

    def total(self, year: int | None = None) -> int:
        if year is None:
            return sum(self.values.values())
        return sum(v for (y, _, _), v in self.values.items() if y == year)

    def matrix(self, year: int) -> np.ndarray:
        """Dense country x product matrix of Python ints (dtype=object) for ``year``.

        Object dtype keeps the values unbounded, so products of totals
        never overflow.
        """
        if year not in self.years:
            raise DataError(f"year {year} not present in export tensor (years: {list(self.years)})")
        ci = {c: k for k, c in enumerate(self.countries)}
        pi = {p: k for k, p in enumerate(self.products)}
        out = np.zeros((len(self.countries), len(self.products)), dtype=object)
        out[...] = 0
        for (y, c, p), v in self.values.items():
            if y == year:
                out[ci[c], pi[p]] = v
        return out

    def records(self) -> list[ExportRecord]:
        return [ExportRecord(y, c, p, v) for (y, c, p), v in sorted(self.values.items())]


def build_export_tensor(records: Iterable[ExportRecord]) -> ExportTensor:
    """Sum records per (year, country, product); never overwrites duplicates."""
    values: dict[tuple[int, str, str], int] = defaultdict(int)
    n = 0
    for r in records:
        values[(r.year, r.country, r.product)] += r.value
        n += 1
    if n == 0:
        raise DataError("cannot build an export tensor from zero records")
    keys = values.keys()
    return ExportTensor(
        years=tuple(sorted({k[0] for k in keys})),
        countries=tuple(sorted({k[1] for k in keys})),
        products=tuple(sorted({k[2] for k in keys})),
        values=dict(sorted(values.items())),
    )


def write_tensor_csv(tensor: ExportTensor, path) -> Path:
    """Serialize as ``year,country,product,value`` sorted by all four keys."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "country", "product", "value"])
        for (y, c, p), v in sorted(tensor.values.items()):
            w.writerow([y, c, p, v])
    return path


def read_tensor_csv(path) -> ExportTensor:
    return build_export_tensor(load_trade_csv(path, TENSOR_SCHEMA))
