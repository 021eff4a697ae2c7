"""Revealed comparative advantage, competitiveness and product proximity."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .ingest import ExportTensor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RcaMatrix:
    """Balassa RCA for one year; rows are countries with positive total exports."""

    year: int
    countries: tuple[str, ...]
    products: tuple[str, ...]
    values: np.ndarray
    excluded: tuple[str, ...] = ()

    def __post_init__(self):
        if self.values.shape != (len(self.countries), len(self.products)):
            raise ValueError("RCA values do not match the axes")

    def row(self, country: str) -> np.ndarray:
        try:
            return self.values[self.countries.index(country)]
        except ValueError:
            raise DataError(f"country {country} has no RCA row for {self.year}") from None

    def get(self, country: str, product: str) -> float:
        return float(self.row(country)[self.products.index(product)])

    def __contains__(self, country):
        return country in self.countries


@dataclass(frozen=True)
class CompetitivenessMatrix:
    year: int
    countries: tuple[str, ...]
    products: tuple[str, ...]
    entries: np.ndarray  # bool, countries x products

    def get(self, country: str, product: str) -> int:
        return int(self.entries[self.countries.index(country), self.products.index(product)])


@dataclass(frozen=True)
class ProximityMatrix:
    """Symmetric product relatedness; ``values[i, j]`` is the proximity of products i and j."""

    products: tuple[str, ...]
    values: np.ndarray

    def index(self, product: str) -> int:
        try:
            return self._index[product]
        except KeyError:
            raise DataError(f"product {product} is not on the proximity axis") from None

    @property
    def _index(self):
        # cached lookup; the dataclass is frozen so bypass __setattr__
        try:
            return self.__dict__["_idx"]
        except KeyError:
            idx = {p: k for k, p in enumerate(self.products)}
            object.__setattr__(self, "_idx", idx)
            return idx

    def get(self, i: str, j: str) -> float:
        return float(self.values[self.index(i), self.index(j)])


def compute_rca(tensor: ExportTensor, year: int) -> RcaMatrix:
    """RCA_cp = (X_cp / sum_p X_cp) / (sum_c X_cp / sum_cp X_cp).

    Evaluated as the single ratio X_cp * W / (X_c * X_p) over exact integers,
    so each entry is the correctly rounded value of the true ratio. Countries
    with zero total exports are dropped (and logged); products nobody exports
    get RCA 0.
    """
    x = tensor.matrix(year)
    world = int(x.sum()) if x.size else 0
    if world <= 0:
        raise DataError(f"world exports for {year} are zero")
    by_country = x.sum(axis=1)
    by_product = x.sum(axis=0)

    keep = np.array([int(t) > 0 for t in by_country], dtype=bool)
    excluded = tuple(c for c, k in zip(tensor.countries, keep) if not k)
    if excluded:
        logger.warning("%d: countries with zero total exports excluded from RCA: %s",
                       year, ", ".join(excluded))

    x = x[keep]
    by_country = by_country[keep]
    rca = np.zeros(x.shape, dtype=float)
    for ci in range(x.shape[0]):
        xc = int(by_country[ci])
        for pi in range(x.shape[1]):
            v = int(x[ci, pi])
            if v:
                rca[ci, pi] = (v * world) / (xc * int(by_product[pi]))
    countries = tuple(c for c, k in zip(tensor.countries, keep) if k)
    return RcaMatrix(year, countries, tensor.products, rca, excluded)


def binarize(rca: RcaMatrix, threshold: float = 1.0, inclusive: bool = False) -> CompetitivenessMatrix:
    """1 where RCA > threshold (or >= with ``inclusive``), else 0."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    entries = rca.values >= threshold if inclusive else rca.values > threshold
    return CompetitivenessMatrix(rca.year, rca.countries, rca.products, entries)


def compute_proximity(m: CompetitivenessMatrix) -> ProximityMatrix:
    """Minimum pairwise conditional probability of competitive co-export.

    phi(i, j) = min(N_ij / N_j, N_ij / N_i) = N_ij / max(N_i, N_j), with N the
    count of competitive exporters. phi is 0 whenever a product has no
    competitive exporter and 1 on the diagonal otherwise.
    """
    if m.entries.size == 0:
        raise DataError("competitiveness matrix is empty")
    mi = m.entries.astype(np.int64)
    co = mi.T @ mi
    ubiq = mi.sum(axis=0)
    denom = np.maximum.outer(ubiq, ubiq)
    phi = np.zeros(co.shape, dtype=float)
    np.divide(co, denom, out=phi, where=denom > 0)
    return ProximityMatrix(m.products, phi)


def write_rca_csv(rca: RcaMatrix, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["country", "product", "rca"])
        for ci, c in enumerate(rca.countries):
            for pi, p in enumerate(rca.products):
                w.writerow([c, p, repr(float(rca.values[ci, pi]))])
    return path


def write_proximity_csv(phi: ProximityMatrix, path) -> Path:
    """Nonzero off-diagonal entries with product_i < product_j."""
    path = Path(path)
    vals = phi.values
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["product_i", "product_j", "phi"])
        n = len(phi.products)
        for i in range(n):
            for j in range(i + 1, n):
                if vals[i, j] != 0:
                    w.writerow([phi.products[i], phi.products[j], repr(float(vals[i, j]))])
    return path
