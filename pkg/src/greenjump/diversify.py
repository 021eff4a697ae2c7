"""New green products and their relatedness to a country's initial basket."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal

import numpy as np

from .errors import DataError
from .ingest import GreenProductList
from .matrices import ProximityMatrix, RcaMatrix

Scope = Literal["all-products", "green-only"]
SCOPES = ("all-products", "green-only")


@dataclass(frozen=True)
class NewGreenProductSet:
    country: str
    t0: int
    t1: int
    products: tuple[str, ...]
    low_threshold: float

    def __len__(self):
        return len(self.products)


@dataclass(frozen=True)
class BaselineBasket:
    country: str
    year: int
    products: tuple[str, ...]
    scope: Scope = "all-products"

    def __len__(self):
        return len(self.products)


@dataclass(frozen=True)
class RelatednessSample:
    """Max-relatedness of each new product; ``undefined`` when the basket was empty."""

    country: str
    observations: tuple[tuple[str, float], ...]
    undefined: bool = False

    @property
    def values(self) -> np.ndarray:
        return np.array([d for _, d in self.observations], dtype=float)

    def __len__(self):
        return len(self.observations)


def _check_axes(a: RcaMatrix, b: RcaMatrix):
    if a.products != b.products:
        raise DataError(f"RCA matrices for {a.year} and {b.year} have different product axes")


def identify_new_green_products(
    rca_t0: RcaMatrix,
    rca_t1: RcaMatrix,
    green: GreenProductList,
    country: str,
    low_threshold: float = 0.2,
    rca_threshold: float = 1.0,
) -> NewGreenProductSet:
    """Green products with RCA below ``low_threshold`` at t0 and above ``rca_threshold`` at t1."""
    if not 0 < low_threshold <= 1:
        raise ValueError(f"low_threshold must lie in (0, 1], got {low_threshold}")
    _check_axes(rca_t0, rca_t1)
    r0 = rca_t0.row(country)
    r1 = rca_t1.row(country)
    new = tuple(
        p for k, p in enumerate(rca_t0.products)
        if p in green and r0[k] < low_threshold and r1[k] > rca_threshold
    )
    return NewGreenProductSet(country, rca_t0.year, rca_t1.year, new, low_threshold)


def baseline_basket(
    rca_t0: RcaMatrix,
    country: str,
    green: GreenProductList | None = None,
    scope: Scope = "all-products",
    rca_threshold: float = 1.0,
) -> BaselineBasket:
    """Products the country exported competitively (RCA > threshold) at t0."""
    if scope not in SCOPES:
        raise ValueError(f"unknown basket scope {scope!r}")
    if scope == "green-only" and green is None:
        raise ValueError("green-only scope needs the green product list")
    row = rca_t0.row(country)
    products = tuple(
        p for k, p in enumerate(rca_t0.products)
        if row[k] > rca_threshold and (scope == "all-products" or p in green)
    )
    return BaselineBasket(country, rca_t0.year, products, scope)


def candidate_pool(
    rca_t0: RcaMatrix,
    green: GreenProductList,
    country: str,
    low_threshold: float = 0.2,
    exclude: Iterable[str] = (),
) -> tuple[str, ...]:
    """Green products the country could have added: RCA below ``low_threshold`` at t0.

    Only products on the matrix axis are eligible, since relatedness is
    undefined for products absent from the trade data.
    """
    row = rca_t0.row(country)
    skip = set(exclude)
    return tuple(
        p for k, p in enumerate(rca_t0.products)
        if p in green and row[k] < low_threshold and p not in skip
    )


def relatedness_to_basket(products: Iterable[str], basket: BaselineBasket,
                          phi: ProximityMatrix) -> np.ndarray:
    """max_j phi(i, j) over the basket, for each product i (basket must be non-empty)."""
    rows = [phi.index(p) for p in products]
    cols = [phi.index(p) for p in basket.products]
    if not cols:
        raise ValueError("empty basket")
    if not rows:
        return np.empty(0)
    return phi.values[np.ix_(rows, cols)].max(axis=1)


def max_relatedness(new_set: NewGreenProductSet, basket: BaselineBasket,
                    phi: ProximityMatrix) -> RelatednessSample:
    if new_set.country != basket.country:
        raise ValueError(f"new set is for {new_set.country}, basket for {basket.country}")
    for p in new_set.products:
        phi.index(p)
    if len(basket) == 0:
        return RelatednessSample(new_set.country, (), undefined=True)
    d = relatedness_to_basket(new_set.products, basket, phi)
    return RelatednessSample(
        new_set.country,
        tuple((p, float(v)) for p, v in zip(new_set.products, d)),
    )


def write_new_products_csv(new_sets: Iterable[NewGreenProductSet], rca_t0: RcaMatrix,
                           rca_t1: RcaMatrix, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["country", "product", "rca_t0", "rca_t1"])
        for s in sorted(new_sets, key=lambda s: s.country):
            for p in sorted(s.products):
                w.writerow([s.country, p, repr(rca_t0.get(s.country, p)),
                            repr(rca_t1.get(s.country, p))])
    return path


def write_relatedness_csv(samples: Iterable[RelatednessSample], path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["country", "product", "d_value"])
        for s in sorted(samples, key=lambda s: s.country):
            for p, d in sorted(s.observations):
                w.writerow([s.country, p, repr(d)])
    return path
