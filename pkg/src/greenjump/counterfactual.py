"""Dart-board counterfactual for new-product relatedness.

For every country, draws of the same size as its set of new green products
are taken uniformly (without replacement) from the products it could have
added; their relatedness to the country's initial basket forms the null
distribution. Actual and counterfactual kernel densities are then compared
point by point on a shared grid.
"""

from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Mapping, Sequence

import numpy as np

from .diversify import BaselineBasket, RelatednessSample, relatedness_to_basket
from .errors import NumericError
from .kde import DensityEstimate, kde_evaluate, silverman_bandwidth, unit_grid
from .matrices import ProximityMatrix

logger = logging.getLogger(__name__)

RNG_NAME = "numpy.PCG64"
RNG_SCHEME = "seed-xor-blake2b64-v1"
EPSILON = 1e-9
FULL_MASS_SHARE = 0.99

Verdict = Literal["full", "none", "mixed"]
BandwidthMode = Literal["per-draw", "pooled", "shared"]
BANDWIDTH_MODES = ("per-draw", "pooled", "shared")

VERDICT_LABELS = {
    "full": "full path-dependence",
    "none": "no path-dependence",
    "mixed": "path-dependence and non-path-dependence",
}


def country_stream_seed(seed: int, country: str) -> int:
    """Seed for a country's substream: seed XOR the first 8 bytes of blake2b(country)."""
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    digest = hashlib.blake2b(country.encode("utf-8"), digest_size=8).digest()
    return seed ^ int.from_bytes(digest, "big")


def country_rng(seed: int, country: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(country_stream_seed(seed, country)))


@dataclass(frozen=True)
class ClassificationIntervals:
    path_dependent: tuple[tuple[float, float], ...]
    non_path_dependent: tuple[tuple[float, float], ...]
    verdict: Verdict
    # share of actual mass on grid points where actual > counterfactual
    dominant_share: float = 0.0
    # integral of (actual - counterfactual) over those points, relative to actual mass
    path_dependent_mass: float = 0.0

    @property
    def label(self) -> str:
        return VERDICT_LABELS[self.verdict]


@dataclass(frozen=True)
class CounterfactualResult:
    scope: str
    countries: tuple[str, ...]
    actual: tuple[RelatednessSample, ...]
    counterfactual_sample: np.ndarray
    draws: int
    seed: int
    actual_density: DensityEstimate
    counterfactual_density: DensityEstimate
    regions: ClassificationIntervals
    bandwidth_mode: str = "per-draw"
    pool_sizes: Mapping[str, int] = field(default_factory=dict)

    @property
    def actual_values(self) -> np.ndarray:
        return np.concatenate([s.values for s in self.actual])


def _trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    w = np.zeros(grid.size)
    dx = np.diff(grid)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return w


def _runs(mask: np.ndarray, grid: np.ndarray) -> tuple[tuple[float, float], ...]:
    out = []
    k = 0
    n = mask.size
    while k < n:
        if mask[k]:
            j = k
            while j + 1 < n and mask[j + 1]:
                j += 1
            out.append((float(grid[k]), float(grid[j])))
            k = j + 1
        else:
            k += 1
    return tuple(out)


def classify_regions(actual_density: DensityEstimate, counterfactual_density: DensityEstimate,
                     eps: float = EPSILON, full_share: float = FULL_MASS_SHARE) -> ClassificationIntervals:
    """Split the grid into path-dependent and non-path-dependent intervals.

    A point is path-dependent where the actual density exceeds the
    counterfactual, and non-path-dependent where it falls below while still
    carrying actual mass. ``eps`` is relative to the largest density value,
    so the result depends only on how the two curves compare. The verdict is
    ``full`` when the path-dependent points hold at least ``full_share`` of
    the actual mass, ``none`` when there are no such points, else ``mixed``.
    """
    grid = actual_density.grid
    if not np.array_equal(grid, counterfactual_density.grid):
        raise ValueError("actual and counterfactual densities are on different grids")
    a = actual_density.values
    c = counterfactual_density.values
    scale = max(float(a.max(initial=0.0)), float(c.max(initial=0.0)))
    if scale <= 0:
        return ClassificationIntervals((), (), "none")
    tol = eps * scale
    above = a > c + tol
    below = (a < c - tol) & (a > tol)

    w = _trapezoid_weights(grid)
    total = float(w @ a)
    share = float(w[above] @ a[above]) / total if total > 0 else 0.0
    excess = float(w[above] @ (a - c)[above]) / total if total > 0 else 0.0

    if not above.any():
        verdict = "none"
    elif share >= full_share:
        verdict = "full"
    else:
        verdict = "mixed"
    return ClassificationIntervals(_runs(above, grid), _runs(below, grid), verdict, share, excess)


def _counterfactual_bandwidth(draw_matrix: np.ndarray) -> float:
    # median Silverman bandwidth over draws; draws without spread are skipped
    hs = []
    for row in draw_matrix:
        try:
            hs.append(silverman_bandwidth(row))
        except NumericError:
            continue
    if not hs:
        raise NumericError("every counterfactual draw is degenerate; supply an explicit bandwidth")
    return float(np.median(hs))


def monte_carlo_counterfactual(
    actual: Mapping[str, RelatednessSample] | Sequence[RelatednessSample] | RelatednessSample,
    pools: Mapping[str, Sequence[str]],
    baskets: Mapping[str, BaselineBasket],
    phi: ProximityMatrix,
    draws: int = 1000,
    seed: int | None = None,
    *,
    grid=None,
    bandwidth: float | None = None,
    bandwidth_mode: BandwidthMode = "per-draw",
    scope: str = "pooled",
) -> CounterfactualResult:
    """Build the counterfactual relatedness distribution and compare densities.

    Parameters
    ----------
    actual : RelatednessSample(s)
        Observed relatedness of new products, one sample per country.
        Countries whose basket was empty (undefined sample) or with no new
        products are left out.
    pools : mapping country -> candidate products
        Population each country's draws come from.
    baskets : mapping country -> BaselineBasket
        Initial basket the drawn products are related to.
    draws : int
        Number of Monte Carlo draws.
    seed : int
        Unsigned 64-bit seed; each country draws from its own substream.
    grid : array, optional
        Evaluation grid, 512 points on [0, 1] by default.
    bandwidth : float, optional
        Explicit bandwidth for both densities; overrides ``bandwidth_mode``.
    bandwidth_mode : {"per-draw", "pooled", "shared"}
        How the counterfactual bandwidth is chosen when ``bandwidth`` is not
        given. ``per-draw`` takes the median Silverman bandwidth of the
        individual draws (each the size of the actual sample), ``pooled``
        applies Silverman to the whole pooled counterfactual sample, and
        ``shared`` reuses the actual sample's bandwidth.
    """
    if seed is None:
        raise ValueError("a seed is required")
    if draws < 1:
        raise ValueError(f"draws must be at least 1, got {draws}")
    if bandwidth_mode not in BANDWIDTH_MODES:
        raise ValueError(f"unknown bandwidth mode {bandwidth_mode!r}")
    if isinstance(actual, RelatednessSample):
        actual = [actual]
    if not isinstance(actual, Mapping):
        actual = {s.country: s for s in actual}

    samples = []
    for country in sorted(actual):
        s = actual[country]
        if s.undefined:
            logger.info("%s: empty initial basket, excluded from the counterfactual", country)
            continue
        if len(s) == 0:
            continue
        samples.append(s)
    if not samples:
        raise NumericError("no country has new products with defined relatedness")

    blocks = []
    pool_sizes = {}
    for s in samples:
        pool = sorted(pools.get(s.country, ()))
        k = len(s)
        if len(pool) < k:
            raise NumericError(
                f"{s.country}: candidate pool has {len(pool)} products, fewer than its {k} new products")
        pool_sizes[s.country] = len(pool)
        d_pool = relatedness_to_basket(pool, baskets[s.country], phi)
        rng = country_rng(seed, s.country)
        order = np.argsort(rng.random((draws, len(pool))), axis=1, kind="stable")[:, :k]
        blocks.append(d_pool[order])
    # row r holds draw r across all countries
    draw_matrix = np.concatenate(blocks, axis=1)
    cf_sample = draw_matrix.ravel()

    actual_values = np.concatenate([s.values for s in samples])
    grid = unit_grid() if grid is None else np.asarray(grid, dtype=float)
    if bandwidth is not None:
        h_actual = h_cf = float(bandwidth)
        mode = "explicit"
    else:
        h_actual = silverman_bandwidth(actual_values)
        mode = bandwidth_mode
        if bandwidth_mode == "shared":
            h_cf = h_actual
        elif bandwidth_mode == "pooled":
            h_cf = silverman_bandwidth(cf_sample)
        else:
            h_cf = _counterfactual_bandwidth(draw_matrix)
    actual_density = kde_evaluate(actual_values, h_actual, grid)
    cf_density = kde_evaluate(cf_sample, h_cf, grid)
    return CounterfactualResult(
        scope=scope,
        countries=tuple(s.country for s in samples),
        actual=tuple(samples),
        counterfactual_sample=cf_sample,
        draws=draws,
        seed=seed,
        actual_density=actual_density,
        counterfactual_density=cf_density,
        regions=classify_regions(actual_density, cf_density),
        bandwidth_mode=mode,
        pool_sizes=pool_sizes,
    )


def format_intervals(intervals) -> str:
    if not intervals:
        return "none"
    return ", ".join(f"[{lo:.3f}, {hi:.3f}]" for lo, hi in intervals)


def write_density_csv(result: CounterfactualResult, path) -> Path:
    """``grid_point,actual_density,counterfactual_density``, one row per grid point."""
    path = Path(path)
    a = result.actual_density
    c = result.counterfactual_density
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["grid_point", "actual_density", "counterfactual_density"])
        for g, av, cv in zip(a.grid, a.values, c.values):
            w.writerow([repr(float(g)), repr(float(av)), repr(float(cv))])
    return path
