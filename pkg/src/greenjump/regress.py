"""OLS with classical inference, and the progressive-specification report table."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np
from scipy import stats

from .diversify import NewGreenProductSet, RelatednessSample
from .errors import DataError, NumericError
from .ingest import ISO3_RE, GreenProductList

logger = logging.getLogger(__name__)

DependentMode = Literal["all-new", "path-dependent-only"]
DEPENDENT_MODES = ("all-new", "path-dependent-only")
INTERCEPT = "const"
MISSING_TOKENS = {"", "na", "n/a", "nan", "null", ".."}


@dataclass(frozen=True)
class IndicatorTable:
    """Country x indicator values at t0; NaN marks a missing value."""

    countries: tuple[str, ...]
    indicators: tuple[str, ...]
    values: np.ndarray

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.indicators.index(name)]
        except ValueError:
            raise DataError(f"indicator {name!r} not in table (have {list(self.indicators)})") from None

    @classmethod
    def from_mapping(cls, data: Mapping[str, Mapping[str, float | None]]) -> "IndicatorTable":
        countries = tuple(sorted(data))
        names = tuple(sorted({k for row in data.values() for k in row}))
        vals = np.full((len(countries), len(names)), np.nan)
        for i, c in enumerate(countries):
            for j, n in enumerate(names):
                v = data[c].get(n)
                if v is not None:
                    vals[i, j] = float(v)
        return cls(countries, names, vals)


def load_indicator_csv(path) -> IndicatorTable:
    """Read long-format ``country_iso3,indicator_name,value`` rows."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"indicator file not found: {path}")
    data: dict[str, dict[str, float | None]] = {}
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        need = {"country_iso3", "indicator_name", "value"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise DataError(f"{path}: header must contain {sorted(need)}")
        for row in reader:
            line = reader.line_num
            country = (row["country_iso3"] or "").strip().upper()
            name = (row["indicator_name"] or "").strip()
            if not ISO3_RE.match(country) or not name:
                raise DataError(f"{path}:{line}: malformed row {row}")
            text = (row["value"] or "").strip()
            if text.lower() in MISSING_TOKENS:
                value = None
            else:
                try:
                    value = float(text)
                except ValueError:
                    raise DataError(f"{path}:{line}: non-numeric value {text!r}") from None
                if not math.isfinite(value):
                    value = None
            if name in data.setdefault(country, {}):
                raise DataError(f"{path}:{line}: duplicate value for {country} / {name}")
            data[country][name] = value
    if not data:
        raise DataError(f"{path}: no indicator rows")
    return IndicatorTable.from_mapping(data)


@dataclass(frozen=True)
class RegressionResult:
    names: tuple[str, ...]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    t_statistics: np.ndarray
    p_values: np.ndarray
    n: int
    r_squared: float
    rss: float
    residuals: np.ndarray
    countries: tuple[str, ...] = ()
    dropped: tuple[str, ...] = ()

    @property
    def df_resid(self) -> int:
        return self.n - len(self.names)

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    @property
    def params(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.coefficients)))


def _collinear_columns(X: np.ndarray, names: Sequence[str], tol: float) -> list[str]:
    # first column lying in the span of earlier ones, plus the columns it depends on
    for j in range(1, X.shape[1]):
        prev = X[:, :j]
        coef, *_ = np.linalg.lstsq(prev, X[:, j], rcond=None)
        resid = X[:, j] - prev @ coef
        if np.linalg.norm(resid) <= tol * max(np.linalg.norm(X[:, j]), 1.0):
            used = [names[i] for i in range(j) if abs(coef[i]) > 1e-8]
            return used + [names[j]]
    return list(names)


def ols(y, X, names: Sequence[str]) -> RegressionResult:
    """Least squares via QR with homoskedastic standard errors and t-based p-values."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    if n < k + 1:
        raise NumericError(f"too few observations: {n} for {k} coefficients")
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    tol = max(n, k) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    if np.any(diag <= tol):
        cols = _collinear_columns(X, names, 1e-10)
        raise NumericError(f"design matrix is rank deficient; collinear columns: {', '.join(cols)}")
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    df = n - k
    sigma2 = rss / df
    r_inv = np.linalg.inv(r)
    # (X'X)^-1 = R^-1 R^-T
    cov = sigma2 * (r_inv @ r_inv.T)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    p = 2.0 * stats.t.sf(np.abs(t), df)
    tss = float(((y - y.mean()) ** 2).sum())
    if tss == 0:
        raise NumericError("dependent variable has no variation")
    r2 = 1.0 - rss / tss
    return RegressionResult(tuple(names), beta, se, t, p, n, r2, rss, resid)


def ols_fit(y: Mapping[str, float], x: IndicatorTable, regressors: Sequence[str]) -> RegressionResult:
    """Regress ``y`` on an intercept plus ``regressors`` over countries in both inputs.

    Countries with a missing value in ``y`` or any regressor are dropped
    (listwise deletion) and listed in ``result.dropped``.
    """
    if not regressors:
        raise ValueError("need at least one regressor")
    cols = np.column_stack([x.column(r) for r in regressors])
    row_of = {c: i for i, c in enumerate(x.countries)}
    used, dropped, ys, rows = [], [], [], []
    for c in sorted(set(y) | set(x.countries)):
        yv = y.get(c)
        if c not in row_of or yv is None or not math.isfinite(yv) or np.isnan(cols[row_of[c]]).any():
            dropped.append(c)
            continue
        used.append(c)
        ys.append(float(yv))
        rows.append(cols[row_of[c]])
    if dropped:
        logger.info("listwise deletion dropped %d countries: %s", len(dropped), ", ".join(dropped))
    k = len(regressors) + 1
    if len(used) < k + 1:
        raise NumericError(f"too few complete observations: {len(used)} countries for {k} coefficients")
    X = np.column_stack([np.ones(len(used)), np.array(rows)])
    res = ols(np.array(ys), X, (INTERCEPT, *regressors))
    return RegressionResult(
        res.names, res.coefficients, res.standard_errors, res.t_statistics, res.p_values,
        res.n, res.r_squared, res.rss, res.residuals, tuple(used), tuple(dropped),
    )


def build_dependent_variable(
    new_sets: Mapping[str, NewGreenProductSet] | Iterable[NewGreenProductSet],
    green: GreenProductList,
    mode: DependentMode = "all-new",
    pd_threshold: float = 0.58,
    samples: Mapping[str, RelatednessSample] | None = None,
) -> dict[str, float]:
    """Share of new green products over the size of the green list, per country.

    In ``path-dependent-only`` mode only new products whose max-relatedness
    reaches ``pd_threshold`` are counted; countries whose relatedness is
    undefined (empty initial basket) get NaN and drop out of the regression.
    """
    if len(green) == 0:
        raise DataError("green product list is empty")
    if mode not in DEPENDENT_MODES:
        raise ValueError(f"unknown dependent-variable mode {mode!r}")
    if not isinstance(new_sets, Mapping):
        new_sets = {s.country: s for s in new_sets}
    out = {}
    for country in sorted(new_sets):
        s = new_sets[country]
        if mode == "all-new":
            out[country] = len(s) / len(green)
            continue
        if samples is None:
            raise ValueError("path-dependent-only mode needs relatedness samples")
        sample = samples.get(country)
        if sample is None or (sample.undefined and len(s) > 0):
            out[country] = math.nan
            continue
        d = dict(sample.observations)
        out[country] = sum(1 for p in s.products if d[p] >= pd_threshold) / len(green)
    return out


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def progressive_fits(y: Mapping[str, float], x: IndicatorTable, regressors: Sequence[str]) -> list[RegressionResult]:
    """Specifications adding one regressor at a time: [r1], [r1, r2], ..."""
    return [ols_fit(y, x, regressors[:k]) for k in range(1, len(regressors) + 1)]


def _fmt(v: float) -> str:
    if v == 0 or not math.isfinite(v):
        return f"{v:.4f}"
    if abs(v) < 1e-3:
        return f"{v:.3g}" if abs(v) >= 1e-5 else f"{v:.2e}"
    return f"{v:.4f}"


def _rows(results: Sequence[RegressionResult], standard_errors: bool):
    names: list[str] = []
    for res in results:
        for nm in res.names[1:]:
            if nm not in names:
                names.append(nm)
    names.append(INTERCEPT)
    rows = []
    for nm in names:
        label = "Constant" if nm == INTERCEPT else nm
        coef_cells, se_cells = [], []
        for res in results:
            if nm in res.names:
                i = res.names.index(nm)
                coef_cells.append(_fmt(res.coefficients[i]) + significance_stars(res.p_values[i]))
                se_cells.append(f"({_fmt(res.standard_errors[i])})")
            else:
                coef_cells.append("")
                se_cells.append("")
        rows.append((label, coef_cells))
        if standard_errors:
            rows.append(("", se_cells))
    rows.append(("R-squared", [f"{r.r_squared:.4f}" for r in results]))
    rows.append(("Number of countries", [str(r.n) for r in results]))
    return rows


def build_regression_table(results: Sequence[RegressionResult], title: str | None = None,
                           standard_errors: bool = True) -> str:
    """Plain-text table: one column per specification, stars for p < 0.05 (*) and p < 0.001 (**)."""
    if not results:
        return "(no regression results)\n"
    header = [f"({k})" for k in range(1, len(results) + 1)]
    rows = _rows(results, standard_errors)
    w0 = max(len(r[0]) for r in rows)
    widths = [max(len(header[k]), *(len(r[1][k]) for r in rows)) for k in range(len(results))]
    lines = []
    if title:
        lines.append(title)
    lines.append(" " * w0 + "".join("  " + h.rjust(w) for h, w in zip(header, widths)))
    lines.append("-" * len(lines[-1]))
    for label, cells in rows:
        if label == "R-squared":
            lines.append("-" * len(lines[1 if title else 0]))
        lines.append(label.ljust(w0) + "".join("  " + c.rjust(w) for c, w in zip(cells, widths)))
    lines.append("Note: * p < 0.05, ** p < 0.001" + ("; standard errors in parentheses" if standard_errors else ""))
    return "\n".join(lines) + "\n"


def regression_table_csv(results: Sequence[RegressionResult]) -> str:
    """Long-format CSV: specification,term,coefficient,std_error,t,p_value,stars,n."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["specification", "term", "coefficient", "std_error", "t_statistic", "p_value", "stars", "n"])
    for k, res in enumerate(results, start=1):
        for i, nm in enumerate(res.names):
            w.writerow([k, nm, repr(float(res.coefficients[i])), repr(float(res.standard_errors[i])),
                        repr(float(res.t_statistics[i])), repr(float(res.p_values[i])),
                        significance_stars(res.p_values[i]), res.n])
    return buf.getvalue()
