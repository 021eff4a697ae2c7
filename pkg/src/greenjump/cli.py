"""Command-line pipeline: trade data in, relatedness densities and regression tables out.

Every setting can come from an INI config file (section ``[greenjump]``,
keys as in :class:`PipelineConfig`, dashes or underscores) and be
overridden by command-line flags. Relative paths in a config file are
resolved against the file's directory.
"""

from __future__ import annotations

import argparse
import configparser
import contextlib
import dataclasses
import fcntl
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .counterfactual import (
    BANDWIDTH_MODES,
    RNG_NAME,
    RNG_SCHEME,
    ClassificationIntervals,
    CounterfactualResult,
    format_intervals,
    monte_carlo_counterfactual,
    write_density_csv,
)
from .diversify import (
    SCOPES,
    baseline_basket,
    candidate_pool,
    identify_new_green_products,
    max_relatedness,
    write_new_products_csv,
    write_relatedness_csv,
)
from .errors import ConfigError, DataError, GreenjumpError
from .ingest import DEFAULT_SCHEMA, build_export_tensor, load_green_list, load_trade_csv, write_tensor_csv
from .kde import unit_grid
from .matrices import binarize, compute_proximity, compute_rca, write_proximity_csv, write_rca_csv
from .regress import (
    DEPENDENT_MODES,
    build_dependent_variable,
    build_regression_table,
    load_indicator_csv,
    progressive_fits,
    regression_table_csv,
)

logger = logging.getLogger("greenjump")

CONFIG_SECTION = "greenjump"
PATH_FIELDS = ("trade", "green", "indicators", "output")


@dataclass
class PipelineConfig:
    trade: Path | None = None
    green: Path | None = None
    indicators: Path | None = None
    output: Path | None = None
    t0: int = 2007
    t1: int = 2017
    rca_threshold: float = 1.0
    rca_inclusive: bool = False
    new_low_threshold: float = 0.2
    baseline_scope: str = "all-products"
    draws: int = 1000
    seed: int | None = None
    grid_points: int = 512
    bandwidth: float | None = None  # None means Silverman ("auto")
    shared_bandwidth: bool = False
    counterfactual_bandwidth: str = "per-draw"
    exclude_actual: bool = False
    dependent_mode: str = "all-new"
    pd_threshold: float = 0.58
    regressors: tuple[str, ...] = ()
    countries: tuple[str, ...] = ()
    col_year: str = DEFAULT_SCHEMA["year"]
    col_country: str = DEFAULT_SCHEMA["country"]
    col_product: str = DEFAULT_SCHEMA["product"]
    col_value: str = DEFAULT_SCHEMA["value"]

    @property
    def schema(self) -> dict[str, str]:
        return {"year": self.col_year, "country": self.col_country,
                "product": self.col_product, "value": self.col_value}

    def validate(self, needs=("trade",), seed_required=False):
        if self.t0 >= self.t1:
            raise ConfigError(f"t0 ({self.t0}) must be earlier than t1 ({self.t1})")
        for name in ("rca_threshold", "new_low_threshold", "pd_threshold"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.new_low_threshold > 1:
            raise ConfigError("new_low_threshold must not exceed 1")
        if self.draws < 1:
            raise ConfigError("draws must be at least 1")
        if self.grid_points < 2:
            raise ConfigError("grid_points must be at least 2")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ConfigError("bandwidth must be positive or 'auto'")
        if self.baseline_scope not in SCOPES:
            raise ConfigError(f"baseline_scope must be one of {SCOPES}")
        if self.dependent_mode not in (*DEPENDENT_MODES, "both"):
            raise ConfigError(f"dependent_mode must be one of {(*DEPENDENT_MODES, 'both')}")
        if self.counterfactual_bandwidth not in BANDWIDTH_MODES:
            raise ConfigError(f"counterfactual_bandwidth must be one of {BANDWIDTH_MODES}")
        if seed_required:
            if self.seed is None:
                raise ConfigError("seed: a seed is required for the counterfactual")
            if not 0 <= self.seed < 2**64:
                raise ConfigError("seed must be an unsigned 64-bit integer")
        for name in needs:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"{name}: path not set")
            if name != "output" and not Path(value).is_file():
                raise ConfigError(f"{name}: file not readable: {value}")

    def manifest_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            if f.name == "output":
                continue
            v = getattr(self, f.name)
            if isinstance(v, Path):
                v = v.name
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        out["bandwidth"] = "auto" if self.bandwidth is None else self.bandwidth
        return out


def _parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _coerce(name: str, raw, base: Path | None = None):
    """Convert a config-file or flag string into the field's type."""
    if raw is None:
        return None
    try:
        if name in PATH_FIELDS:
            p = Path(raw)
            return p if (base is None or p.is_absolute()) else base / p
        if name in ("t0", "t1", "draws", "grid_points"):
            return int(raw)
        if name == "seed":
            return int(str(raw), 0)
        if name in ("rca_threshold", "new_low_threshold", "pd_threshold"):
            return float(raw)
        if name == "bandwidth":
            return None if str(raw).strip().lower() == "auto" else float(raw)
        if name in ("rca_inclusive", "shared_bandwidth", "exclude_actual"):
            return raw if isinstance(raw, bool) else _parse_bool(raw)
        if name in ("regressors", "countries"):
            items = raw if isinstance(raw, (list, tuple)) else str(raw).split(",")
            items = tuple(s.strip() for s in items if s.strip())
            return tuple(s.upper() for s in items) if name == "countries" else items
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None
    return str(raw).strip()


def load_config_file(path) -> dict:
    path = Path(path)
    parser = configparser.ConfigParser()
    try:
        with path.open(encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    if not parser.has_section(CONFIG_SECTION):
        raise ConfigError(f"{path}: missing [{CONFIG_SECTION}] section")
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    out = {}
    for key, raw in parser.items(CONFIG_SECTION):
        name = key.replace("-", "_")
        if name not in known:
            raise ConfigError(f"{path}: unknown key {key!r}")
        out[name] = _coerce(name, raw, path.parent)
    return out


def build_config(args: argparse.Namespace) -> PipelineConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for f in dataclasses.fields(PipelineConfig):
        raw = getattr(args, f.name, None)
        if raw is not None:
            values[f.name] = _coerce(f.name, raw)
    return PipelineConfig(**values)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class StageError(GreenjumpError):
    def __init__(self, stage: str, cause: GreenjumpError):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.exit_code = cause.exit_code


class Pipeline:
    """Lazily computed pipeline stages sharing one config."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.written: list[Path] = []

    @contextlib.contextmanager
    def stage(self, name: str):
        logger.info("stage %s", name)
        try:
            yield
        except StageError:
            raise
        except GreenjumpError as exc:
            raise StageError(name, exc) from exc

    @cached_property
    def tensor(self):
        with self.stage("ingest"):
            return build_export_tensor(load_trade_csv(self.config.trade, self.config.schema))

    @cached_property
    def green(self):
        with self.stage("ingest"):
            return load_green_list(self.config.green)

    def _rca(self, year):
        if year not in self.tensor.years:
            raise DataError(f"year {year} not in trade data (years: {list(self.tensor.years)})")
        return compute_rca(self.tensor, year)

    @cached_property
    def rca_t0(self):
        with self.stage("rca"):
            return self._rca(self.config.t0)

    @cached_property
    def rca_t1(self):
        with self.stage("rca"):
            return self._rca(self.config.t1)

    @cached_property
    def proximity(self):
        with self.stage("proximity"):
            m = binarize(self.rca_t0, self.config.rca_threshold, self.config.rca_inclusive)
            return compute_proximity(m)

    @cached_property
    def countries(self) -> tuple[str, ...]:
        both = [c for c in self.rca_t0.countries if c in self.rca_t1]
        skipped = sorted(set(self.rca_t0.countries) ^ set(self.rca_t1.countries))
        if skipped:
            logger.warning("countries missing from t0 or t1, skipped: %s", ", ".join(skipped))
        return tuple(both)

    @cached_property
    def new_sets(self):
        cfg = self.config
        with self.stage("new-products"):
            return {c: identify_new_green_products(self.rca_t0, self.rca_t1, self.green, c,
                                                   cfg.new_low_threshold, cfg.rca_threshold)
                    for c in self.countries}

    @cached_property
    def baskets(self):
        cfg = self.config
        with self.stage("new-products"):
            return {c: baseline_basket(self.rca_t0, c, self.green, cfg.baseline_scope, cfg.rca_threshold)
                    for c in self.countries}

    @cached_property
    def samples(self):
        with self.stage("new-products"):
            return {c: max_relatedness(self.new_sets[c], self.baskets[c], self.proximity)
                    for c in self.countries}

    @cached_property
    def pools(self):
        cfg = self.config
        return {c: candidate_pool(self.rca_t0, self.green, c, cfg.new_low_threshold,
                                  self.new_sets[c].products if cfg.exclude_actual else ())
                for c in self.countries}

    def counterfactual(self, countries: Sequence[str] | None = None) -> CounterfactualResult:
        cfg = self.config
        samples = self.samples
        scope = "pooled"
        if countries is not None:
            missing = [c for c in countries if c not in samples]
            if missing:
                raise StageError("counterfactual", DataError(f"country not in both years: {', '.join(missing)}"))
            samples = {c: samples[c] for c in countries}
            scope = ",".join(countries)
        mode = "shared" if cfg.shared_bandwidth else cfg.counterfactual_bandwidth
        with self.stage("counterfactual"):
            return monte_carlo_counterfactual(
                samples, self.pools, self.baskets, self.proximity, cfg.draws, cfg.seed,
                grid=unit_grid(cfg.grid_points), bandwidth=cfg.bandwidth,
                bandwidth_mode=mode, scope=scope,
            )

    @cached_property
    def pooled(self) -> CounterfactualResult:
        return self.counterfactual()

    @cached_property
    def regressions(self) -> list[tuple[str, list]]:
        """(dependent mode, progressive fits) per requested mode."""
        cfg = self.config
        if cfg.indicators is None:
            return []
        with self.stage("regress"):
            table = load_indicator_csv(cfg.indicators)
            regressors = cfg.regressors or table.indicators
            modes = DEPENDENT_MODES if cfg.dependent_mode == "both" else (cfg.dependent_mode,)
            out = []
            for mode in modes:
                y = build_dependent_variable(self.new_sets, self.green, mode, cfg.pd_threshold, self.samples)
                out.append((mode, progressive_fits(y, table, regressors)))
            return out

    @cached_property
    def regression_text(self) -> str:
        head = "Regression\n----------\n"
        if self.config.indicators is None:
            return head + "not run: no indicator table supplied\n"
        blocks = [build_regression_table(fits, title=f"Dependent variable: share of new green products ({mode})")
                  for mode, fits in self.regressions]
        return head + "\n".join(blocks)

    def regression_csv(self) -> str:
        return "".join(
            ("" if k == 0 else "\n") + f"# dependent variable: {mode}\n" + regression_table_csv(fits)
            for k, (mode, fits) in enumerate(self.regressions)
        )

    # output helpers

    def out(self, name: str) -> Path:
        path = Path(self.config.output) / name
        self.written.append(path)
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.out(name)
        path.write_text(text, encoding="utf-8")
        return path

    def manifest(self) -> dict:
        cfg = self.config
        inputs = {}
        for name in ("trade", "green", "indicators"):
            p = getattr(cfg, name)
            if p is not None:
                inputs[name] = {"file": Path(p).name, "sha256": _sha256(Path(p))}
        return {
            "tool": "greenjump",
            "version": __version__,
            "numpy": np.__version__,
            "rng": {"generator": RNG_NAME, "substreams": RNG_SCHEME},
            "seed": cfg.seed,
            "config": cfg.manifest_dict(),
            "inputs": inputs,
            "outputs": sorted(p.name for p in self.written),
        }


def format_classification(regions: ClassificationIntervals) -> list[str]:
    return [
        f"verdict: {regions.verdict} ({regions.label})",
        f"path-dependent: {format_intervals(regions.path_dependent)}",
        f"non-path-dependent: {format_intervals(regions.non_path_dependent)}",
        f"share of actual mass where actual > counterfactual: {regions.dominant_share:.4f}",
        f"excess actual mass over counterfactual: {regions.path_dependent_mass:.4f}",
    ]


def emit_report(classification, regression: str | None, path) -> Path:
    """Write the classification block(s) followed by the regression table.

    ``classification`` is a CounterfactualResult, a ClassificationIntervals,
    or a sequence of either.
    """
    items = classification if isinstance(classification, (list, tuple)) else [classification]
    lines = ["Path-dependence classification", "==============================", ""]
    for item in items:
        if isinstance(item, CounterfactualResult):
            n_actual = sum(len(s) for s in item.actual)
            lines += [
                f"[{item.scope}]",
                f"countries: {len(item.countries)}",
                f"new green products (actual observations): {n_actual}",
                f"counterfactual draws: {item.draws} ({item.counterfactual_sample.size} values)",
                f"seed: {item.seed}",
                f"bandwidth: actual {item.actual_density.bandwidth!r}, "
                f"counterfactual {item.counterfactual_density.bandwidth!r} ({item.bandwidth_mode})",
                f"grid points: {item.actual_density.grid.size}",
            ]
            lines += format_classification(item.regions)
        else:
            lines += format_classification(item)
        lines.append("")
    if regression:
        lines.append(regression.rstrip("\n"))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def emit_density_csv(result: CounterfactualResult, path) -> Path:
    return write_density_csv(result, path)


@contextlib.contextmanager
def _locked_output(outdir: Path):
    outdir.mkdir(parents=True, exist_ok=True)
    lock = outdir / ".greenjump.lock"
    with lock.open("w") as fh:
        try:
            fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError:
            raise ConfigError(f"output directory {outdir} is in use by another run") from None
        try:
            yield
        finally:
            lock.unlink(missing_ok=True)
            fcntl.flock(fh, fcntl.LOCK_UN)


def _density_name(country: str) -> str:
    return f"densities_{country}.csv"


def run_pipeline(config: PipelineConfig) -> Pipeline:
    """Run every stage and write all artifacts to ``config.output``.

    On failure, files written by this run are removed and the error is
    re-raised.
    """
    config.validate(needs=("trade", "green", "output") + (("indicators",) if config.indicators else ()),
                    seed_required=True)
    p = Pipeline(config)
    outdir = Path(config.output)
    with _locked_output(outdir):
        try:
            write_rca_csv(p.rca_t0, p.out("rca_t0.csv"))
            write_rca_csv(p.rca_t1, p.out("rca_t1.csv"))
            write_proximity_csv(p.proximity, p.out("proximity.csv"))
            write_new_products_csv(p.new_sets.values(), p.rca_t0, p.rca_t1, p.out("new_green_products.csv"))
            write_relatedness_csv(p.samples.values(), p.out("relatedness.csv"))
            results = [p.pooled]
            write_density_csv(p.pooled, p.out("densities_pooled.csv"))
            for c in config.countries:
                r = p.counterfactual([c])
                write_density_csv(r, p.out(_density_name(c)))
                results.append(r)
            regression = p.regression_text
            emit_report(results, regression, p.out("classification_report.txt"))
            p.write_text("regression_table.txt", regression)
            if config.indicators is not None:
                p.write_text("regression_table.csv", p.regression_csv())
            manifest = p.out("manifest.json")
            manifest.write_text(json.dumps(p.manifest(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        except BaseException:
            for path in p.written:
                path.unlink(missing_ok=True)
            raise
    return p


# command line


def _add_common(sp: argparse.ArgumentParser):
    sp.add_argument("-v", "--verbose", action="store_true", help="log progress")
    g = sp.add_argument_group("inputs")
    g.add_argument("--config", help="INI config file with a [greenjump] section")
    g.add_argument("--trade", help="trade CSV")
    g.add_argument("--green", help="green product list (one HS6 code per line)")
    g.add_argument("--indicators", help="indicator CSV (country_iso3,indicator_name,value)")
    g.add_argument("--output", "-o", help="output directory")
    g.add_argument("--col-year", dest="col_year")
    g.add_argument("--col-country", dest="col_country")
    g.add_argument("--col-product", dest="col_product")
    g.add_argument("--col-value", dest="col_value")
    m = sp.add_argument_group("method")
    m.add_argument("--t0", type=int)
    m.add_argument("--t1", type=int)
    m.add_argument("--rca-threshold", dest="rca_threshold", type=float)
    m.add_argument("--rca-inclusive", dest="rca_inclusive", action="store_const", const=True,
                   help="competitive when RCA >= threshold instead of >")
    m.add_argument("--new-low-threshold", dest="new_low_threshold", type=float,
                   help="t0 RCA below which a product counts as absent (default 0.2)")
    m.add_argument("--baseline-scope", dest="baseline_scope", choices=SCOPES)
    m.add_argument("--draws", type=int)
    m.add_argument("--seed", help="unsigned 64-bit seed (required for counterfactual/run)")
    m.add_argument("--grid-points", dest="grid_points", type=int)
    m.add_argument("--bandwidth", help="'auto' (Silverman) or a positive number")
    m.add_argument("--shared-bandwidth", dest="shared_bandwidth", action="store_const", const=True)
    m.add_argument("--counterfactual-bandwidth", dest="counterfactual_bandwidth", choices=BANDWIDTH_MODES[:2])
    m.add_argument("--exclude-actual", dest="exclude_actual", action="store_const", const=True,
                   help="leave products that actually became new out of the draw pool")
    m.add_argument("--dependent-mode", dest="dependent_mode", choices=(*DEPENDENT_MODES, "both"))
    m.add_argument("--pd-threshold", dest="pd_threshold", type=float)
    m.add_argument("--regressors", help="comma-separated indicator names, in specification order")
    m.add_argument("--country", dest="countries", action="append",
                   help="also run the counterfactual for this country alone (repeatable)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="greenjump", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"greenjump {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "ingest": "aggregate trade records and write tensor.csv",
        "rca": "write rca_t0.csv and rca_t1.csv",
        "proximity": "write the t0 proximity network",
        "new-products": "write new green products and their relatedness",
        "counterfactual": "write densities and the classification report",
        "regress": "write the regression table",
        "run": "full pipeline",
    }
    for name, text in helps.items():
        _add_common(sub.add_parser(name, help=text))
    return parser


def _cmd_ingest(p: Pipeline):
    write_tensor_csv(p.tensor, p.out("tensor.csv"))


def _cmd_rca(p: Pipeline):
    write_rca_csv(p.rca_t0, p.out("rca_t0.csv"))
    write_rca_csv(p.rca_t1, p.out("rca_t1.csv"))


def _cmd_proximity(p: Pipeline):
    write_proximity_csv(p.proximity, p.out("proximity.csv"))


def _cmd_new_products(p: Pipeline):
    write_new_products_csv(p.new_sets.values(), p.rca_t0, p.rca_t1, p.out("new_green_products.csv"))
    write_relatedness_csv(p.samples.values(), p.out("relatedness.csv"))


def _cmd_counterfactual(p: Pipeline):
    results = [p.pooled]
    write_density_csv(p.pooled, p.out("densities_pooled.csv"))
    for c in p.config.countries:
        r = p.counterfactual([c])
        write_density_csv(r, p.out(_density_name(c)))
        results.append(r)
    emit_report(results, None, p.out("classification_report.txt"))


def _cmd_regress(p: Pipeline):
    p.write_text("regression_table.txt", p.regression_text)
    p.write_text("regression_table.csv", p.regression_csv())


COMMANDS = {
    "ingest": (_cmd_ingest, ("trade", "output"), False),
    "rca": (_cmd_rca, ("trade", "output"), False),
    "proximity": (_cmd_proximity, ("trade", "output"), False),
    "new-products": (_cmd_new_products, ("trade", "green", "output"), False),
    "counterfactual": (_cmd_counterfactual, ("trade", "green", "output"), True),
    "regress": (_cmd_regress, ("trade", "green", "indicators", "output"), False),
}


def main(argv: Sequence[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = build_config(args)
        if args.command == "run":
            run_pipeline(config)
        else:
            func, needs, seeded = COMMANDS[args.command]
            config.validate(needs=needs, seed_required=seeded)
            p = Pipeline(config)
            with _locked_output(Path(config.output)):
                try:
                    func(p)
                except BaseException:
                    for path in p.written:
                        path.unlink(missing_ok=True)
                    raise
    except GreenjumpError as exc:
        print(f"greenjump: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
