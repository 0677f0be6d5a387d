"""Synthetic generators, digit truncation, domain transforms, CSV ingestion.

The six unit-interval generators reproduce the benchmark mixtures used
throughout the simulation studies; two further mixtures cover the real line
and the positive half-line. All randomness flows through one
``numpy.random.Generator``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import norm, t as student_t, gamma as gamma_dist

from .errors import ConfigError, DomainError, UsageError
from .metrics import PiecewiseDensity
from .partition import PartitionTree

__all__ = [
    "GeneratorSpec",
    "generate",
    "true_density",
    "truncate_digits",
    "TruncatedSample",
    "TransformSpec",
    "to_unit_interval",
    "pushback_density",
    "ingest_csv",
    "Dataset",
]

_UNIT_GENERATORS = ("dg1", "dg2", "dg3", "dg4", "dg5", "dg6")
_GENERATORS = _UNIT_GENERATORS + ("real_mixture", "positive_mixture")

# truncated normal parameters of dg3: mean 0.5, variance 0.1
_DG3_SIGMA = math.sqrt(0.1)
_DG3_LO = ndtr((0.0 - 0.5) / _DG3_SIGMA)
_DG3_HI = ndtr((1.0 - 0.5) / _DG3_SIGMA)

_BELOW_ONE = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class GeneratorSpec:
    """A named data-generating process with a sample size and seed."""

    kind: str
    m: int
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _GENERATORS:
            raise UsageError(
                f"unknown generator {self.kind!r}; valid: {', '.join(_GENERATORS)}"
            )
        if self.m < 1:
            raise ConfigError("sample size must be >= 1")


def _mixture(rng, m, weights, samplers):
    comp = rng.choice(len(weights), size=m, p=weights)
    out = np.empty(m)
    for k, sampler in enumerate(samplers):
        idx = np.flatnonzero(comp == k)
        if idx.size:
            out[idx] = sampler(idx.size)
    return out


def generate(spec: GeneratorSpec, rng=None) -> np.ndarray:
    """Draw an i.i.d. sample; deterministic for a fixed spec."""
    rng = np.random.default_rng(spec.seed if rng is None else rng)
    m = spec.m
    kind = spec.kind
    if kind == "dg1":
        return rng.uniform(0.0, 0.5, m)
    if kind == "dg2":
        return _mixture(rng, m, [1 / 6, 1 / 2, 1 / 3], [
            lambda k: rng.uniform(0.0, 0.25, k),
            lambda k: rng.uniform(0.125, 0.25, k),
            lambda k: rng.uniform(0.5, 1.0, k),
        ])
    if kind == "dg3":
        # inverse-CDF on the restricted range; exact and rejection-free
        u = rng.random(m)
        x = 0.5 + _DG3_SIGMA * ndtri(_DG3_LO + u * (_DG3_HI - _DG3_LO))
        return np.clip(x, 0.0, _BELOW_ONE)
    if kind == "dg4":
        return rng.uniform(0.0, 0.2, m)
    if kind == "dg5":
        return _mixture(rng, m, [0.5, 0.5], [
            lambda k: rng.uniform(0.0, 0.2, k),
            lambda k: rng.uniform(0.7, 0.9, k),
        ])
    if kind == "dg6":
        coin = rng.random(m) < 0.5
        a = rng.beta(2.0, 15.0, m)
        b = rng.beta(15.0, 2.0, m)
        return np.minimum(np.where(coin, a, b), _BELOW_ONE)
    if kind == "real_mixture":
        return _mixture(rng, m, [1 / 3, 2 / 3], [
            lambda k: -4.0 + rng.standard_t(3.0, k),
            lambda k: 3.0 + rng.standard_normal(k),
        ])
    if kind == "positive_mixture":
        return _mixture(rng, m, [0.5, 0.5], [
            lambda k: rng.gamma(2.0, 1.0 / 2.0, k),
            lambda k: 8.0 + rng.gamma(3.0, 1.0, k),
        ])
    raise UsageError(f"unknown generator {kind!r}")


def true_density(kind: str):
    """The generator's density: exact piecewise form where possible,
    otherwise a vectorized callable."""
    if kind == "dg1":
        return PiecewiseDensity([0.0, 0.5, 1.0], [2.0, 0.0])
    if kind == "dg2":
        # overlapping uniforms resolve to three constant pieces
        return PiecewiseDensity(
            [0.0, 0.125, 0.25, 0.5, 1.0],
            [1 / 6 / 0.25, 1 / 6 / 0.25 + 0.5 / 0.125, 0.0, 1 / 3 / 0.5],
        )
    if kind == "dg3":
        z = _DG3_HI - _DG3_LO
        return lambda x: norm.pdf(x, 0.5, _DG3_SIGMA) / z
    if kind == "dg4":
        return PiecewiseDensity([0.0, 0.2, 1.0], [5.0, 0.0])
    if kind == "dg5":
        return PiecewiseDensity(
            [0.0, 0.2, 0.7, 0.9, 1.0], [2.5, 0.0, 2.5, 0.0])
    if kind == "dg6":
        from scipy.stats import beta as beta_dist
        return lambda x: 0.5 * beta_dist.pdf(x, 2, 15) + \
            0.5 * beta_dist.pdf(x, 15, 2)
    if kind == "real_mixture":
        return lambda x: (student_t.pdf(x, 3, loc=-4.0) / 3.0
                          + 2.0 * norm.pdf(x, 3.0, 1.0) / 3.0)
    if kind == "positive_mixture":
        return lambda x: 0.5 * gamma_dist.pdf(x, 2, scale=0.5) + \
            0.5 * gamma_dist.pdf(x, 3, loc=8.0)
    raise UsageError(f"unknown generator {kind!r}")


@dataclass
class TruncatedSample:
    """Digit-truncated values plus the depth cap engines should apply to
    the depth-prior support (the uniform-round-off treatment)."""

    values: np.ndarray
    n_bar: int


def truncate_digits(values, partition: PartitionTree, n_bar: int,
                    mode: str = "zeros"):
    """Keep only the first ``n_bar`` digits of every value.

    ``zeros`` replaces all deeper digits by zero, i.e. maps each value to
    the left endpoint of its depth-``n_bar`` interval (idempotent).
    ``uniform-remainder`` truncates the same way but returns a flagged
    sample telling the fitting side to cap the depth-prior support at
    ``n_bar``.
    """
    if n_bar < 0:
        raise ConfigError("n_bar must be >= 0")
    if n_bar > partition.max_depth:
        raise ConfigError(
            f"n_bar {n_bar} exceeds partition depth {partition.max_depth}"
        )
    values = np.asarray(values, dtype=np.float64)
    truncated = partition.left_endpoints(values, n_bar)
    if mode == "zeros":
        return truncated
    if mode == "uniform-remainder":
        return TruncatedSample(truncated, n_bar)
    raise UsageError(f"unknown truncation mode {mode!r}")


@dataclass(frozen=True)
class TransformSpec:
    """A fitted bijection onto (0, 1) with its scaling recorded.

    kinds: ``logistic`` (x -> sigmoid(x/s)), ``probit`` (x -> Phi(x/s)),
    and ``log-center-logistic`` (positive x -> sigmoid((log x - c)/s)).
    """

    kind: str
    scale: float
    center: float = 0.0

    def __post_init__(self):
        if self.kind not in ("logistic", "probit", "log-center-logistic"):
            raise ConfigError(f"unknown transform kind {self.kind!r}")
        if self.scale <= 0:
            raise ConfigError("transform scale must be positive")

    def _standardize(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "log-center-logistic":
            if np.any(x <= 0):
                raise DomainError("log transform needs positive values")
            x = np.log(x)
        return (x - self.center) / self.scale

    def forward(self, x) -> np.ndarray:
        z = self._standardize(x)
        if self.kind == "probit":
            u = ndtr(z)
        else:
            u = 1.0 / (1.0 + np.exp(-z))
        return np.clip(u, np.nextafter(0.0, 1.0), _BELOW_ONE)

    def inverse(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if np.any(u <= 0) or np.any(u >= 1):
            raise DomainError("inverse transform needs values in (0, 1)")
        if self.kind == "probit":
            z = ndtri(u)
        else:
            z = np.log(u) - np.log1p(-u)
        x = self.center + self.scale * z
        if self.kind == "log-center-logistic":
            x = np.exp(x)
        return x

    def derivative(self, x) -> np.ndarray:
        """|d forward / dx|, the change-of-variable factor."""
        z = self._standardize(x)
        if self.kind == "probit":
            base = norm.pdf(z) / self.scale
        else:
            u = 1.0 / (1.0 + np.exp(-z))
            base = u * (1.0 - u) / self.scale
        if self.kind == "log-center-logistic":
            base = base / np.asarray(x, dtype=np.float64)
        return base


def to_unit_interval(values, kind: str, scale=None):
    """Map real or positive data into (0, 1) with proper scaling.

    The scale is the sample standard deviation (of the logs for the
    positive-data chain, which is also mean-centered). Returns the
    transformed values and the fitted spec for exact inversion.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2 and scale is None:
        raise UsageError("need at least two values to fit a scale")
    center = 0.0
    if kind == "log-center-logistic":
        if np.any(values <= 0):
            bad = np.flatnonzero(values <= 0)
            raise DomainError(
                f"log transform needs positive values; offending rows "
                f"{bad[:10].tolist()}"
            )
        logs = np.log(values)
        center = float(logs.mean())
        s = float(np.std(logs, ddof=1)) if scale is None else float(scale)
    else:
        s = float(np.std(values, ddof=1)) if scale is None else float(scale)
    if not s > 0:
        raise ConfigError("cannot scale constant data")
    spec = TransformSpec(kind, s, center)
    return spec.forward(values), spec


def pushback_density(f_unit, spec: TransformSpec, grid):
    """Map a density on (0, 1) back to the original scale.

    ``f_unit`` is a callable (or PiecewiseDensity) on [0, 1). Grid points
    outside the transform's range are trimmed with a warning. Returns
    ``(grid, values)``.
    """
    grid = np.asarray(grid, dtype=np.float64)
    keep = np.ones(grid.shape, dtype=bool)
    if spec.kind == "log-center-logistic":
        keep = grid > 0
    if not keep.all():
        warnings.warn(
            f"{int((~keep).sum())} grid points outside the transform range "
            "were trimmed", stacklevel=2)
        grid = grid[keep]
    u = spec.forward(grid)
    fu = f_unit.evaluate(u) if isinstance(f_unit, PiecewiseDensity) \
        else np.asarray(f_unit(u), dtype=np.float64)
    return grid, fu * spec.derivative(grid)


@dataclass
class Dataset:
    """Validated, sorted data plus the permutation back to file order."""

    values: np.ndarray          # sorted ascending
    order: np.ndarray           # original row of each sorted value
    domain: str
    source: str = ""
    n_rejected: int = 0
    rejected_rows: list[int] = field(default_factory=list)


def _check_domain(values, domain):
    if domain == "unit":
        bad = (values < 0.0) | (values >= 1.0)
    elif domain == "positive":
        bad = ~np.isfinite(values) | (values <= 0.0)
    elif domain == "real":
        bad = ~np.isfinite(values)
    else:
        raise UsageError(f"unknown domain {domain!r}")
    return np.flatnonzero(bad)


def ingest_csv(path, column=0, domain="unit") -> Dataset:
    """Read one numeric column, validate its domain, and sort it.

    An optional single header row is detected by being non-numeric. Rows
    that fail to parse raise immediately with their line number; rows that
    violate the domain are collected and reported together.
    """
    raw: list[float] = []
    value_lines: list[int] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        col = column
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if isinstance(col, str):
                if lineno == 1:
                    if col not in row:
                        raise UsageError(
                            f"column {col!r} not found in header {row}")
                    col = row.index(col)
                    continue
                raise UsageError("named column requires a header row")
            try:
                value = float(row[col])
            except (ValueError, IndexError):
                if lineno == 1:
                    continue    # header row
                raise UsageError(
                    f"{path}: line {lineno}: cannot parse {row!r}"
                ) from None
            raw.append(value)
            value_lines.append(lineno)
    values = np.asarray(raw, dtype=np.float64)
    lines = np.asarray(value_lines, dtype=np.int64)
    bad = _check_domain(values, domain)
    if bad.size:
        raise DomainError(
            f"{path}: {bad.size} values violate domain {domain!r}; "
            f"rows {lines[bad][:20].tolist()}"
        )
    order = np.argsort(values, kind="stable")
    return Dataset(values[order], order, domain, source=str(path))
