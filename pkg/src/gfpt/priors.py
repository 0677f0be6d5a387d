"""Prior hyperparameters: concentration schedules, depth priors, prior means.

Concentration values are evaluated lazily per node; no schedule ever
materializes the full tree.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import ConfigError, DomainError, UsageError
from .partition import PartitionTree, QaryPath

__all__ = [
    "AlphaSchedule",
    "BetaSchedule",
    "DepthPrior",
    "alpha_standard",
    "benford_block_prob",
    "benford_alpha",
    "depth_prior_truncated_poisson",
    "prior_mean_probability",
]


def alpha_standard(level: int, alpha0: float) -> float:
    """Polynomial concentration alpha0 * n^2 at the given level."""
    if alpha0 <= 0:
        raise ConfigError(f"alpha0 must be positive, got {alpha0}")
    if level < 1:
        raise UsageError(f"level must be >= 1, got {level}")
    return alpha0 * level**2


def benford_block_prob(path: QaryPath) -> float:
    """Probability of a digit block under the extended significant-digit law.

    For a nonzero leading digit this is log_q(1 + 1/v) with v the integer
    value of the digit string; blocks with leading digit 0 have probability 0.
    """
    if len(path) == 0:
        raise UsageError("block probability needs a non-empty path")
    if path.digits[0] == 0:
        return 0.0
    v = path.index
    return float(np.log1p(1.0 / v) / np.log(path.branching))


def benford_alpha(path: QaryPath, c) -> float:
    """Concentration of one node under the significant-digit elicitation.

    ``c`` is indexable with ``c[n-1]`` giving the positive scale of level n.
    Siblings of a common parent sum to exactly ``c[n-1]``; every node in the
    leading-digit-0 branch has concentration 0.
    """
    n = len(path)
    if n == 0:
        raise UsageError("alpha is defined for non-empty paths only")
    if path.digits[0] == 0:
        return 0.0
    cn = float(c[n - 1])
    if cn <= 0:
        raise ConfigError(f"c_{n} must be positive, got {cn}")
    v = path.index
    if n == 1:
        # sibling sum over nonzero leading digits telescopes to log_q(q) = 1
        return cn * float(np.log1p(1.0 / v) / np.log(path.branching))
    parent = v // path.branching
    return cn * float(np.log1p(1.0 / v) / np.log1p(1.0 / parent))


class AlphaSchedule:
    """Per-node concentration parameters of the branch-probability prior.

    Supported kinds:

    - ``polynomial``: alpha0 * n^delta, identical across nodes of a level,
    - ``exponential``: delta^n, identical across nodes of a level,
    - ``benford``: the significant-digit elicitation with level scales
      c_n = c0 * n^2 (zero on the leading-digit-0 branch),
    - ``table``: explicit per-node values, one array of length q^n per level.
    """

    def __init__(self, q, kind, *, alpha0=None, delta=None, c0=None,
                 levels=None):
        if q < 2:
            raise ConfigError(f"branching must be >= 2, got {q}")
        self.q = int(q)
        self.kind = kind
        self.alpha0 = alpha0
        self.delta = delta
        self.c0 = c0
        self._levels = levels
        if kind == "polynomial" and (alpha0 is None or alpha0 <= 0):
            raise ConfigError("polynomial schedule needs alpha0 > 0")
        if kind == "exponential" and (delta is None or delta <= 0):
            raise ConfigError("exponential schedule needs delta > 0")
        if kind == "benford" and (c0 is None or c0 <= 0):
            raise ConfigError("benford schedule needs c0 > 0")
        if kind == "table":
            if not levels:
                raise ConfigError("table schedule needs per-level arrays")
            self._levels = [np.asarray(a, dtype=np.float64) for a in levels]
            for n, arr in enumerate(self._levels, start=1):
                if arr.shape != (self.q**n,):
                    raise ConfigError(
                        f"level {n} table has shape {arr.shape}, "
                        f"expected {(self.q ** n,)}"
                    )
                if np.any(arr < 0):
                    raise ConfigError("alpha values must be non-negative")
                if np.any(arr.reshape(-1, self.q).sum(axis=1) <= 0):
                    raise ConfigError("sibling alpha sums must be positive")

    @classmethod
    def polynomial(cls, alpha0: float, q: int = 2, delta: float = 2.0):
        return cls(q, "polynomial", alpha0=alpha0, delta=delta)

    @classmethod
    def exponential(cls, delta: float, q: int = 2):
        return cls(q, "exponential", delta=delta)

    @classmethod
    def benford(cls, q: int, c0: float):
        return cls(q, "benford", c0=c0)

    @classmethod
    def from_table(cls, q: int, levels):
        return cls(q, "table", levels=levels)

    @property
    def is_level_constant(self) -> bool:
        return self.kind in ("polynomial", "exponential")

    def level_value(self, level: int) -> float:
        """Common node value at a level (level-constant kinds only)."""
        if self.kind == "polynomial":
            return self.alpha0 * float(level) ** self.delta
        if self.kind == "exponential":
            return self.delta**level
        raise UsageError(f"{self.kind} schedule is not level-constant")

    def c_level(self, level: int) -> float:
        """Benford level scale c_n = c0 * n^2."""
        return self.c0 * level**2

    def children(self, level: int, parent_ids: np.ndarray) -> np.ndarray:
        """Alphas of the q children of each parent, shape (len(ids), q).

        ``level`` is the children's depth (>= 1); parents sit at level - 1.
        """
        parent_ids = np.asarray(parent_ids, dtype=np.int64)
        n = parent_ids.size
        q = self.q
        if self.is_level_constant:
            return np.full((n, q), self.level_value(level))
        if self.kind == "table":
            arr = self._levels[level - 1]
            idx = parent_ids[:, None] * q + np.arange(q)
            return arr[idx]
        # benford: child integer value v = parent*q + k
        v = parent_ids[:, None] * q + np.arange(q)
        cn = self.c_level(level)
        num = np.log1p(1.0 / np.maximum(v, 1))
        if level == 1:
            out = cn * num / np.log(q)
        else:
            den = np.log1p(1.0 / np.maximum(parent_ids, 1))[:, None]
            out = cn * num / den
        # the whole leading-digit-0 branch carries zero concentration
        out[v < q ** (level - 1)] = 0.0
        return out

    def value(self, path: QaryPath) -> float:
        """Concentration at a single node."""
        if path.branching != self.q:
            raise UsageError("path branching does not match schedule")
        n = len(path)
        if n == 0:
            raise UsageError("alpha is defined for non-empty paths only")
        if self.is_level_constant:
            return self.level_value(n)
        if self.kind == "table":
            return float(self._levels[n - 1][path.index])
        cseq = _BenfordC(self.c0)
        return benford_alpha(path, cseq)


class _BenfordC:
    """c_n = c0 * n^2, indexable as c[n-1]."""

    def __init__(self, c0):
        self.c0 = c0

    def __getitem__(self, i):
        return self.c0 * (i + 1) ** 2


class BetaSchedule:
    """Concentrations of the random-partition ratio prior (binary trees).

    Either a single constant, one value per level, or explicit per-node
    (left, right) pairs. Every value must be strictly positive.
    """

    def __init__(self, kind, *, value=None, per_level=None, levels=None):
        self.kind = kind
        self._value = value
        self._per_level = per_level
        self._levels = levels
        if kind == "constant" and (value is None or value <= 0):
            raise ConfigError("beta must be positive")
        if kind == "per_level":
            self._per_level = np.asarray(per_level, dtype=np.float64)
            if np.any(self._per_level <= 0):
                raise ConfigError("all per-level betas must be positive")
        if kind == "table":
            self._levels = [np.asarray(a, dtype=np.float64) for a in levels]
            for n, arr in enumerate(self._levels, start=1):
                if arr.shape != (2 ** (n - 1), 2):
                    raise ConfigError(
                        f"level {n} beta table must have shape "
                        f"{(2 ** (n - 1), 2)}, got {arr.shape}"
                    )
                if np.any(arr <= 0):
                    raise ConfigError("all betas must be positive")

    @classmethod
    def constant(cls, value: float = 2.0):
        return cls("constant", value=value)

    @classmethod
    def per_level(cls, values):
        return cls("per_level", per_level=values)

    @classmethod
    def from_table(cls, levels):
        return cls("table", levels=levels)

    @property
    def is_level_symmetric(self) -> bool:
        return self.kind in ("constant", "per_level")

    def level_beta(self, level: int) -> float:
        """Symmetric concentration of level ``level`` (>= 1)."""
        if self.kind == "constant":
            return float(self._value)
        if self.kind == "per_level":
            if level - 1 >= self._per_level.size:
                return float(self._per_level[-1])
            return float(self._per_level[level - 1])
        raise UsageError("per-node beta table is not level-symmetric")

    def pairs(self, level: int, parent_ids: np.ndarray) -> np.ndarray:
        """(left, right) concentrations per parent, shape (len(ids), 2)."""
        parent_ids = np.asarray(parent_ids, dtype=np.int64)
        if self.is_level_symmetric:
            b = self.level_beta(level)
            return np.full((parent_ids.size, 2), b)
        return self._levels[level - 1][parent_ids]


class DepthPrior:
    """Prior PMF of the latent number of informative digits.

    Attributes
    ----------
    n_min, n_max : int
        Support bounds (inclusive).
    pmf : ndarray
        Probabilities over n_min..n_max, summing to 1.
    """

    def __init__(self, n_min: int, pmf):
        pmf = np.asarray(pmf, dtype=np.float64)
        if pmf.ndim != 1 or pmf.size == 0:
            raise ConfigError("depth prior needs a non-empty pmf")
        if np.any(pmf < 0) or not np.isfinite(pmf).all():
            raise ConfigError("pmf values must be finite and non-negative")
        total = pmf.sum()
        if total <= 0:
            raise ConfigError("pmf must have positive mass")
        if n_min < 0:
            raise ConfigError("n_min must be >= 0")
        self.n_min = int(n_min)
        self.n_max = int(n_min + pmf.size - 1)
        self.pmf = pmf / total

    @classmethod
    def truncated_poisson(cls, lam: float, n_min: int, n_max: int):
        """Poisson(lam) restricted and renormalized to {n_min..n_max}."""
        if lam <= 0:
            raise ConfigError(f"lambda must be positive, got {lam}")
        if not 0 <= n_min <= n_max:
            raise ConfigError(f"invalid support {{{n_min}..{n_max}}}")
        n = np.arange(n_min, n_max + 1)
        logp = -lam + n * np.log(lam) - gammaln(n + 1)
        return cls(n_min, np.exp(logp - logsumexp(logp)))

    @classmethod
    def point_mass(cls, n: int):
        return cls(n, np.ones(1))

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def logpmf(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.pmf)

    def prob(self, n: int) -> float:
        if self.n_min <= n <= self.n_max:
            return float(self.pmf[n - self.n_min])
        return 0.0

    def prob_geq(self, d: int) -> float:
        """P(N >= d)."""
        if d <= self.n_min:
            return 1.0
        if d > self.n_max:
            return 0.0
        return float(self.pmf[d - self.n_min:].sum())

    def mean(self) -> float:
        return float(self.support @ self.pmf)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.choice(self.support, size=size, p=self.pmf)


def depth_prior_truncated_poisson(lam: float, n_min: int, n_max: int) -> DepthPrior:
    """Truncated-Poisson depth prior on {n_min..n_max}."""
    return DepthPrior.truncated_poisson(lam, n_min, n_max)


def prior_mean_probability(
    path: QaryPath,
    alpha: AlphaSchedule,
    depth_prior: DepthPrior,
    partition: PartitionTree,
) -> float:
    """Expected prior probability of the interval addressed by ``path``.

    Mixes, over the depth prior, the exact mean interval probability of the
    random measure: below the latent depth the mass spreads uniformly within
    the depth-n ancestor, above it the mean branch probabilities multiply.
    """
    d = len(path)
    if d == 0:
        return 1.0
    if d > partition.max_depth:
        raise ConfigError("path deeper than the partition")
    # mean branch probability at each level along the path
    ratio = np.empty(d)
    lengths = np.empty(d + 1)
    lengths[0] = 1.0
    for j in range(1, d + 1):
        parent = QaryPath(path.branching, path.digits[:j - 1])
        sibs = alpha.children(j, np.array([parent.index]))[0]
        s = sibs.sum()
        if s <= 0:
            raise ConfigError(f"sibling alpha sum at level {j} is zero")
        ratio[j - 1] = sibs[path.digits[j - 1]] / s
        _, lengths[j] = partition.interval(
            QaryPath(path.branching, path.digits[:j]))
    cumratio = np.concatenate([[1.0], np.cumprod(ratio)])
    total = 0.0
    for n in range(d):
        p = depth_prior.prob(n)
        if p:
            total += p * (lengths[d] / lengths[n]) * cumratio[n]
    total += depth_prior.prob_geq(d) * cumratio[d]
    return float(total)
