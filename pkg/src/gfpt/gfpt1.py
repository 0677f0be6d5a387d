"""Exact posterior inference for digit trees with a random truncation depth.

Everything here is closed form: the depth posterior is a finite categorical
distribution whose weights accumulate level-by-level marginal-likelihood
ratios, and branch probabilities are conjugate beta/Dirichlet updates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, NumericalError, UsageError
from .logbeta import log_beta_ratio_rows
from .partition import _MAX_DENSE_NODES, CountsTree, PartitionTree, build_counts
from .priors import AlphaSchedule, DepthPrior

__all__ = [
    "DepthPosterior",
    "GammaTree",
    "DensityDraw",
    "DensityEstimate",
    "Gfpt1Fit",
    "depth_posterior",
    "posterior_gamma",
    "sample_posterior",
    "posterior_mean_density",
    "eval_density",
    "credible_bands",
    "log_predictive",
    "fit_gfpt1",
]


@dataclass
class DepthPosterior:
    """Posterior PMF of the truncation depth over a finite support."""

    support: np.ndarray        # int, ascending
    log_weights: np.ndarray    # unnormalized
    pmf: np.ndarray

    @classmethod
    def from_log_weights(cls, support, log_weights):
        support = np.asarray(support, dtype=np.int64)
        log_weights = np.asarray(log_weights, dtype=np.float64)
        if not np.isfinite(log_weights).all():
            bad = support[~np.isfinite(log_weights)]
            raise NumericalError(
                f"non-finite depth log-weight at n={bad.tolist()}"
            )
        pmf = np.exp(log_weights - logsumexp(log_weights))
        pmf /= pmf.sum()
        return cls(support, log_weights, pmf)

    def prob(self, n: int) -> float:
        i = n - int(self.support[0])
        if 0 <= i < self.support.size:
            return float(self.pmf[i])
        return 0.0

    def mean(self) -> float:
        return float(self.support @ self.pmf)

    def mean_power(self, q: int) -> float:
        """E[q^N] computed exactly over the finite support."""
        return float((np.asarray(q, dtype=np.float64) ** self.support) @ self.pmf)

    def mode(self) -> int:
        return int(self.support[np.argmax(self.pmf)])

    def sample(self, rng: np.random.Generator, size=None):
        cdf = np.cumsum(self.pmf)
        u = rng.random(size)
        return self.support[np.minimum(
            np.searchsorted(cdf, u, side="right"), self.support.size - 1)]


class GammaTree:
    """Posterior per-node concentrations: prior alpha plus observed counts.

    Nodes without data keep their prior concentration, so only
    data-carrying nodes are stored explicitly.
    """

    def __init__(self, counts: CountsTree, alpha: AlphaSchedule):
        if alpha.q != counts.partition.q:
            raise UsageError("alpha schedule branching != partition branching")
        self.counts = counts
        self.alpha = alpha
        self.partition = counts.partition

    @property
    def depth(self) -> int:
        return self.counts.depth

    def split_arrays(self, level: int):
        """(parent ids, alpha rows, count rows) of occupied parents."""
        sp = self.counts.split(level)
        arows = self.alpha.children(level, sp.parent_ids)
        return sp.parent_ids, arows, sp.child_counts

    def dense_level(self, level: int) -> np.ndarray:
        """Gamma for all q^(level-1) parents at ``level - 1``, shape (.., q)."""
        q = self.partition.q
        n_parents = q ** (level - 1)
        if n_parents * q > _MAX_DENSE_NODES:
            raise ConfigError(f"level {level} too large to materialize")
        parents = np.arange(n_parents, dtype=np.int64)
        dense = self.alpha.children(level, parents)
        sp = self.counts.split(level)
        dense[sp.parent_ids] += sp.child_counts
        return dense

    def path_ratio_logs(self, x: np.ndarray, depth: int):
        """Cumulative log posterior-mean branch ratios along digit paths.

        Returns ``(cum, log_len)``, each of shape ``(depth + 1, len(x))``:
        ``cum[n]`` is the log product over levels 1..n of
        gamma_node / (sum of sibling gammas), and ``log_len[n]`` the log
        interval length at level n.
        """
        ids, log_len = self.partition.walk_path(x, depth)
        cum = np.zeros((depth + 1, x.size))
        acc = np.zeros(x.size)
        for j in range(1, depth + 1):
            parents = ids[j - 1]
            digits = ids[j] - parents * self.partition.q
            arows = self.alpha.children(j, parents)
            occ_ids, occ_counts = self.counts.occupied(j)
            cnode = _lookup(occ_ids, occ_counts, ids[j])
            occ_p, occ_pc = self.counts.occupied(j - 1)
            cparent = _lookup(occ_p, occ_pc, parents)
            num = arows[np.arange(parents.size), digits] + cnode
            den = arows.sum(axis=1) + cparent
            with np.errstate(divide="ignore"):
                acc = acc + np.log(num) - np.log(den)
            cum[j] = acc
        return cum, log_len


def _lookup(sorted_ids, values, query):
    """values[query] for sparse (sorted_ids -> values), 0 where absent."""
    if sorted_ids.size == 0:
        return np.zeros(query.shape, dtype=values.dtype if values.size else np.int64)
    pos = np.searchsorted(sorted_ids, query)
    pos = np.minimum(pos, sorted_ids.size - 1)
    hit = sorted_ids[pos] == query
    out = np.where(hit, values[pos], 0)
    return out


def depth_posterior(
    counts: CountsTree,
    alpha: AlphaSchedule,
    prior: DepthPrior,
    partition: PartitionTree | None = None,
) -> DepthPosterior:
    """Closed-form posterior PMF of the truncation depth.

    The log weight of depth n accumulates, over levels 1..n, the log ratio
    B(alpha + counts)/B(alpha) of every data-carrying parent, minus the
    level-n term sum(count * log length) over leaves. Everything runs in
    log space; the prior normalizers are included so that adding data-free
    levels leaves each level's factor at exactly 1.
    """
    partition = partition or counts.partition
    if counts.depth < prior.n_max:
        raise UsageError(
            f"counts depth {counts.depth} < prior support max {prior.n_max}"
        )
    n_top = prior.n_max
    s_beta = np.zeros(n_top + 1)
    s_leaf = np.zeros(n_top + 1)
    for j in range(1, n_top + 1):
        sp = counts.split(j)
        if sp.parent_ids.size:
            arows = alpha.children(j, sp.parent_ids)
            terms = log_beta_ratio_rows(arows, sp.child_counts)
            s_beta[j] = terms.sum()
            if not np.isfinite(s_beta[j]):
                raise NumericalError(f"non-finite likelihood term at level {j}")
        s_leaf[j] = counts.leaf_term(j)
    cum = np.cumsum(s_beta)
    logw = prior.logpmf() + cum[prior.support] - s_leaf[prior.support]
    # a -inf prior weight stays excluded; only finite-support weights matter
    keep = prior.pmf > 0
    if not keep.all():
        logw = np.where(keep, logw, -np.inf)
        sup = prior.support[keep]
        return DepthPosterior.from_log_weights(sup, logw[keep])
    return DepthPosterior.from_log_weights(prior.support, logw)


def posterior_gamma(counts: CountsTree, alpha: AlphaSchedule) -> GammaTree:
    """Conjugate per-node update: gamma = alpha + counts."""
    return GammaTree(counts, alpha)


@dataclass
class DensityDraw:
    """One posterior draw: a depth and branch probabilities above it.

    ``levels[j]`` holds the child probabilities of all q^j parents at depth
    j, shape (q^j, q), for j = 0..depth-1. The induced density is constant
    on depth-``depth`` intervals and uniform inside them.
    """

    partition: PartitionTree
    depth: int
    levels: list[np.ndarray] = field(repr=False)

    def leaf_probabilities(self) -> np.ndarray:
        """Mass of every depth-``depth`` interval (telescopes to sum 1)."""
        vals = np.ones(1)
        for y in self.levels:
            vals = (vals[:, None] * y).ravel()
        return vals

    def integral(self) -> float:
        """Leafwise integral of the induced density (= 1 up to roundoff)."""
        return float(self.leaf_probabilities().sum())

    def evaluate(self, x) -> np.ndarray:
        """Density at each point of ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        ids, log_len = self.partition.walk_path(x, self.depth)
        q = self.partition.q
        acc = np.zeros(x.size)
        for j in range(1, self.depth + 1):
            parents = ids[j - 1]
            digits = ids[j] - parents * q
            with np.errstate(divide="ignore"):
                acc += np.log(self.levels[j - 1][parents, digits])
        return np.exp(acc - log_len[self.depth])

    def log_evaluate(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        ids, log_len = self.partition.walk_path(x, self.depth)
        q = self.partition.q
        acc = np.zeros(x.size)
        for j in range(1, self.depth + 1):
            parents = ids[j - 1]
            digits = ids[j] - parents * q
            with np.errstate(divide="ignore"):
                acc += np.log(self.levels[j - 1][parents, digits])
        return acc - log_len[self.depth]


def _sample_level_probs(rng, gamma_rows: np.ndarray) -> np.ndarray:
    """Child-probability rows from independent beta/Dirichlet draws.

    Zero-concentration coordinates come out exactly 0 (point mass).
    """
    if gamma_rows.shape[1] == 2:
        y0 = np.empty(gamma_rows.shape[0])
        a, b = gamma_rows[:, 0], gamma_rows[:, 1]
        pos = (a > 0) & (b > 0)
        y0[pos] = rng.beta(a[pos], b[pos])
        y0[(a > 0) & (b <= 0)] = 1.0
        y0[(a <= 0) & (b > 0)] = 0.0
        return np.stack([y0, 1.0 - y0], axis=1)
    g = rng.standard_gamma(gamma_rows)
    g[gamma_rows <= 0] = 0.0
    tot = g.sum(axis=1, keepdims=True)
    # a total of zero has probability zero; guard against it anyway
    bad = tot[:, 0] == 0
    if np.any(bad):
        g[bad] = gamma_rows[bad] > 0
        tot = g.sum(axis=1, keepdims=True)
    return g / tot


def sample_posterior(
    depth_post: DepthPosterior,
    gamma: GammaTree,
    rng,
    n_draws: int,
) -> list[DensityDraw]:
    """Exact posterior draws: depth from its categorical PMF, then
    independent conjugate branch probabilities at every level above it."""
    if n_draws < 1:
        raise UsageError("n_draws must be >= 1")
    rng = np.random.default_rng(rng)
    depths = depth_post.sample(rng, n_draws)
    dense_cache: dict[int, np.ndarray] = {}
    draws = []
    for n in depths:
        n = int(n)
        levels = []
        for j in range(1, n + 1):
            if j not in dense_cache:
                dense_cache[j] = gamma.dense_level(j)
            levels.append(_sample_level_probs(rng, dense_cache[j]))
        draws.append(DensityDraw(gamma.partition, n, levels))
    return draws


def eval_density(draw: DensityDraw, x) -> np.ndarray:
    """Density of one posterior draw at ``x``."""
    return draw.evaluate(x)


def posterior_mean_density(
    x,
    depth_post: DepthPosterior,
    gamma: GammaTree,
    partition: PartitionTree | None = None,
) -> np.ndarray:
    """Pointwise posterior-mean density (the exact depth mixture).

    Each point costs one digit-path walk to the deepest supported level.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    n_top = int(depth_post.support[-1])
    cum, log_len = gamma.path_ratio_logs(x, n_top)
    out = np.zeros(x.size)
    for i, n in enumerate(depth_post.support):
        p = depth_post.pmf[i]
        if p > 0:
            out += p * np.exp(cum[n] - log_len[n])
    return out


def log_predictive(draws: list[DensityDraw], x) -> np.ndarray:
    """Matrix of log densities, rows = points of ``x``, columns = draws."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.empty((x.size, len(draws)))
    for s, draw in enumerate(draws):
        out[:, s] = draw.log_evaluate(x)
    return out


def credible_bands(draws: list[DensityDraw], grid, level: float = 0.95):
    """Simultaneous bands: keep the fraction ``level`` of draws closest to
    the pointwise mean in sup norm, then take their pointwise min/max.

    Ties in the sup-norm distance break by draw index, so bands are
    deterministic for a fixed draw sequence.
    """
    if len(draws) < 100:
        raise UsageError("credible bands need at least 100 draws")
    if not 0 < level <= 1:
        raise UsageError(f"level must lie in (0, 1], got {level}")
    grid = np.asarray(grid, dtype=np.float64)
    vals = np.stack([d.evaluate(grid) for d in draws])
    mean = vals.mean(axis=0)
    dist = np.abs(vals - mean).max(axis=1)
    n_keep = int(np.ceil(level * len(draws)))
    order = np.argsort(dist, kind="stable")[:n_keep]
    kept = vals[order]
    return kept.min(axis=0), kept.max(axis=0)


class DensityEstimate:
    """Posterior-mean density in depth-mixture form.

    One piecewise-constant layer per supported depth, weighted by the depth
    posterior. Exact piecewise materialization is available whenever the
    deepest contributing level fits in memory.
    """

    def __init__(self, depth_post: DepthPosterior, gamma: GammaTree):
        self.depth_post = depth_post
        self.gamma = gamma
        self.partition = gamma.partition

    def evaluate(self, x) -> np.ndarray:
        return posterior_mean_density(x, self.depth_post, self.gamma)

    def max_depth(self, tail_eps: float = 0.0) -> int:
        """Deepest level whose posterior weight exceeds ``tail_eps``."""
        keep = np.flatnonzero(self.depth_post.pmf > tail_eps)
        if keep.size == 0:
            return int(self.depth_post.support[0])
        return int(self.depth_post.support[keep[-1]])

    def as_piecewise(self, tail_eps: float = 0.0):
        """(breakpoints, values) of the mixture on its exact partition.

        Layers with posterior weight <= ``tail_eps`` are dropped (and their
        mass with them); with the default 0 the result is exact.
        """
        depth = self.max_depth(tail_eps)
        q = self.partition.q
        if q**depth > _MAX_DENSE_NODES:
            raise ConfigError(
                f"piecewise form needs q^{depth} cells; pass tail_eps or "
                "evaluate pointwise instead"
            )
        dens = np.zeros(q**depth)
        mass = np.ones(1)
        lengths = np.ones(1)
        for i, n in enumerate(range(0, depth + 1)):
            p = self.depth_post.prob(n)
            if p > 0:
                dens += p * np.repeat(mass / lengths, q ** (depth - n))
            if n == depth:
                break
            dense_gamma = self.gamma.dense_level(n + 1)
            ratios = dense_gamma / dense_gamma.sum(axis=1, keepdims=True)
            mass = (mass[:, None] * ratios).ravel()
            if self.partition.is_uniform:
                lengths = np.full(q ** (n + 1), q ** (-float(n + 1)))
            else:
                lengths = (lengths[:, None]
                           * self.partition._ratios[n]).ravel()
        return self.partition.breakpoints(depth), dens


@dataclass
class Gfpt1Fit:
    """Bundle of everything a fitted closed-form model exposes."""

    partition: PartitionTree
    alpha: AlphaSchedule
    prior: DepthPrior
    counts: CountsTree
    depth_post: DepthPosterior
    gamma: GammaTree

    @property
    def estimate(self) -> DensityEstimate:
        return DensityEstimate(self.depth_post, self.gamma)

    def sample(self, rng, n_draws: int) -> list[DensityDraw]:
        return sample_posterior(self.depth_post, self.gamma, rng, n_draws)


def fit_gfpt1(
    data,
    partition: PartitionTree,
    alpha: AlphaSchedule,
    prior: DepthPrior,
) -> Gfpt1Fit:
    """Count digits, form the depth posterior, and bundle the fit.

    ``data`` must be sorted ascending in [0, 1).
    """
    counts = build_counts(data, partition, max(prior.n_max, 0))
    post = depth_posterior(counts, alpha, prior, partition)
    gamma = posterior_gamma(counts, alpha)
    return Gfpt1Fit(partition, alpha, prior, counts, post, gamma)
