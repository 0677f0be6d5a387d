"""Nested q-ary partitions of [0, 1), digit extraction, and per-node counts.

A partition tree splits [0, 1) recursively into q half-open child intervals
per node. Nodes at depth j are indexed 0..q^j-1 in left-to-right order, which
coincides with the integer value of the digit string. All intervals are
half-open [a, b); the value 1.0 is never a valid observation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, UsageError

__all__ = [
    "QaryPath",
    "Ordering",
    "lex_compare",
    "PartitionTree",
    "ParentSplit",
    "CountsTree",
    "digits_of",
    "interval_of",
    "build_counts",
]

# Sibling fractions at a node must sum to 1 within this tolerance.
_RATIO_SUM_TOL = 1e-12

# Refuse to materialize ratio levels beyond this many nodes.
_MAX_DENSE_NODES = 1 << 24


@dataclass(frozen=True)
class QaryPath:
    """A finite digit string addressing one node of a partition tree.

    The empty path addresses the root interval [0, 1).
    """

    branching: int
    digits: tuple[int, ...] = ()

    def __post_init__(self):
        if self.branching < 2:
            raise ConfigError(f"branching must be >= 2, got {self.branching}")
        for d in self.digits:
            if not 0 <= d < self.branching:
                raise DomainError(
                    f"digit {d} outside {{0,..,{self.branching - 1}}}"
                )

    def __len__(self):
        return len(self.digits)

    @property
    def index(self) -> int:
        """Integer value of the digit string (= rank among same-depth nodes)."""
        v = 0
        for d in self.digits:
            v = v * self.branching + d
        return v

    @classmethod
    def from_index(cls, branching: int, depth: int, index: int) -> "QaryPath":
        digits = []
        for _ in range(depth):
            digits.append(index % branching)
            index //= branching
        return cls(branching, tuple(reversed(digits)))

    def child(self, k: int) -> "QaryPath":
        return QaryPath(self.branching, self.digits + (k,))


class Ordering(enum.Enum):
    PRECEDES = -1
    EQUAL = 0
    FOLLOWS = 1


def lex_compare(p1: QaryPath, p2: QaryPath) -> Ordering:
    """Compare two paths in lexicographic order.

    A proper prefix precedes its extensions; otherwise the first differing
    digit decides.
    """
    if p1.branching != p2.branching:
        raise UsageError(
            f"branching mismatch: {p1.branching} vs {p2.branching}"
        )
    for a, b in zip(p1.digits, p2.digits):
        if a < b:
            return Ordering.PRECEDES
        if a > b:
            return Ordering.FOLLOWS
    if len(p1) == len(p2):
        return Ordering.EQUAL
    return Ordering.PRECEDES if len(p1) < len(p2) else Ordering.FOLLOWS


class PartitionTree:
    """A nested q-ary partition of [0, 1) down to a maximum depth.

    Parameters
    ----------
    branching : int
        Number of children per node (q >= 2).
    max_depth : int
        Deepest level of the partition.
    ratios : sequence of ndarray or None
        ``ratios[j]`` has shape ``(q**j, q)`` and holds the child-length
        fractions of every node at depth j, each row strictly positive and
        summing to 1. ``None`` means the uniform partition (all fractions
        1/q), which is never materialized.
    """

    def __init__(self, branching, max_depth, ratios=None):
        if branching < 2:
            raise ConfigError(f"branching must be >= 2, got {branching}")
        if max_depth < 0:
            raise ConfigError(f"max_depth must be >= 0, got {max_depth}")
        self.q = int(branching)
        self.max_depth = int(max_depth)
        if ratios is not None:
            ratios = [np.asarray(r, dtype=np.float64) for r in ratios]
            if len(ratios) != max_depth:
                raise ConfigError(
                    f"need {max_depth} ratio levels, got {len(ratios)}"
                )
            for j, r in enumerate(ratios):
                if r.shape != (self.q**j, self.q):
                    raise ConfigError(
                        f"level {j} ratios have shape {r.shape}, "
                        f"expected {(self.q ** j, self.q)}"
                    )
                if r.size > _MAX_DENSE_NODES:
                    raise ConfigError(
                        f"level {j} too large to materialize; "
                        "use a uniform partition"
                    )
                if np.any(r <= 0.0) or np.any(r >= 1.0):
                    raise ConfigError(
                        f"level {j}: child fractions must lie strictly in (0,1)"
                    )
                if np.max(np.abs(r.sum(axis=1) - 1.0)) > _RATIO_SUM_TOL:
                    raise ConfigError(
                        f"level {j}: child fractions must sum to 1"
                    )
        self._ratios = ratios

    @classmethod
    def uniform(cls, branching: int, max_depth: int) -> "PartitionTree":
        """The standard base-q partition with equal interval lengths."""
        return cls(branching, max_depth, ratios=None)

    @classmethod
    def binary_from_left_ratios(cls, left_ratios) -> "PartitionTree":
        """Binary tree from per-level arrays of left-child fractions."""
        levels = []
        for j, r in enumerate(left_ratios):
            r = np.asarray(r, dtype=np.float64)
            if r.shape != (2**j,):
                raise ConfigError(
                    f"level {j} left ratios have shape {r.shape}, "
                    f"expected {(2 ** j,)}"
                )
            levels.append(np.stack([r, 1.0 - r], axis=1))
        return cls(2, len(levels), ratios=levels)

    @property
    def is_uniform(self) -> bool:
        return self._ratios is None

    def ratio_rows(self, level: int, ids: np.ndarray) -> np.ndarray:
        """Child fractions of the given nodes at ``level``, shape (len, q)."""
        if self._ratios is None:
            return np.full((len(ids), self.q), 1.0 / self.q)
        return self._ratios[level][ids]

    def _check_depth(self, depth: int):
        if depth > self.max_depth:
            raise ConfigError(
                f"depth {depth} exceeds partition max_depth {self.max_depth}"
            )

    def interval(self, path: QaryPath) -> tuple[float, float]:
        """Left endpoint and length of the node addressed by ``path``."""
        self._check_depth(len(path))
        a, ell = 0.0, 1.0
        node = 0
        for j, d in enumerate(path.digits):
            row = self.ratio_rows(j, np.array([node]))[0]
            cum = np.cumsum(row)
            if d > 0:
                a = a + ell * float(cum[d - 1])
            ell = ell * float(row[d])
            node = node * self.q + d
        return a, ell

    def digits(self, x: float, depth: int) -> QaryPath:
        """Digit string of ``x`` down to ``depth``."""
        if not 0.0 <= x < 1.0:
            raise DomainError(f"x={x!r} outside [0, 1)")
        self._check_depth(depth)
        a, ell = 0.0, 1.0
        node = 0
        out = []
        for j in range(depth):
            row = self.ratio_rows(j, np.array([node]))[0]
            cum = np.cumsum(row)
            bounds = a + ell * cum[:-1]
            k = int(np.searchsorted(bounds, x, side="right"))
            if k > 0:
                a = a + ell * float(cum[k - 1])
            ell = ell * float(row[k])
            node = node * self.q + k
            out.append(k)
        return QaryPath(self.q, tuple(out))

    def leaf_indices(self, x: np.ndarray, depth: int) -> np.ndarray:
        """Node index at ``depth`` of every point in ``x`` (vectorized)."""
        x = np.asarray(x, dtype=np.float64)
        if x.size and (x.min() < 0.0 or x.max() >= 1.0):
            raise DomainError("values outside [0, 1)")
        self._check_depth(depth)
        if self.is_uniform and self.q == 2:
            # multiplying by a power of two is exact in binary floating point
            return np.minimum(
                (x * 2.0**depth).astype(np.int64), 2**depth - 1
            )
        node = np.zeros(x.shape, dtype=np.int64)
        a = np.zeros_like(x)
        ell = np.ones_like(x)
        for j in range(depth):
            a, ell, node = self._descend(x, a, ell, node, j)
        return node

    def _descend(self, x, a, ell, node, j):
        """One level of the digit walk; boundary arithmetic matches digits()."""
        rows = self.ratio_rows(j, node)
        cums = np.cumsum(rows, axis=1)
        bounds = a[:, None] + ell[:, None] * cums[:, :-1]
        k = (x[:, None] >= bounds).sum(axis=1)
        left = np.take_along_axis(cums, np.maximum(k - 1, 0)[:, None], axis=1)[:, 0]
        a = np.where(k > 0, a + ell * left, a)
        ell = ell * np.take_along_axis(rows, k[:, None], axis=1)[:, 0]
        return a, ell, node * self.q + k

    def walk_path(self, x: np.ndarray, depth: int):
        """Node ids and log interval lengths along each point's digit path.

        Returns ``(ids, log_len)`` with shapes ``(depth + 1, len(x))``;
        row j corresponds to level j (row 0 is the root).
        """
        x = np.asarray(x, dtype=np.float64)
        if x.size and (x.min() < 0.0 or x.max() >= 1.0):
            raise DomainError("values outside [0, 1)")
        self._check_depth(depth)
        ids = np.zeros((depth + 1, x.size), dtype=np.int64)
        log_len = np.zeros((depth + 1, x.size))
        if self.is_uniform and self.q == 2:
            leaf = np.minimum((x * 2.0**depth).astype(np.int64), 2**depth - 1)
            for j in range(depth, 0, -1):
                ids[j] = leaf
                leaf = leaf >> 1
            log_len[:] = (-np.log(2.0) * np.arange(depth + 1))[:, None]
            return ids, log_len
        node = np.zeros(x.size, dtype=np.int64)
        a = np.zeros(x.size)
        ell = np.ones(x.size)
        for j in range(depth):
            a, ell, node = self._descend(x, a, ell, node, j)
            ids[j + 1] = node
            log_len[j + 1] = np.log(ell)
        return ids, log_len

    def left_endpoints(self, x: np.ndarray, depth: int) -> np.ndarray:
        """Left endpoint of each point's depth-``depth`` interval."""
        x = np.asarray(x, dtype=np.float64)
        if x.size and (x.min() < 0.0 or x.max() >= 1.0):
            raise DomainError("values outside [0, 1)")
        self._check_depth(depth)
        if self.is_uniform and self.q == 2:
            scale = 2.0**depth
            return np.minimum((x * scale).astype(np.int64), 2**depth - 1) / scale
        node = np.zeros(x.size, dtype=np.int64)
        a = np.zeros(x.size)
        ell = np.ones(x.size)
        for j in range(depth):
            a, ell, node = self._descend(x, a, ell, node, j)
        return a

    def dense_lengths(self, depth: int) -> np.ndarray:
        """Lengths of all q^depth intervals at ``depth``, in node order."""
        self._check_depth(depth)
        if self.q**depth > _MAX_DENSE_NODES:
            raise ConfigError(f"level {depth} too large to materialize")
        if self.is_uniform:
            return np.full(self.q**depth, self.q ** (-float(depth)))
        ell = np.ones(1)
        for j in range(depth):
            ell = (ell[:, None] * self._ratios[j]).ravel()
        return ell

    def breakpoints(self, depth: int) -> np.ndarray:
        """The q^depth + 1 breakpoints of the depth-``depth`` partition."""
        ell = self.dense_lengths(depth)
        out = np.empty(ell.size + 1)
        out[0] = 0.0
        np.cumsum(ell, out=out[1:])
        out[-1] = 1.0
        return out


def digits_of(x: float, partition: PartitionTree, depth: int) -> QaryPath:
    """Digit string of ``x`` under ``partition`` down to ``depth``."""
    return partition.digits(x, depth)


def interval_of(path: QaryPath, partition: PartitionTree) -> tuple[float, float]:
    """(left endpoint, length) of the interval addressed by ``path``."""
    if path.branching != partition.q:
        raise UsageError(
            f"path branching {path.branching} != partition branching {partition.q}"
        )
    return partition.interval(path)


@dataclass
class ParentSplit:
    """Counts of the q children of every data-carrying parent at one level.

    ``child_log_len`` is None for uniform partitions, where every interval
    at depth j has log length ``-j * log q``.
    """

    parent_ids: np.ndarray          # int64, sorted, parents at depth j-1
    child_counts: np.ndarray        # int64, shape (n_parents, q)
    child_log_len: np.ndarray | None = None   # float64, same shape


@dataclass
class CountsTree:
    """Observation counts per partition node, for all depths 0..depth.

    Level j >= 1 is stored as the split of every occupied parent at depth
    j-1 into its q children; the root count is ``total``.
    """

    partition: PartitionTree
    depth: int
    total: int
    splits: list[ParentSplit] = field(repr=False)   # splits[j-1] -> level j

    def split(self, level: int) -> ParentSplit:
        if not 1 <= level <= self.depth:
            raise UsageError(f"level {level} outside 1..{self.depth}")
        return self.splits[level - 1]

    def occupied(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        """(node ids, counts) of data-carrying nodes at ``level``."""
        if level == 0:
            if self.total == 0:
                return np.empty(0, np.int64), np.empty(0, np.int64)
            return np.zeros(1, np.int64), np.array([self.total], np.int64)
        sp = self.split(level)
        q = self.partition.q
        ids = (sp.parent_ids[:, None] * q + np.arange(q)).ravel()
        cnt = sp.child_counts.ravel()
        keep = cnt > 0
        return ids[keep], cnt[keep]

    def count_of(self, path: QaryPath) -> int:
        """Count of the node addressed by ``path``."""
        if len(path) == 0:
            return self.total
        sp = self.split(len(path))
        parent = path.index // self.partition.q
        pos = np.searchsorted(sp.parent_ids, parent)
        if pos >= len(sp.parent_ids) or sp.parent_ids[pos] != parent:
            return 0
        return int(sp.child_counts[pos, path.digits[-1]])

    def leaf_term(self, level: int) -> float:
        """Sum of count * log(interval length) over nodes at ``level``."""
        if level == 0:
            return 0.0
        sp = self.split(level)
        if sp.child_log_len is None:
            return -level * np.log(self.partition.q) * self.total
        return float((sp.child_counts * sp.child_log_len).sum())


def _validate_sorted_unit(data: np.ndarray) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 1:
        raise UsageError("data must be one-dimensional")
    if data.size:
        if data[0] < 0.0 or data[-1] >= 1.0:
            raise DomainError("data values must lie in [0, 1)")
        if np.any(np.diff(data) < 0):
            raise UsageError("data must be sorted ascending")
    return data


def build_counts(data, partition: PartitionTree, depth: int) -> CountsTree:
    """Count observations per node for all depths 0..``depth``.

    ``data`` must be sorted ascending and lie in [0, 1). Counting uses
    binary search on interval breakpoints, never a per-point scan, so the
    cost is O(m + q^depth log m).
    """
    data = _validate_sorted_unit(data)
    partition._check_depth(depth)
    m = data.size
    q = partition.q

    if partition.is_uniform and q == 2 and m > 0:
        return _build_counts_dyadic(data, partition, depth)

    splits: list[ParentSplit] = []
    # per-level walk state over occupied nodes
    ids = np.zeros(1 if m else 0, dtype=np.int64)
    lo = np.zeros(ids.shape, dtype=np.int64)
    hi = np.full(ids.shape, m, dtype=np.int64)
    a = np.zeros(ids.shape)
    ell = np.ones(ids.shape)
    uniform = partition.is_uniform
    for j in range(depth):
        n = ids.size
        if n == 0:
            splits.append(ParentSplit(
                np.empty(0, np.int64), np.empty((0, q), np.int64),
                None if uniform else np.empty((0, q))))
            continue
        rows = partition.ratio_rows(j, ids)
        cums = np.cumsum(rows, axis=1)
        bounds = a[:, None] + ell[:, None] * cums[:, :-1]
        pos = np.searchsorted(data, bounds.ravel()).reshape(n, q - 1)
        pos = np.minimum(np.maximum(pos, lo[:, None]), hi[:, None])
        edges = np.concatenate([lo[:, None], pos, hi[:, None]], axis=1)
        ccounts = np.diff(edges, axis=1).astype(np.int64)
        if uniform:
            clog = None
        else:
            clog = np.log(ell)[:, None] + np.log(rows)
        splits.append(ParentSplit(ids, ccounts, clog))
        # descend into occupied children
        keep = ccounts > 0
        child_ids = ids[:, None] * q + np.arange(q)
        child_a = np.concatenate(
            [a[:, None], a[:, None] + ell[:, None] * cums[:, :-1]], axis=1)
        child_ell = ell[:, None] * rows
        ids = child_ids[keep]
        lo = edges[:, :-1][keep]
        hi = edges[:, 1:][keep]
        a = child_a[keep]
        ell = child_ell[keep]
    return CountsTree(partition, depth, m, splits)


def _build_counts_dyadic(data, partition, depth) -> CountsTree:
    """Fast path for the standard binary partition: exact leaf binning."""
    m = data.size
    leaf = np.minimum((data * 2.0**depth).astype(np.int64), 2**depth - 1)
    dense = np.bincount(leaf, minlength=2**depth)
    levels = [dense]
    for _ in range(depth):
        dense = dense.reshape(-1, 2).sum(axis=1)
        levels.append(dense)
    levels.reverse()   # levels[j] = dense counts at depth j
    splits = []
    for j in range(1, depth + 1):
        parents = np.flatnonzero(levels[j - 1]).astype(np.int64)
        ccounts = levels[j].reshape(-1, 2)[parents]
        splits.append(ParentSplit(parents, ccounts, None))
    return CountsTree(partition, depth, m, splits)
