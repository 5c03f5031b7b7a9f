"""Binary segmentation for multiple change points, and the Rand index."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import DistanceMatrix, ScanWindow
from .detect import default_reps, interval_pvalue, warn_if_not_negative_type
from .errors import DegenerateDispersion, InputError, NotSorted, OutOfRange, PartitionInvalid
from .nullmodel import canonical_engine, canonical_variant, derive_seed
from .scan import canonical_statistic, scan_subinterval, statistic_S


@dataclass(frozen=True)
class SegmentationConfig:
    alpha: float = 0.05
    n_min: int = 20
    statistic: str = "S1"
    engine: str = "asymptotic"
    reps: int | None = None
    seed: int = 0
    window: ScanWindow = field(default_factory=ScanWindow)
    variant: str = "appendix"
    threads: int = 1

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.n_min < 2:
            raise InputError(f"n_min must be at least 2, got {self.n_min}")
        object.__setattr__(self, "statistic", canonical_statistic(self.statistic))
        canonical_engine(self.engine)
        object.__setattr__(self, "variant", canonical_variant(self.variant))

    @property
    def min_interval(self):
        return max(2 * self.n_min, 5)


@dataclass
class SegmentNode:
    """One tested interval: observations ``l..r-1`` (0-based, half open).

    ``k`` is the candidate split, so the left child is ``[l, k)`` and the
    right child ``[k, r)``.
    """

    l: int
    r: int
    stat: float | None
    p: float
    k: int | None
    accepted: bool
    children: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def to_dict(self):
        return {
            "l": self.l, "r": self.r, "stat": self.stat, "p": self.p, "k": self.k,
            "accepted": self.accepted, "flags": list(self.flags),
            "children": [c.to_dict() for c in self.children],
        }

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass
class SegmentationTree:
    n: int
    root: SegmentNode | None

    @property
    def nodes(self):
        return list(self.root.walk()) if self.root else []

    @property
    def change_points(self):
        return sorted(node.k for node in self.nodes if node.accepted)

    def to_dict(self):
        return {
            "n": self.n,
            "change_points": self.change_points,
            "tree": self.root.to_dict() if self.root else None,
        }


def _test_node(d, l, r, cfg, reps):
    profile = scan_subinterval(d, l, r, cfg.window)
    try:
        stat = statistic_S(profile, cfg.statistic)
    except DegenerateDispersion:
        return SegmentNode(l, r, None, 1.0, None, False, flags=["degenerate_dispersion"])
    # each interval gets its own stream so the tree does not depend on order
    seed = derive_seed(cfg.seed, l, r)
    pv, _ = interval_pvalue(d[l:r, l:r], stat, cfg.engine, cfg.window, reps, seed,
                            cfg.variant, cfg.threads)
    k = stat.argmax_t
    node = SegmentNode(l, r, stat.value, pv.value, k, False)
    if pv.value > cfg.alpha:
        return node
    if k - l < cfg.n_min or r - k < cfg.n_min:
        node.flags.append("segment_below_n_min")
        return node
    node.accepted = True
    return node


def binary_segment(D, cfg: SegmentationConfig | None = None, metric=None) -> SegmentationTree:
    """Recursively split where the scan statistic is significant.

    A node is accepted when its p-value is at most ``alpha`` and both sides
    of the candidate split hold at least ``n_min`` observations; accepted
    nodes are split and both halves tested again. Intervals shorter than
    ``max(2 n_min, 5)`` are not tested; below the root they appear as leaves
    flagged ``below_min_interval``.
    """
    cfg = cfg or SegmentationConfig()
    D = D if isinstance(D, DistanceMatrix) else DistanceMatrix(D)
    reps = default_reps(cfg.engine) if cfg.reps is None else int(cfg.reps)
    warn_if_not_negative_type(metric, cfg.engine)
    d = D.d

    def recurse(l, r):
        if r - l < cfg.min_interval:
            # kept as an untested leaf so every accepted node has two children
            return SegmentNode(l, r, None, 1.0, None, False, flags=["below_min_interval"])
        node = _test_node(d, l, r, cfg, reps)
        if node.accepted:
            node.children = [recurse(l, node.k), recurse(node.k, r)]
        return node

    if D.n < cfg.min_interval:
        return SegmentationTree(D.n, None)
    return SegmentationTree(D.n, recurse(0, D.n))


def change_points(tree: SegmentationTree):
    return tree.change_points


def changepoints_to_partition(cps, n):
    """Segment labels ``0..K`` for observations ``1..n`` split after each cp.

    Segments are ``(0, cp1], (cp1, cp2], ..., (cpK, n]`` in 1-based terms.
    """
    cps = [int(c) for c in cps]
    for c in cps:
        if not 1 <= c <= n - 1:
            raise OutOfRange(f"change point {c} outside [1, {n - 1}]")
    if any(b <= a for a, b in zip(cps, cps[1:])):
        raise NotSorted(f"change points must be strictly increasing: {cps}")
    labels = np.zeros(n, dtype=int)
    for c in cps:
        labels[c:] += 1
    return labels


def _as_labels(part):
    """Accept a label vector or a list of blocks of 1-based indices."""
    part = list(part)
    if part and isinstance(part[0], (set, frozenset, list, tuple, np.ndarray)):
        size = sum(len(b) for b in part)
        labels = np.full(size, -1)
        for k, block in enumerate(part):
            for i in block:
                if not 1 <= i <= size or labels[i - 1] != -1:
                    raise PartitionInvalid("blocks must cover 1..n exactly once")
                labels[i - 1] = k
        return labels
    return np.asarray(part)


def rand_index(U, V):
    """Fraction of unordered pairs on which two partitions agree.

    A pair agrees when it is together in both partitions or apart in both.
    Partitions are label vectors or lists of blocks of 1-based indices.
    """
    u = _as_labels(U)
    v = _as_labels(V)
    if u.shape != v.shape or u.ndim != 1:
        raise PartitionInvalid(f"partitions cover different sets: {u.shape} vs {v.shape}")
    n = u.size
    if n < 2:
        raise PartitionInvalid("need at least two elements")
    same_u = u[:, None] == u[None, :]
    same_v = v[:, None] == v[None, :]
    iu = np.triu_indices(n, 1)
    return float(np.mean(same_u[iu] == same_v[iu]))
