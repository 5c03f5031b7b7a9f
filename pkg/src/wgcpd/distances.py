"""Semi-metrics on observations and pairwise distance matrices.

All metrics except DELTACON are of negative type, which is what makes the
distance-induced kernel a valid kernel. DELTACON's status is unknown, so the
asymptotic p-value engines warn when fed a DELTACON matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import DistanceMatrix, Sequence
from .errors import InputError, KindMismatch, NegativeAffinity, SingularSystem

METRICS = ("sqeuclidean", "frobenius", "l2fun", "deltacon")

_KIND_OF = {
    "sqeuclidean": "vector",
    "frobenius": "graph",
    "l2fun": "function",
    "deltacon": "graph",
}

AFFINITY_CLAMP = 1e-12


@dataclass(frozen=True)
class Metric:
    """A distance choice.

    ``interval_length`` is only used by ``l2fun`` and is the length of the
    domain the function samples cover.
    """

    kind: str
    interval_length: float = 1.0

    def __post_init__(self):
        if self.kind not in METRICS:
            raise InputError(f"unknown metric {self.kind!r}; choose from {METRICS}")
        if self.kind == "l2fun" and not self.interval_length > 0:
            raise InputError("l2fun interval length must be positive")

    @property
    def observation_kind(self):
        return _KIND_OF[self.kind]

    @property
    def negative_type(self):
        return self.kind != "deltacon"

    @classmethod
    def for_sequence(cls, kind, seq: Sequence):
        if kind == "l2fun" and seq.grid is not None:
            return cls(kind, seq.grid[1] - seq.grid[0])
        return cls(kind)


def deltacon_affinity(adj):
    """Fast belief-propagation affinity matrix ``(I + eps^2 U - eps A)^-1``.

    ``U`` is the diagonal degree matrix and ``eps = 1 / (1 + max degree)``.
    Entries in ``[-1e-12, 0)`` are clamped to zero; more negative entries
    raise :class:`NegativeAffinity`.
    """
    a = np.asarray(adj, dtype=float)
    m = a.shape[0]
    degree = a.sum(axis=1)
    eps = 1.0 / (1.0 + degree.max(initial=0.0))
    system = np.eye(m) + eps**2 * np.diag(degree) - eps * a
    try:
        lu = scipy.linalg.lu_factor(system, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SingularSystem(str(exc)) from None
    if np.any(np.abs(np.diag(lu[0])) < np.finfo(float).eps * m):
        raise SingularSystem("affinity system is numerically singular")
    q = scipy.linalg.lu_solve(lu, np.eye(m))
    if np.any(q < -AFFINITY_CLAMP):
        raise NegativeAffinity(f"affinity entry {q.min():.3g} below -{AFFINITY_CLAMP}")
    return np.where(q < 0, 0.0, q)


def _check_kind(metric, *obs_arrays):
    want = metric.observation_kind
    for a in obs_arrays:
        if want == "graph" and a.ndim != 2:
            raise KindMismatch(f"metric {metric.kind!r} needs graph observations")
        if want != "graph" and a.ndim != 1:
            raise KindMismatch(f"metric {metric.kind!r} needs {want} observations")


def pairwise(metric: Metric, a, b) -> float:
    """Distance between two observations."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_kind(metric, a, b)
    if a.shape != b.shape:
        raise KindMismatch(f"observation shapes differ: {a.shape} vs {b.shape}")
    if metric.kind in ("sqeuclidean", "frobenius"):
        return float(np.sum((a - b) ** 2))
    if metric.kind == "l2fun":
        # left Riemann sum on the uniform grid
        return float(metric.interval_length / a.size * np.sum((a - b) ** 2))
    qa = np.sqrt(deltacon_affinity(a))
    qb = np.sqrt(deltacon_affinity(b))
    return float(np.sqrt(np.sum((qa - qb) ** 2)))


def _squared_euclidean(x):
    x = x.reshape(x.shape[0], -1)
    d = np.empty((x.shape[0], x.shape[0]))
    # row by row rather than via the Gram matrix: exact zeros on the diagonal,
    # exact symmetry, and no cancellation for nearby points
    for i, row in enumerate(x):
        d[i] = np.sum((x - row) ** 2, axis=1)
    return d


def build_distance_matrix(metric: Metric, seq: Sequence) -> DistanceMatrix:
    """Pairwise distance matrix of a sequence under ``metric``."""
    if seq.kind != metric.observation_kind:
        raise KindMismatch(
            f"metric {metric.kind!r} needs {metric.observation_kind} observations, "
            f"got {seq.kind}"
        )
    x = seq.values
    if metric.kind in ("sqeuclidean", "frobenius"):
        return DistanceMatrix(_squared_euclidean(x))
    if metric.kind == "l2fun":
        return DistanceMatrix(metric.interval_length / x.shape[1] * _squared_euclidean(x))

    roots = np.stack([np.sqrt(deltacon_affinity(a)).ravel() for a in x])
    return DistanceMatrix(np.sqrt(_squared_euclidean(roots)))
