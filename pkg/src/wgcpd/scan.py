"""Scan statistics over candidate split points.

For a split ``t`` (the first phase is observations ``1..t``) the pairwise
distances fall into three groups:

* ``dA``  -- between the phases, each unordered pair counted once
  (``t (n - t)`` pairs);
* ``dB1`` -- within phase one, ordered pairs (``t (t - 1)`` of them);
* ``dB2`` -- within phase two, ordered pairs.

All three are built for every ``t`` in ``O(n^2)`` total by moving one
observation at a time from the right phase to the left one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .data import DistanceMatrix, ScanWindow
from .errors import DegenerateDispersion, InputError, SubintervalTooShort

STATISTICS = ("S1", "S1t", "S2", "S2t", "S3")
SCALED = ("S2", "S2t", "S3")
DISPERSION_EPS = 1e-12

_ALIASES = {"S1~": "S1t", "S2~": "S2t", "s1": "S1", "s1t": "S1t", "s2": "S2",
            "s2t": "S2t", "s3": "S3"}


def canonical_statistic(which):
    which = _ALIASES.get(which, which)
    if which not in STATISTICS:
        raise InputError(f"unknown statistic {which!r}; choose from {STATISTICS}")
    return which


@dataclass(frozen=True)
class Moments:
    """Distance-only moment estimates of the centered feature norm.

    ``m2``, ``m4`` and ``m6`` estimate the 1st, 2nd and 3rd raw moments of
    ``||eps||^2``; ``s_hat`` is the standard deviation of ``||eps||^2``.
    """

    m2: float
    m4: float
    m6: float
    s_hat: float

    @property
    def third_central(self):
        return self.m6 - 3 * self.m2 * self.m4 + 2 * self.m2**3

    @property
    def degenerate(self):
        return self.s_hat <= DISPERSION_EPS


def moments(D) -> Moments:
    d = D.d if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=float)
    n = d.shape[0]
    row = d.mean(axis=1)
    dbar = d.mean()
    centered = 2 * row - dbar
    m2 = dbar / 2
    m4 = float(np.sum(centered**2) / (4 * n))
    m6 = float(np.sum(centered**3) / (8 * n))
    s2 = float(np.mean(row**2) - dbar**2)
    return Moments(float(m2), m4, m6, float(np.sqrt(max(0.0, s2))))


def split_sums(d):
    """``dA, dB1, dB2`` for every split ``t = 1..n-1`` (index ``t - 1``)."""
    upper = np.triu(d, 1)
    left = upper.sum(axis=0)   # left[k] = sum_{i<k} d[i, k]
    right = upper.sum(axis=1)  # right[k] = sum_{j>k} d[k, j]
    dB1 = 2 * np.cumsum(left)[:-1]
    dB2 = 2 * np.cumsum(right[::-1])[::-1][1:]
    dA = np.cumsum(right - left)[:-1]
    return dA, dB1, dB2


@dataclass(frozen=True)
class ScanProfile:
    """Split sums, moments and statistic arrays over a scan window.

    ``t`` holds the candidate change points in the coordinates of the scanned
    (sub)sequence's parent: for a sub-interval starting at ``offset`` the
    local split ``s`` is reported as ``offset + s``.
    """

    n: int
    n0: int
    n1: int
    dA: np.ndarray = field(repr=False)
    dB1: np.ndarray = field(repr=False)
    dB2: np.ndarray = field(repr=False)
    moments: Moments
    d_total: float
    offset: int = 0

    @cached_property
    def local_t(self):
        return np.arange(self.n0, self.n1 + 1)

    @property
    def t(self):
        return self.local_t + self.offset

    @cached_property
    def _sizes(self):
        t = self.local_t.astype(float)
        return t, self.n - t

    @cached_property
    def T1(self):
        t, u = self._sizes
        return self.dA / (t * u) - self.dB1 / (2 * t * (t - 1)) - self.dB2 / (2 * u * (u - 1))

    @cached_property
    def T1_tilde(self):
        t, u = self._sizes
        return self.dA / (t * u) - self.dB1 / (2 * t * t) - self.dB2 / (2 * u * u)

    @cached_property
    def _B_diff(self):
        t, u = self._sizes
        return self.dB1 / (t * (t - 1)) - self.dB2 / (u * (u - 1))

    @cached_property
    def T2(self):
        return np.abs(self._B_diff)

    @cached_property
    def T2_tilde(self):
        # Within-phase averages over t^2 and (n-t)^2 rather than the pair
        # counts, minus the estimated size of the resulting bias,
        # 2 m2 (2t/n - 1) / (n rho (1 - rho)) with rho = t/n.
        t, u = self._sizes
        n = self.n
        rho = t / n
        bias = 2 * self.moments.m2 * (2 * t / n - 1) / (n * rho * (1 - rho))
        return np.abs(self.dB1 / (t * t) - self.dB2 / (u * u) - bias)

    @cached_property
    def weight(self):
        t, u = self._sizes
        return t * u / self.n

    def scores(self, which):
        """Per-split score whose maximum is the named statistic."""
        which = canonical_statistic(which)
        if which == "S1":
            return self.weight * self.T1
        if which == "S1t":
            return self.weight * self.T1_tilde
        s = self.moments.s_hat
        if s <= DISPERSION_EPS:
            raise DegenerateDispersion(
                f"degenerate dispersion (s_hat = {s:.3g}); {which} is undefined"
            )
        if which == "S2":
            return np.sqrt(self.weight) * self.T2 / (2 * s)
        if which == "S2t":
            return np.sqrt(self.weight) * self.T2_tilde / (2 * s)
        return self.weight * (4 * self.T1**2 + self.T2**2) / (4 * s * s)

    def index_of(self, t):
        k = int(t) - self.offset - self.n0
        if not 0 <= k < self.local_t.size:
            raise InputError(f"t={t} outside the scan window")
        return k


@dataclass(frozen=True)
class StatValue:
    name: str
    value: float
    argmax_t: int
    profile: ScanProfile = field(repr=False, compare=False)


def _profile(d, window, offset=0, known_moments=None):
    n = d.shape[0]
    n0, n1 = window.bounds(n)
    dA, dB1, dB2 = split_sums(d)
    sl = slice(n0 - 1, n1)
    return ScanProfile(
        n=n, n0=n0, n1=n1,
        dA=dA[sl], dB1=dB1[sl], dB2=dB2[sl],
        moments=known_moments or moments(d), d_total=float(d.sum()), offset=offset,
    )


def scan_sums(D, window=None) -> ScanProfile:
    """Scan profile of a full sequence."""
    d = D.d if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=float)
    return _profile(d, window or ScanWindow())


def scan_subinterval(D, l, r, window=None) -> ScanProfile:
    """Scan profile of the observations ``l..r-1`` (0-based, half open).

    Reported split points are absolute: a split at ``k`` puts observations
    ``l..k-1`` in the first phase. ``(0, n)`` reproduces :func:`scan_sums`.
    """
    d = D.d if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=float)
    if not 0 <= l < r <= d.shape[0]:
        raise InputError(f"bad sub-interval [{l}, {r}) for n={d.shape[0]}")
    if r - l < 4:
        raise SubintervalTooShort(f"sub-interval [{l}, {r}) has fewer than 4 observations")
    return _profile(d[l:r, l:r], window or ScanWindow(), offset=l)


def statistic_S(profile: ScanProfile, which) -> StatValue:
    """Maximum score over the window; ties go to the smallest split."""
    which = canonical_statistic(which)
    scores = profile.scores(which)
    k = int(np.argmax(scores))
    return StatValue(which, float(scores[k]), int(profile.t[k]), profile)


def statistic_T1(profile, t):
    return float(profile.T1[profile.index_of(t)])


def statistic_T1_tilde(profile, t):
    return float(profile.T1_tilde[profile.index_of(t)])


def statistic_T2(profile, t):
    return float(profile.T2[profile.index_of(t)])


def statistic_T2_tilde(profile, t):
    return float(profile.T2_tilde[profile.index_of(t)])


def max_scores(d, window, which, known_moments=None):
    """Statistic values for several statistics at once, without a StatValue.

    ``known_moments`` skips recomputing the moments, which are invariant under
    relabelling of the observations.
    """
    prof = _profile(d, window, known_moments=known_moments)
    return {w: float(np.max(prof.scores(w))) for w in which}
