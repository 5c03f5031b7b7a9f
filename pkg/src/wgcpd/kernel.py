"""Distance-induced kernels, double centering, and the empirical spectrum.

The centered Gram matrix does not depend on the anchor used to induce the
kernel; every function here that needs it works from distances alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DistanceMatrix
from .errors import EigenFailure, InputError

TRACE_FRACTION = 0.99
MAX_EIGENVALUES = 100


def _as_array(D):
    return D.d if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=float)


def distance_induced_kernel(D, anchor=0):
    """``K[i, j] = (D[i, anchor] + D[j, anchor] - D[i, j]) / 2``."""
    d = _as_array(D)
    n = d.shape[0]
    if not 0 <= anchor < n:
        raise InputError(f"anchor {anchor} out of range for n={n}")
    col = d[:, anchor]
    return 0.5 * (col[:, None] + col[None, :] - d)


@dataclass(frozen=True)
class CenteredGram:
    K: np.ndarray

    @property
    def n(self):
        return self.K.shape[0]


def center_gram(K) -> CenteredGram:
    """Double-center ``K`` (``H K H`` without forming ``H``)."""
    K = np.asarray(K, dtype=float)
    row = K.mean(axis=1)
    col = K.mean(axis=0)
    Kc = K - row[:, None] - col[None, :] + K.mean()
    Kc = (Kc + Kc.T) / 2
    Kc.flags.writeable = False
    return CenteredGram(Kc)


def centered_gram_from_distances(D) -> CenteredGram:
    return center_gram(distance_induced_kernel(D, 0))


def diag_centered_from_distances(D):
    """Diagonal of the centered Gram matrix, ``dbar_i - dbar / 2``.

    These are the squared feature-space norms of the centered observations.
    """
    d = _as_array(D)
    return d.mean(axis=1) - d.mean() / 2


@dataclass(frozen=True)
class EigenSpectrum:
    """Descending eigenvalues of ``K~ / n``; only the first ``kept`` are used."""

    lambdas: np.ndarray
    kept: int
    trace_fraction: float

    @property
    def used(self):
        return self.lambdas[: self.kept]


def truncate(lambdas, fraction=TRACE_FRACTION, cap=MAX_EIGENVALUES):
    """Smallest prefix whose sum reaches ``fraction`` of the total, capped."""
    total = lambdas.sum()
    if total <= 0:
        return 0
    kept = int(np.searchsorted(np.cumsum(lambdas), fraction * total * (1 - 1e-12)) + 1)
    return min(kept, cap, lambdas.size)


def estimate_eigenvalues(D, fraction=TRACE_FRACTION, cap=MAX_EIGENVALUES) -> EigenSpectrum:
    """Empirical eigenvalues of the centered kernel.

    Negative eigenvalues (round-off, or a distance that is not of negative
    type) are floored at zero before truncation.
    """
    d = _as_array(D)
    n = d.shape[0]
    if n < 2:
        raise InputError("need at least two observations for a spectrum")
    # -D/2 double-centered is the same matrix as the centered induced kernel
    Kc = center_gram(-0.5 * d).K / n
    try:
        lam = np.linalg.eigvalsh(Kc)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from None
    lam = np.maximum(lam[::-1], 0.0)
    scale = lam[0] if lam.size else 0.0
    # eigenvalues at round-off level of a zero matrix are not signal
    lam[lam <= 1e-12 * max(scale, np.abs(d).max(initial=0.0) / n)] = 0.0
    kept = truncate(lam, fraction, cap)
    total = lam.sum()
    frac = float(lam[:kept].sum() / total) if total > 0 else 0.0
    lam.flags.writeable = False
    return EigenSpectrum(lam, kept, frac)


def mean_embedding_gap_sq(cg: CenteredGram, t):
    """Squared distance between the mean embeddings of ``[:t]`` and ``[t:]``."""
    K = cg.K
    n = cg.n
    if not 1 <= t <= n - 1:
        raise InputError(f"split {t} out of range for n={n}")
    w = np.empty(n)
    w[:t] = 1.0 / t
    w[t:] = -1.0 / (n - t)
    return float(w @ K @ w)
