"""P-value engines.

Three routes to a p-value for an observed scan statistic:

``asymptotic``
    Monte-Carlo draws of the limiting null: a weighted sum of squared
    Brownian bridges for S1 (weights are the empirical kernel eigenvalues),
    a single standardized bridge for S2, and its square for S3.
``corrected``
    Closed-form boundary-crossing approximation with a skewness correction,
    for S2 and its bias-corrected variant.
``permutation``
    Relabel the observations and recompute the statistic.

Randomness is organized in fixed blocks of ``BLOCK`` replications. Block
``b`` draws from ``SeedSequence(seed, spawn_key=(b,))``, so results are
bit-identical whatever the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.stats import norm

from .data import DistanceMatrix, ScanWindow
from .errors import DegenerateDispersion, EmptySpectrum, InputError
from .kernel import EigenSpectrum, estimate_eigenvalues
from .scan import DISPERSION_EPS, Moments, canonical_statistic, max_scores, moments

ENGINES = ("asymptotic", "corrected", "permutation")
VARIANTS = ("appendix", "main")
DEFAULT_MC_REPS = 2000
DEFAULT_PERMUTATIONS = 1000
MIN_REPS = 100
BLOCK = 250
SIMPSON_PANELS = 512
NU_GUARD = 1e-8

_VARIANT_ALIASES = {"appendix_derived": "appendix", "main_text": "main"}
# floats per chunk of bridge paths held in memory at once
_CHUNK_FLOATS = 1 << 22


def canonical_variant(variant):
    variant = _VARIANT_ALIASES.get(variant, variant)
    if variant not in VARIANTS:
        raise InputError(f"unknown correction variant {variant!r}; choose from {VARIANTS}")
    return variant


def canonical_engine(engine):
    if engine not in ENGINES:
        raise InputError(f"unknown p-value engine {engine!r}; choose from {ENGINES}")
    return engine


def block_rng(seed, block):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(block),)))


def derive_seed(seed, *key):
    """A 64-bit child seed for the stream ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def _run_blocks(fn, reps, seed, threads=1):
    blocks = [(b, min(BLOCK, reps - b * BLOCK)) for b in range(math.ceil(reps / BLOCK))]

    def job(item):
        b, size = item
        return fn(block_rng(seed, b), size)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, blocks))
    else:
        parts = [job(item) for item in blocks]
    return np.concatenate(parts)


@dataclass(frozen=True)
class NullModel:
    method: str
    statistic: str
    samples: np.ndarray = field(repr=False)
    reps: int
    seed: int
    n: int
    n0: int
    n1: int


@dataclass(frozen=True)
class PValue:
    value: float
    method: str
    reps: int | None = None
    mc_stderr: float | None = None


def _check_reps(reps):
    if reps < MIN_REPS:
        raise InputError(f"need at least {MIN_REPS} replications, got {reps}")


def _bridge_block(rng, size, paths, n, n0, n1):
    """Yield chunks of Brownian bridges at ``t/n`` for ``t = n0..n1``.

    Each chunk has shape ``(reps_in_chunk, paths, n1 - n0 + 1)``. Increments
    are N(0, 1/n) on the grid ``1/n, ..., 1``.
    """
    frac = np.arange(n0, n1 + 1) / n
    step = max(1, _CHUNK_FLOATS // max(1, paths * n))
    scale = 1.0 / math.sqrt(n)
    for start in range(0, size, step):
        k = min(step, size - start)
        w = np.cumsum(rng.standard_normal((k, paths, n)), axis=-1)
        w *= scale
        yield w[..., n0 - 1:n1] - frac * w[..., -1:]


def simulate_null_S1_pair(spectrum: EigenSpectrum, n, window=None, reps=DEFAULT_MC_REPS,
                          seed=0, threads=1):
    """Null models for S1 and S1t drawn from the same bridges.

    Returns ``(s1_model, s1t_model)``; each equals what
    :func:`simulate_null_S1` gives for the same arguments.
    """
    _check_reps(reps)
    lam = np.asarray(spectrum.used, dtype=float)
    if lam.size == 0 or not np.any(lam > 0):
        raise EmptySpectrum("no positive eigenvalues; the data are constant")
    n0, n1 = (window or ScanWindow()).bounds(n)
    frac = np.arange(n0, n1 + 1) / n
    var = frac * (1 - frac)
    shift = lam.sum() * var

    def block(rng, size):
        out = []
        for b in _bridge_block(rng, size, lam.size, n, n0, n1):
            weighted = np.einsum("l,rlt->rt", lam, b * b)
            out.append(np.stack([((weighted - shift) / var).max(axis=1),
                                 (weighted / var).max(axis=1)], axis=1))
        return np.concatenate(out)

    samples = _run_blocks(block, reps, seed, threads)
    return tuple(
        NullModel("asymptotic", name, samples[:, k].copy(), reps, int(seed), n, n0, n1)
        for k, name in enumerate(("S1", "S1t"))
    )


def simulate_null_S1(spectrum: EigenSpectrum, n, window=None, reps=DEFAULT_MC_REPS,
                     seed=0, tilde=False, threads=1) -> NullModel:
    """Monte-Carlo draws of the limiting null maximum of S1 (or S1t).

    Each draw is ``max_t sum_l lam_l (B_l(t/n)^2 - c) / (t/n (1 - t/n))`` with
    ``c = t/n (1 - t/n)`` for S1 and ``c = 0`` for S1t, where ``B_l`` are
    independent Brownian bridges on the grid ``t/n`` and ``lam_l`` the kept
    eigenvalues.
    """
    return simulate_null_S1_pair(spectrum, n, window, reps, seed, threads)[int(bool(tilde))]


def simulate_null_S2(n, window=None, reps=DEFAULT_MC_REPS, seed=0, squared=False,
                     threads=1) -> NullModel:
    """Monte-Carlo draws of ``max_t |B(t/n)| / sqrt(t/n (1 - t/n))``.

    With ``squared=True`` the draws are squared, which is the limiting null of
    the combined statistic S3.
    """
    _check_reps(reps)
    n0, n1 = (window or ScanWindow()).bounds(n)
    frac = np.arange(n0, n1 + 1) / n
    sd = np.sqrt(frac * (1 - frac))

    def block(rng, size):
        out = [(np.abs(b[:, 0, :]) / sd).max(axis=1) for b in _bridge_block(rng, size, 1, n, n0, n1)]
        return np.concatenate(out)

    samples = _run_blocks(block, reps, seed, threads)
    if squared:
        samples = samples**2
    return NullModel("asymptotic", "S3" if squared else "S2", samples, reps, int(seed), n, n0, n1)


def pvalue_from_null(model: NullModel, observed) -> PValue:
    """Add-one empirical upper-tail probability."""
    exceed = int(np.count_nonzero(model.samples >= observed))
    p = (1 + exceed) / (model.reps + 1)
    return PValue(p, model.method, model.reps, math.sqrt(p * (1 - p) / model.reps))


def nu(z):
    """Overshoot correction factor for discrete boundary crossing."""
    z = np.asarray(z, dtype=float)
    safe = np.where(z < NU_GUARD, 1.0, z)
    half = safe / 2
    val = (2 / safe) * (norm.cdf(half) - 0.5) / (half * norm.cdf(half) + norm.pdf(half))
    return np.where(z < NU_GUARD, 1.0, val)


def pvalue_S2_corrected(x, mom: Moments, n, window=None, variant="appendix") -> PValue:
    """Skewness-corrected tail approximation ``P(S2 >= x)``.

    ``variant="appendix"`` is the two-sided Siegmund-type approximation

        2 x phi(x) int [1 + V(u) x (x^2 - 3) / (6 sqrt n)]
                       / (2u(1-u)) nu(x / sqrt(n u (1-u))) du

    ``variant="main"`` integrates ``[...] / (u(1-u)) nu(sqrt(x / (n u (1-u))))``
    times ``x phi(x)``. ``V(u) = (1 - 2u) / sqrt(u (1 - u))`` times the sample
    skewness of the squared feature norms. The integral runs over the scanned
    fractions ``[n0/n, n1/n]`` with Simpson's rule on 512 panels; the result is
    clamped into ``(0, 1]``.
    """
    variant = canonical_variant(variant)
    if mom.s_hat <= DISPERSION_EPS:
        raise DegenerateDispersion(f"degenerate dispersion (s_hat = {mom.s_hat:.3g})")
    tiny = np.finfo(float).tiny
    if x <= 0:
        return PValue(1.0, "corrected")
    n0, n1 = (window or ScanWindow()).bounds(n)
    u = np.linspace(n0 / n, n1 / n, SIMPSON_PANELS + 1)
    uu = u * (1 - u)
    skew = mom.third_central / mom.s_hat**3
    edge = 1 + (1 - 2 * u) / np.sqrt(uu) * skew * x * (x * x - 3) / (6 * math.sqrt(n))
    if variant == "main":
        integrand = edge / uu * nu(np.sqrt(x / (uu * n)))
        p = x * norm.pdf(x) * simpson(integrand, x=u)
    else:
        integrand = edge / (2 * uu) * nu(x / np.sqrt(uu * n))
        p = 2 * x * norm.pdf(x) * simpson(integrand, x=u)
    return PValue(float(min(1.0, max(tiny, p))), "corrected")


def permutation_counts(D, which, window=None, J=DEFAULT_PERMUTATIONS, seed=0, threads=1):
    """Observed statistics and, per statistic, how many of ``J`` relabelled
    copies reach them."""
    _check_reps(J)
    d = D.d if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=float)
    window = window or ScanWindow()
    which = [canonical_statistic(w) for w in which]
    mom = moments(d)
    observed = max_scores(d, window, which, mom)
    n = d.shape[0]

    def block(rng, size):
        out = np.empty((size, len(which)))
        for r in range(size):
            p = rng.permutation(n)
            vals = max_scores(d[np.ix_(p, p)], window, which, mom)
            out[r] = [vals[w] for w in which]
        return out

    draws = _run_blocks(block, J, seed, threads)
    counts = {}
    for k, w in enumerate(which):
        obs = observed[w]
        # ties up to round-off count as reaching the observed value
        counts[w] = int(np.count_nonzero(draws[:, k] >= obs - 1e-10 * abs(obs)))
    return observed, counts


def permutation_pvalue(D, which, window=None, J=DEFAULT_PERMUTATIONS, seed=0,
                       threads=1) -> PValue:
    """Add-one permutation p-value ``(1 + #{perm >= obs}) / (J + 1)``."""
    which = canonical_statistic(which)
    _, counts = permutation_counts(D, [which], window, J, seed, threads)
    p = (1 + counts[which]) / (J + 1)
    return PValue(p, "permutation", J, math.sqrt(p * (1 - p) / J))


def asymptotic_null(D, which, window=None, reps=DEFAULT_MC_REPS, seed=0, threads=1):
    """The Monte-Carlo null model appropriate for ``which`` on data ``D``."""
    which = canonical_statistic(which)
    n = D.n if isinstance(D, DistanceMatrix) else len(D)
    if which in ("S1", "S1t"):
        spec = estimate_eigenvalues(D)
        return simulate_null_S1(spec, n, window, reps, seed, which == "S1t", threads), spec
    return simulate_null_S2(n, window, reps, seed, which == "S3", threads), None
