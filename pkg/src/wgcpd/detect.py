"""Single change-point detection: statistic plus p-value in one call."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

from .data import DistanceMatrix, ScanWindow
from .errors import EmptySpectrum, InputError
from .nullmodel import (
    DEFAULT_MC_REPS,
    DEFAULT_PERMUTATIONS,
    PValue,
    asymptotic_null,
    canonical_engine,
    canonical_variant,
    permutation_pvalue,
    pvalue_from_null,
    pvalue_S2_corrected,
)
from .scan import canonical_statistic, scan_subinterval, statistic_S

CORRECTED_STATISTICS = ("S2", "S2t")

_warned_not_negative_type = False


def warn_if_not_negative_type(metric, engine):
    """Warn once per process when an asymptotic engine meets DELTACON."""
    global _warned_not_negative_type
    if metric is None or engine == "permutation" or metric.negative_type:
        return
    if not _warned_not_negative_type:
        _warned_not_negative_type = True
        warnings.warn(
            f"metric {metric.kind!r} is not known to be of negative type; the "
            f"{engine} p-value has no guarantee, consider --pvalue permutation",
            RuntimeWarning,
            stacklevel=3,
        )


@dataclass(frozen=True)
class DetectionResult:
    statistic: str
    value: float
    tau_hat: int
    p_value: float
    method: str
    n: int
    window: tuple
    seed: int
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        out = asdict(self)
        out["window"] = list(self.window)
        return out


def default_reps(engine):
    return DEFAULT_PERMUTATIONS if engine == "permutation" else DEFAULT_MC_REPS


def interval_pvalue(d, stat, engine, window, reps, seed, variant="appendix", threads=1):
    """P-value of ``stat`` computed on the distance block ``d``.

    Returns ``(PValue, kept)`` where ``kept`` is the number of eigenvalues used
    by the S1 Monte-Carlo null (``None`` otherwise).
    """
    which = stat.name
    if engine == "permutation":
        return permutation_pvalue(d, which, window, reps, seed, threads), None
    if engine == "corrected":
        if which not in CORRECTED_STATISTICS:
            raise InputError(f"the corrected engine applies to S2/S2t only, not {which}")
        pv = pvalue_S2_corrected(stat.value, stat.profile.moments, d.shape[0], window, variant)
        return pv, None
    try:
        model, spec = asymptotic_null(d, which, window, reps, seed, threads)
    except EmptySpectrum:
        # constant data: the limiting null is a point mass at zero and so is S1
        return PValue(1.0, "asymptotic", reps, 0.0), 0
    return pvalue_from_null(model, stat.value), (spec.kept if spec is not None else None)


def detect(D, statistic="S1", engine="asymptotic", window=None, reps=None, seed=0,
           variant="appendix", threads=1, metric=None) -> DetectionResult:
    """Test for a single change point and locate it.

    ``tau_hat`` is the number of observations in the first phase, so the change
    happens between observations ``tau_hat`` and ``tau_hat + 1`` (1-based).
    """
    D = D if isinstance(D, DistanceMatrix) else DistanceMatrix(D)
    which = canonical_statistic(statistic)
    engine = canonical_engine(engine)
    variant = canonical_variant(variant)
    window = window or ScanWindow()
    reps = default_reps(engine) if reps is None else int(reps)
    warn_if_not_negative_type(metric, engine)

    profile = scan_subinterval(D, 0, D.n, window)
    stat = statistic_S(profile, which)
    pv, kept = interval_pvalue(D.d, stat, engine, window, reps, seed, variant, threads)
    mom = profile.moments
    diagnostics = {"s_hat": mom.s_hat, "m2": mom.m2, "kept_eigenvalues": kept}
    if pv.mc_stderr is not None:
        diagnostics["mc_stderr"] = pv.mc_stderr
        diagnostics["reps"] = pv.reps
    if engine == "corrected":
        diagnostics["correction_variant"] = variant
    return DetectionResult(
        statistic=which,
        value=float(stat.value),
        tau_hat=stat.argmax_t,
        p_value=pv.value,
        method=engine,
        n=D.n,
        window=(window.rho0, window.rho1),
        seed=int(seed),
        diagnostics=diagnostics,
    )
