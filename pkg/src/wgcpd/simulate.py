"""Synthetic scenarios and the experiment runner.

A scenario fixes a data generator, the sequence length, the true change
points, the metric and a list of ``(statistic, engine)`` tests that are all
applied to the same simulated sequences. Each replication ``r`` of the
scenario at position ``i`` in an experiment draws its data from
``SeedSequence(seed, spawn_key=(i, r, 0))`` and its p-value randomness from
the child seed ``(i, r, 1)``, so reports do not depend on how replications
are spread over workers.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import ScanWindow, Sequence, open_text, validate_sequence
from .detect import interval_pvalue
from .distances import Metric, build_distance_matrix
from .errors import InputError, WgcpdError
from .kernel import estimate_eigenvalues
from .nullmodel import (
    DEFAULT_MC_REPS,
    DEFAULT_PERMUTATIONS,
    derive_seed,
    pvalue_from_null,
    simulate_null_S1_pair,
)
from .scan import canonical_statistic, scan_sums, statistic_S
from .segmentation import SegmentationConfig, binary_segment, changepoints_to_partition, rand_index

CSV_COLUMNS = ("scenario", "statistic", "engine", "reps", "power", "power_se", "loc_err",
               "loc_err_se", "rand", "rand_se", "seconds")

# engine labels accepted in a scenario's test list
ENGINE_LABELS = {
    "asymptotic": ("asymptotic", "appendix"),
    "permutation": ("permutation", "appendix"),
    "corrected": ("corrected", "appendix"),
    "corrected-main": ("corrected", "main"),
}

TWO_PI = 2 * math.pi


# --------------------------------------------------------------------------
# generators


def _segment_params(params, sizes, what):
    if len(params) < len(sizes):
        raise InputError(f"{what}: {len(sizes)} segments but only {len(params)} parameter sets")
    return params[: len(sizes)]


@dataclass(frozen=True)
class Gaussian:
    """Segment ``k`` is ``means[k] * 1_dim + scales[k] * N(0, I_dim)``."""

    dim: int
    means: tuple = (0.0,)
    scales: tuple = (1.0,)

    kind = "vector"
    metric = "sqeuclidean"

    def sample(self, rng, sizes):
        k = len(sizes)
        means = _segment_params(self.means + self.means[-1:] * k, sizes, "means")
        scales = _segment_params(self.scales + self.scales[-1:] * k, sizes, "scales")
        parts = [mu + sd * rng.standard_normal((m, self.dim))
                 for m, mu, sd in zip(sizes, means, scales)]
        return validate_sequence(np.concatenate(parts), kind="vector")


def GaussMeanShift(dim, *means):
    """Mean ``0`` before the first change, then ``means[0]``, ``means[1]``, ..."""
    return Gaussian(dim, (0.0,) + tuple(float(m) for m in means), (1.0,))


def GaussScaleShift(dim, *scales):
    return Gaussian(dim, (0.0,), (1.0,) + tuple(float(s) for s in scales))


def GaussBoth(dim, means, scales):
    return Gaussian(dim, (0.0,) + tuple(means), (1.0,) + tuple(scales))


@dataclass(frozen=True)
class PoissonShift:
    """Segment ``k`` is i.i.d. ``Poisson(rates[k])`` in ``dim`` coordinates."""

    rates: tuple = (2.0, 4.0)
    dim: int = 1

    kind = "vector"
    metric = "sqeuclidean"

    def __post_init__(self):
        if any(r <= 0 for r in self.rates):
            raise InputError("Poisson rates must be positive")

    def sample(self, rng, sizes):
        rates = _segment_params(self.rates, sizes, "rates")
        parts = [rng.poisson(lam, (m, self.dim)) for m, lam in zip(sizes, rates)]
        return validate_sequence(np.concatenate(parts).astype(float), kind="vector")


@dataclass(frozen=True)
class ErdosRenyi:
    """Undirected graphs on ``m`` nodes with edge probability ``p0``.

    In segment ``k`` edges among the first ``community_size`` nodes appear
    with probability ``community_probs[k]`` instead.
    """

    m: int = 10
    p0: float = 0.1
    community_probs: tuple = (0.1, 0.4)
    community_size: int = 3

    kind = "graph"
    metric = "frobenius"

    def __post_init__(self):
        probs = (self.p0,) + tuple(self.community_probs)
        if any(not 0 <= p <= 1 for p in probs):
            raise InputError("edge probabilities must lie in [0, 1]")
        if not 0 <= self.community_size <= self.m:
            raise InputError("community larger than the graph")

    def sample(self, rng, sizes):
        probs = _segment_params(self.community_probs, sizes, "community_probs")
        iu = np.triu_indices(self.m, 1)
        c = self.community_size
        in_comm = (iu[0] < c) & (iu[1] < c)
        graphs = []
        for size, p1 in zip(sizes, probs):
            p = np.where(in_comm, p1, self.p0)
            edges = rng.random((size, p.size)) < p
            a = np.zeros((size, self.m, self.m))
            a[:, iu[0], iu[1]] = edges
            graphs.append(a + a.transpose(0, 2, 1))
        return validate_sequence(np.concatenate(graphs), kind="graph")


@dataclass(frozen=True)
class FunctionalPhase:
    """``sin(x + shifts[k]) + noise_sd * N(0, 1)`` on ``grid`` points of ``[0, 2 pi)``."""

    shifts: tuple = (0.0, 0.1)
    grid: int = 1000
    noise_sd: float = 0.5

    kind = "function"
    metric = "l2fun"

    def sample(self, rng, sizes):
        shifts = _segment_params(self.shifts, sizes, "shifts")
        x = TWO_PI * np.arange(self.grid) / self.grid
        parts = [np.sin(x + mu) + self.noise_sd * rng.standard_normal((m, self.grid))
                 for m, mu in zip(sizes, shifts)]
        return validate_sequence(np.concatenate(parts), kind="function", grid=(0.0, TWO_PI))


# --------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class ScenarioSpec:
    """One row group of an experiment.

    ``tests`` holds ``(statistic, engine label)`` pairs. ``mode`` is ``"amoc"``
    (single test, power and localization error) or ``"multiple"`` (binary
    segmentation, Rand index against the truth).
    """

    name: str
    generator: object
    n: int
    change_points: tuple = ()
    tests: tuple = (("S1", "asymptotic"),)
    reps: int = 100
    mode: str = "amoc"
    alpha: float = 0.05
    pvalue_reps: int | None = None
    n_min: int = 20
    window: ScanWindow = field(default_factory=ScanWindow)

    def __post_init__(self):
        if self.mode not in ("amoc", "multiple"):
            raise InputError(f"unknown scenario mode {self.mode!r}")
        cps = tuple(int(c) for c in self.change_points)
        if any(not 0 < c < self.n for c in cps) or list(cps) != sorted(set(cps)):
            raise InputError(f"change points {cps} must be increasing inside (0, {self.n})")
        object.__setattr__(self, "change_points", cps)
        tests = tuple((canonical_statistic(s), e) for s, e in self.tests)
        for _, e in tests:
            if e not in ENGINE_LABELS:
                raise InputError(f"unknown engine label {e!r}; choose from {tuple(ENGINE_LABELS)}")
        object.__setattr__(self, "tests", tests)

    @property
    def segment_sizes(self):
        edges = (0,) + self.change_points + (self.n,)
        return [b - a for a, b in zip(edges, edges[1:])]

    @property
    def metric(self):
        return self.generator.metric


def generate(spec: ScenarioSpec, rep_seed) -> Sequence:
    """Simulated sequence for one replication."""
    rng = np.random.default_rng(rep_seed)
    return spec.generator.sample(rng, spec.segment_sizes)


# --------------------------------------------------------------------------
# running


def _pvalue_reps(spec, engine):
    if spec.pvalue_reps is not None:
        return spec.pvalue_reps
    return DEFAULT_PERMUTATIONS if engine == "permutation" else DEFAULT_MC_REPS


def _amoc_rep(spec, D, seed):
    """``[(rejected, tau_hat)]`` per test; ``None`` entries for failures."""
    profile = scan_sums(D, spec.window)
    s1_nulls = None
    out = []
    for which, label in spec.tests:
        engine, variant = ENGINE_LABELS[label]
        reps = _pvalue_reps(spec, engine)
        try:
            stat = statistic_S(profile, which)
            if engine == "asymptotic" and which in ("S1", "S1t"):
                # S1 and S1t share one set of bridges
                if s1_nulls is None:
                    spec_ = estimate_eigenvalues(D)
                    # constant data: no null spread, nothing to reject
                    s1_nulls = (simulate_null_S1_pair(spec_, D.n, spec.window, reps, seed)
                                if spec_.kept else ())
                p = (pvalue_from_null(s1_nulls[which == "S1t"], stat.value).value
                     if s1_nulls else 1.0)
            else:
                p = interval_pvalue(D.d, stat, engine, spec.window, reps, seed, variant)[0].value
        except WgcpdError:
            out.append(None)
            continue
        out.append((p <= spec.alpha, stat.argmax_t))
    return out


def _multiple_rep(spec, D, seed):
    """``[(any_detected, change_points)]`` per test."""
    out = []
    for which, label in spec.tests:
        engine, variant = ENGINE_LABELS[label]
        cfg = SegmentationConfig(alpha=spec.alpha, n_min=spec.n_min, statistic=which,
                                 engine=engine, reps=_pvalue_reps(spec, engine), seed=seed,
                                 window=spec.window, variant=variant)
        try:
            cps = binary_segment(D, cfg).change_points
        except WgcpdError:
            out.append(None)
            continue
        out.append((bool(cps), cps))
    return out


def run_replication(spec: ScenarioSpec, seed, index, rep):
    """Outcomes of every test of ``spec`` on replication ``rep``."""
    data_seed = np.random.SeedSequence(int(seed), spawn_key=(int(index), int(rep), 0))
    seq = generate(spec, data_seed)
    D = build_distance_matrix(Metric.for_sequence(spec.metric, seq), seq)
    pseed = derive_seed(seed, index, rep, 1)
    if spec.mode == "amoc":
        return _amoc_rep(spec, D, pseed)
    return _multiple_rep(spec, D, pseed)


def _run_chunk(args):
    spec, seed, index, reps = args
    return [run_replication(spec, seed, index, r) for r in reps]


@dataclass
class ReportRow:
    scenario: str
    statistic: str
    engine: str
    reps: int
    power: float | None
    power_se: float | None
    loc_err: float | None
    loc_err_se: float | None
    rand: float | None
    rand_se: float | None
    seconds: float | None = None
    failures: int = 0


@dataclass
class ExperimentReport:
    seed: int
    rows: list = field(default_factory=list)
    seed_scheme: str = "data: SeedSequence(seed, (scenario, rep, 0)); p-values: (scenario, rep, 1)"

    def to_dict(self):
        return {"seed": self.seed, "seed_scheme": self.seed_scheme,
                "rows": [asdict(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, data):
        return cls(int(data["seed"]), [ReportRow(**r) for r in data["rows"]],
                   data.get("seed_scheme", cls.seed_scheme))


def _mean_se(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return None, None
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return float(values.mean()), se


def _summarize(spec, outcomes, seconds):
    rows = []
    truth = changepoints_to_partition(spec.change_points, spec.n)
    for k, (which, label) in enumerate(spec.tests):
        done = [o[k] for o in outcomes if o[k] is not None]
        failures = len(outcomes) - len(done)
        m = len(done)
        power = float(np.mean([d[0] for d in done])) if m else None
        power_se = math.sqrt(power * (1 - power) / m) if m else None
        loc_err = loc_se = rand = rand_se = None
        if spec.mode == "amoc" and spec.change_points:
            loc_err, loc_se = _mean_se([abs(d[1] - spec.change_points[0]) for d in done])
        if spec.mode == "multiple":
            rand, rand_se = _mean_se([
                rand_index(truth, changepoints_to_partition(d[1], spec.n)) for d in done
            ])
        rows.append(ReportRow(spec.name, which, label, m, power, power_se, loc_err, loc_se,
                              rand, rand_se, seconds, failures))
    return rows


def run_experiment(specs, seed=0, threads=1, timing=False) -> ExperimentReport:
    """Run every scenario and aggregate per ``(scenario, statistic, engine)``.

    With ``threads > 1`` replications are spread over worker processes; the
    report is identical either way. Wall-clock seconds are only recorded with
    ``timing=True`` because they would make reports irreproducible.
    """
    if isinstance(specs, ScenarioSpec):
        specs = [specs]
    report = ExperimentReport(int(seed))
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for index, spec in enumerate(specs):
            if spec.reps < 1:
                raise InputError("need at least one replication")
            start = time.perf_counter()
            reps = list(range(spec.reps))
            if pool is None:
                outcomes = _run_chunk((spec, seed, index, reps))
            else:
                size = max(1, math.ceil(len(reps) / (4 * threads)))
                chunks = [(spec, seed, index, reps[i:i + size]) for i in range(0, len(reps), size)]
                outcomes = [o for part in pool.map(_run_chunk, chunks) for o in part]
            seconds = time.perf_counter() - start if timing else None
            report.rows.extend(_summarize(spec, outcomes, seconds))
    finally:
        if pool is not None:
            pool.shutdown()
    return report


# --------------------------------------------------------------------------
# serialization


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_to_csv(report: ExperimentReport, path):
    """One row per ``(scenario, statistic, engine)``; ``path`` may be a stream."""
    with open_text(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in report.rows:
            d = asdict(row)
            writer.writerow([_cell(d[c]) for c in CSV_COLUMNS])


def report_to_json(report: ExperimentReport, path):
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")


def report_from_json(path) -> ExperimentReport:
    return ExperimentReport.from_dict(json.loads(Path(path).read_text()))


# --------------------------------------------------------------------------
# presets

AMOC_TESTS = (("S1", "permutation"), ("S2t", "corrected"), ("S3", "permutation"))
CALIBRATION_TESTS = (("S1", "asymptotic"), ("S1t", "asymptotic"), ("S2", "asymptotic"),
                     ("S2t", "corrected"), ("S2t", "corrected-main"))
AMOC_N, AMOC_TAU = 100, (33,)
MULTI_N, MULTI_TAU = 150, (40, 100)


def _table1(reps):
    rows = [("N(0,1)", Gaussian(1)), ("N(0,I10)", Gaussian(10)), ("N(0,I100)", Gaussian(100)),
            ("Pois(2)", PoissonShift((2.0,)))]
    return [ScenarioSpec(name, g, 200, (), CALIBRATION_TESTS, reps or 200) for name, g in rows]


def _amoc(rows, reps):
    return [ScenarioSpec(name, g, AMOC_N, AMOC_TAU, AMOC_TESTS, reps or 100) for name, g in rows]


def _multiple(rows, reps, cps=MULTI_TAU):
    return [ScenarioSpec(name, g, MULTI_N, cps, AMOC_TESTS, reps or 100, mode="multiple")
            for name, g in rows]


def _presets():
    p = {}
    p["table1"] = _table1
    p["table2a-mean"] = lambda r: _amoc(
        [(f"d={d},mu={mu}", GaussMeanShift(d, mu))
         for d, mu in ((1, 0.8), (10, 0.3), (50, 0.2), (100, 0.2), (500, 0.1))], r)
    p["table2a-scale"] = lambda r: _amoc(
        [(f"d={d},sigma={s}", GaussScaleShift(d, s))
         for d, s in ((1, 2.0), (10, 1.2), (50, 1.06), (100, 1.05), (500, 1.03))], r)
    p["table2a-both"] = lambda r: _amoc(
        [(f"d={d},mu={mu},sigma={s}", GaussBoth(d, (mu,), (s,)))
         for d, mu, s in ((1, 2.0, 2.0), (10, 0.6, 1.2), (50, 0.4, 1.06), (100, 0.4, 1.05),
                          (500, 0.2, 1.03))]
        + [("Pois(2)->Pois(4)", PoissonShift((2.0, 4.0)))], r)
    p["table2b"] = lambda r: _amoc(
        [(f"p1={p1}", ErdosRenyi(community_probs=(0.1, p1))) for p1 in (0.3, 0.4, 0.5)], r)
    p["table2c"] = lambda r: _amoc(
        [(f"mu={mu}", FunctionalPhase((0.0, mu))) for mu in (0.03, 0.05, 0.08, 0.1)], r)
    p["table3-mean"] = lambda r: _multiple(
        [(f"d={d},mu={m1}/{m2}", GaussMeanShift(d, m1, m2))
         for d, m1, m2 in ((1, 2.0, 1.0), (10, 0.5, 0.2), (50, 0.5, 0.2), (100, 0.3, 0.1),
                           (500, 0.2, 0.1))], r)
    p["table3-scale"] = lambda r: _multiple(
        [(f"d={d},sigma={s1:.4g}/{s2:.4g}", GaussScaleShift(d, s1, s2))
         for d, s1, s2 in ((1, 2.0, math.sqrt(2)), (10, 1.2, 1.2), (50, 1.06, 1.06),
                           (100, 1.05, 1.05), (500, 1.03, 1.03))], r)
    p["table3-both"] = lambda r: _multiple(
        [(f"d={d},mu={m1}/{m2},sigma={s1:.4g}/{s2:.4g}", GaussBoth(d, (m1, m2), (s1, s2)))
         for d, m1, s1, m2, s2 in ((1, 2.0, 2.0, 1.0, math.sqrt(2)), (10, 0.6, 1.2, 0.3, 1.2),
                                   (50, 0.4, 1.06, 0.2, 1.06), (100, 0.4, 1.05, 0.2, 1.05),
                                   (500, 0.2, 1.03, 0.1, 1.03))]
        + [("Pois(4)->Pois(6)->Pois(4)", PoissonShift((4.0, 6.0, 4.0)))], r)
    p["table3-network"] = lambda r: _multiple(
        [(f"p1={p1}", ErdosRenyi(community_probs=(0.1, p1, 0.1))) for p1 in (0.3, 0.4, 0.5)], r)
    p["table3-function"] = lambda r: _multiple(
        [(f"mu={mu}", FunctionalPhase((0.0, mu, 0.0))) for mu in (0.03, 0.05, 0.08, 0.1)], r)
    p["table3-null"] = lambda r: _multiple([("N(0,I100)", Gaussian(100))], r, cps=())
    return p


PRESETS = _presets()


def preset(name, reps=None):
    """Scenario list for a named preset; ``reps`` overrides the default count."""
    if name not in PRESETS:
        raise InputError(f"unknown scenario preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name](reps)
