"""Core sequence and matrix types, validation, and file ingestion.

A sequence is stored as one stacked numpy array rather than a list of
per-observation objects:

* ``vector``   -- shape ``(n, dim)``
* ``function`` -- shape ``(n, grid_len)`` sampled on an equally spaced grid
* ``graph``    -- shape ``(n, m, m)`` symmetric 0/1 adjacency matrices
"""

from __future__ import annotations

import contextlib
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import (
    AsymmetricAdjacency,
    AsymmetryBeyondTolerance,
    DimensionMismatch,
    InputError,
    MixedKinds,
    NegativeEntry,
    NonzeroDiagonal,
    NotSquare,
    ParseError,
    TooShort,
)

KINDS = ("vector", "graph", "function")
MIN_LENGTH = 4

SYMMETRY_TOL = 1e-9
DIAGONAL_TOL = 1e-12


class Observation(NamedTuple):
    kind: str
    values: np.ndarray


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Sequence:
    """An ordered, validated sequence of observations of a single kind.

    ``grid`` is the ``(start, end)`` interval of the sampling grid and is only
    meaningful for ``kind == "function"``.
    """

    kind: str
    values: np.ndarray
    grid: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __len__(self):
        return self.n

    def observations(self):
        return [Observation(self.kind, v) for v in self.values]

    def subsequence(self, start, stop):
        return Sequence(self.kind, self.values[start:stop], self.grid)


def _check_graph(a, index=None):
    where = "" if index is None else f" (observation {index})"
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"adjacency matrix must be square{where}")
    if not np.all((a == 0) | (a == 1)):
        raise InputError(f"adjacency entries must be 0 or 1{where}")
    if np.any(np.diag(a) != 0):
        raise AsymmetricAdjacency(f"adjacency diagonal must be zero{where}")
    if not np.array_equal(a, a.T):
        raise AsymmetricAdjacency(f"adjacency matrix is not symmetric{where}")


def validate_sequence(items, kind=None, grid=None) -> Sequence:
    """Validate observations and return them as a :class:`Sequence`.

    ``items`` is either a :class:`Sequence` (re-validated), an iterable of
    :class:`Observation`, or a stacked array together with ``kind``.
    """
    if isinstance(items, Sequence):
        kind, values, grid = items.kind, items.values, items.grid
        obs = list(values)
    elif isinstance(items, np.ndarray):
        if kind is None:
            raise InputError("kind is required when passing a bare array")
        obs = list(items)
    else:
        items = list(items)
        kinds = {o.kind for o in items}
        if len(kinds) > 1:
            raise MixedKinds(f"sequence mixes observation kinds {sorted(kinds)}")
        if kind is None and kinds:
            kind = kinds.pop()
        elif kinds and kind not in kinds:
            raise MixedKinds(f"observations are {kinds.pop()!r}, expected {kind!r}")
        obs = [np.asarray(o.values, dtype=float) for o in items]

    if kind not in KINDS:
        raise InputError(f"unknown observation kind {kind!r}")
    if len(obs) < MIN_LENGTH:
        raise TooShort(f"need at least {MIN_LENGTH} observations, got {len(obs)}")

    obs = [np.asarray(o, dtype=float) for o in obs]
    shapes = {o.shape for o in obs}
    if len(shapes) > 1:
        raise DimensionMismatch(f"observations have differing shapes {sorted(shapes)}")
    shape = shapes.pop()
    if kind == "graph":
        for i, a in enumerate(obs):
            _check_graph(a, i)
    elif len(shape) != 1 or shape[0] == 0:
        raise DimensionMismatch(f"{kind} observations must be non-empty 1-d arrays")
    values = np.stack(obs)
    if not np.all(np.isfinite(values)):
        raise InputError("observations contain non-finite values")

    if kind == "function":
        grid = (0.0, 1.0) if grid is None else (float(grid[0]), float(grid[1]))
        if not grid[1] > grid[0]:
            raise InputError("function grid interval must have positive length")
    else:
        grid = None
    return Sequence(kind, values, grid)


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric, nonnegative, zero-diagonal matrix of pairwise distances.

    Float noise is repaired: asymmetry up to ``SYMMETRY_TOL`` is averaged away
    and diagonal entries up to ``DIAGONAL_TOL`` are zeroed. Anything larger is
    an error. Both tolerances scale with ``max(1, max|d|)``.
    """

    d: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.d, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise NotSquare(f"distance matrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InputError("distance matrix contains non-finite values")
        scale = max(1.0, float(np.abs(a).max(initial=0.0)))
        diag = np.diag(a)
        if np.any(np.abs(diag) > DIAGONAL_TOL * scale):
            i = int(np.argmax(np.abs(diag)))
            raise NonzeroDiagonal(f"diagonal entry d[{i}][{i}] = {diag[i]!r}")
        asym = np.abs(a - a.T)
        if np.any(asym > SYMMETRY_TOL * scale):
            i, j = np.unravel_index(int(np.argmax(asym)), asym.shape)
            raise AsymmetryBeyondTolerance(
                f"d[{i}][{j}] = {a[i, j]!r} but d[{j}][{i}] = {a[j, i]!r}"
            )
        a = (a + a.T) / 2
        np.fill_diagonal(a, 0.0)
        if np.any(a < 0):
            i, j = np.argwhere(a < 0)[0]
            raise NegativeEntry(f"negative distance d[{i}][{j}] = {a[i, j]!r}")
        a.flags.writeable = False
        object.__setattr__(self, "d", a)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def __len__(self):
        return self.n

    def submatrix(self, start, stop):
        return DistanceMatrix(self.d[start:stop, start:stop])

    def permuted(self, perm):
        perm = np.asarray(perm)
        return DistanceMatrix(self.d[np.ix_(perm, perm)])


@dataclass(frozen=True)
class ScanWindow:
    """Fractions bounding the candidate change points.

    ``bounds(n)`` returns ``(n0, n1)`` with ``n0 = ceil(n*rho0)`` and
    ``n1 = ceil(n*rho1)``, clamped into ``[2, n-2]`` so that the within-phase
    divisors ``t-1`` and ``n-t-1`` are at least one.
    """

    rho0: float = 0.1
    rho1: float = 0.9

    def __post_init__(self):
        if not 0 < self.rho0 <= 0.5:
            raise InputError(f"rho0 must lie in (0, 0.5], got {self.rho0}")
        if not self.rho0 <= self.rho1 < 1:
            raise InputError(f"rho1 must lie in [rho0, 1), got {self.rho1}")

    def bounds(self, n):
        if n < MIN_LENGTH:
            raise TooShort(f"need at least {MIN_LENGTH} observations, got {n}")
        # the 1e-12 guards against ceil(0.1*100) evaluating to 11
        n0 = max(2, math.ceil(n * self.rho0 - 1e-12))
        n1 = min(n - 2, math.ceil(n * self.rho1 - 1e-12))
        return n0, max(n0, n1)


# --------------------------------------------------------------------------
# file formats


@contextlib.contextmanager
def open_text(target):
    """Open ``target`` for writing, or pass an already open stream through."""
    if hasattr(target, "write"):
        yield target
        return
    with open(target, "w", newline="") as fh:
        yield fh


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _read_csv_rows(path):
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            rows.append((lineno, [c.strip() for c in row]))
    return rows


def read_matrix_csv(path):
    """Read a CSV of reals into a 2-d array, skipping a non-numeric header."""
    rows = _read_csv_rows(path)
    if rows and not _is_number(rows[0][1][0]):
        rows = rows[1:]
    if not rows:
        raise ParseError(f"{path}: no data rows")
    width = len(rows[0][1])
    out = np.empty((len(rows), width))
    for k, (lineno, cells) in enumerate(rows):
        if len(cells) != width:
            raise ParseError(f"expected {width} fields, found {len(cells)}", lineno)
        try:
            out[k] = [float(c) for c in cells]
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    return out


def _read_graph_stack(path):
    blocks, current = [], []
    with open(path) as fh:
        lines = list(enumerate(fh, start=1))
    for lineno, line in lines + [(len(lines) + 1, "")]:
        if line.strip():
            current.append((lineno, line.split()))
            continue
        if not current:
            continue
        m = len(current)
        block = np.empty((m, m))
        for r, (ln, cells) in enumerate(current):
            if len(cells) != m:
                raise ParseError(f"expected {m} entries in adjacency row, found {len(cells)}", ln)
            if any(c not in ("0", "1") for c in cells):
                raise ParseError("adjacency entries must be 0 or 1", ln)
            block[r] = [int(c) for c in cells]
        blocks.append(block)
        current = []
    if not blocks:
        raise ParseError(f"{path}: no adjacency blocks")
    sizes = {b.shape[0] for b in blocks}
    if len(sizes) > 1:
        raise DimensionMismatch(f"graph blocks have differing node counts {sorted(sizes)}")
    return np.stack(blocks)


def read_sequence(path, format="vector", grid=None) -> Sequence:
    """Load a sequence from ``path``.

    ``format`` is ``"vector"`` or ``"function"`` (CSV, one observation per row)
    or ``"graph"`` (blank-line separated blocks of space separated 0/1 rows).
    """
    path = Path(path)
    if format in ("vector", "function"):
        return validate_sequence(read_matrix_csv(path), kind=format, grid=grid)
    if format == "graph":
        return validate_sequence(_read_graph_stack(path), kind="graph")
    raise InputError(f"unknown sequence format {format!r}")


def write_sequence(seq: Sequence, path):
    path = Path(path)
    with open(path, "w", newline="") as fh:
        if seq.kind == "graph":
            blocks = []
            for a in seq.values.astype(int):
                blocks.append("\n".join(" ".join(map(str, row)) for row in a))
            fh.write("\n\n".join(blocks) + "\n")
        else:
            writer = csv.writer(fh, lineterminator="\n")
            for row in seq.values:
                writer.writerow([repr(float(x)) for x in row])


def read_distance_matrix(path) -> DistanceMatrix:
    return DistanceMatrix(read_matrix_csv(path))


def write_distance_matrix(dm: DistanceMatrix, path):
    with open_text(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in dm.d:
            writer.writerow([repr(float(x)) for x in row])
