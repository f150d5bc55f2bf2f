"""
Nonuniform B-spline spaces: partitions, clamped extended partitions, the
Cox-de Boor recursion, design matrices and curvature-driven knot selection.

Basis functions are indexed from 0 (B_0 .. B_{M-1}).
"""

import csv
import heapq
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .errors import BasisIndexError, CapacityError, DomainError, ParameterError, SizeError
from .signal import Signal, central_difference

logger = logging.getLogger(__name__)


def _frozen_array(values) -> np.ndarray:
    array = np.array(values, dtype=float).reshape(-1)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Partition:
    """Knots c < x_1 < ... < x_N < d of the interval [c, d]."""

    c: float
    d: float
    interior: np.ndarray

    def __post_init__(self):
        interior = _frozen_array(self.interior)
        if not (np.isfinite(self.c) and np.isfinite(self.d) and self.c < self.d):
            raise ParameterError(f"partition needs finite c < d, got [{self.c}, {self.d}]")
        if interior.size:
            if not np.all(np.isfinite(interior)):
                raise ParameterError("interior knots must be finite")
            if interior[0] <= self.c or interior[-1] >= self.d:
                raise ParameterError(f"interior knots must lie in the open interval ({self.c}, {self.d})")
            if np.any(np.diff(interior) <= 0):
                raise ParameterError("interior knots must be strictly increasing")
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "interior", interior)

    @property
    def size(self) -> int:
        """N, the number of interior knots."""
        return self.interior.size

    def to_json(self) -> dict:
        return {"c": self.c, "d": self.d, "interior": [float(x) for x in self.interior]}

    @classmethod
    def from_json(cls, document: dict) -> "Partition":
        missing = {"c", "d", "interior"} - set(document)
        if missing:
            raise ParameterError(f"partition document is missing {sorted(missing)}")
        return cls(document["c"], document["d"], document["interior"])


def write_partition_json(path: Union[str, Path], partition: Partition) -> None:
    with open(path, "w") as f:
        json.dump(partition.to_json(), f, indent=2)


def read_partition_json(path: Union[str, Path]) -> Partition:
    with open(path, "r") as f:
        return Partition.from_json(json.load(f))


@dataclass(frozen=True)
class ExtendedPartition:
    """Knot sequence y_1..y_{2m+N} with single interior knots."""

    order: int
    knots: np.ndarray
    partition: Partition

    def __post_init__(self):
        knots = _frozen_array(self.knots)
        m, n = self.order, self.partition.size
        if knots.size != 2 * m + n:
            raise ParameterError(f"expected {2 * m + n} knots for order {m} and N={n}, got {knots.size}")
        if np.any(np.diff(knots) < 0):
            raise ParameterError("extended knots must be nondecreasing")
        if not np.array_equal(knots[m:m + n], self.partition.interior):
            raise ParameterError("interior knots must be copied unchanged")
        if knots[m - 1] > self.partition.c or knots[m + n] < self.partition.d:
            raise ParameterError("boundary knots must satisfy y_m <= c and y_{m+N+1} >= d")
        object.__setattr__(self, "knots", knots)


def make_extended(p: Partition, m: int) -> ExtendedPartition:
    """Clamped extension: m coincident knots at c and at d."""
    if m < 1:
        raise ParameterError(f"spline order must be >= 1, got {m}")
    knots = np.concatenate([np.full(m, p.c), p.interior, np.full(m, p.d)])
    return ExtendedPartition(order=m, knots=knots, partition=p)


def _basis_table(knots: np.ndarray, order: int, x: np.ndarray, right: float) -> np.ndarray:
    """
    All order-`order` B-splines on `knots` at the points x, shape (len(x), len(knots) - order).
    Points equal to `right` fall in the last non-degenerate interval.
    """
    y = np.asarray(knots, dtype=float)
    x = np.asarray(x, dtype=float)
    left, rgt = y[:-1], y[1:]
    table = ((left[None, :] <= x[:, None]) & (x[:, None] < rgt[None, :])).astype(float)

    at_right = x == right
    if np.any(at_right):
        nondegenerate = np.flatnonzero((left < rgt) & (rgt == right))
        if nondegenerate.size:
            table[at_right, :] = 0.0
            table[at_right, nondegenerate[-1]] = 1.0

    for k in range(2, order + 1):
        count = y.size - k
        span_left = y[k - 1:k - 1 + count] - y[:count]
        span_right = y[k:k + count] - y[1:1 + count]
        with np.errstate(divide="ignore", invalid="ignore"):
            w_left = np.where(span_left > 0, (x[:, None] - y[None, :count]) / span_left, 0.0)
            w_right = np.where(span_right > 0, (y[None, k:k + count] - x[:, None]) / span_right, 0.0)
        table = w_left * table[:, :count] + w_right * table[:, 1:count + 1]
    return table


def bspline_value(knots: Sequence[float], order: int, j: int, x: float) -> float:
    """B_{order,j}(x) on an arbitrary nondecreasing knot vector, zero-denominator terms dropped."""
    knots = np.asarray(knots, dtype=float)
    if not 0 <= j < knots.size - order:
        raise BasisIndexError(f"basis index {j} out of range 0..{knots.size - order - 1}")
    return float(_basis_table(knots, order, np.array([x]), knots[-1])[0, j])


@dataclass(frozen=True)
class BSplineBasis:
    """B-spline basis B_0..B_{M-1} of S_m(partition), M = m + N."""

    extended: ExtendedPartition

    @classmethod
    def from_partition(cls, partition: Partition, order: int) -> "BSplineBasis":
        return cls(make_extended(partition, order))

    @property
    def order(self) -> int:
        return self.extended.order

    @property
    def size(self) -> int:
        return self.extended.order + self.extended.partition.size

    @property
    def knots(self) -> np.ndarray:
        return self.extended.knots

    @property
    def c(self) -> float:
        return self.extended.partition.c

    @property
    def d(self) -> float:
        return self.extended.partition.d

    def evaluate(self, coefficients, grid) -> np.ndarray:
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (self.size,):
            raise ParameterError(f"expected {self.size} coefficients, got shape {coefficients.shape}")
        return design_matrix(self, grid) @ coefficients


def _check_domain(basis: BSplineBasis, x: np.ndarray) -> None:
    outside = (x < basis.c) | (x > basis.d) | ~np.isfinite(x)
    if np.any(outside):
        index = int(np.flatnonzero(outside)[0])
        raise DomainError(f"point {x[index]!r} lies outside [{basis.c}, {basis.d}]", index=index)


def eval_bspline(basis: BSplineBasis, j: int, x: float) -> float:
    if not 0 <= j < basis.size:
        raise BasisIndexError(f"basis index {j} out of range 0..{basis.size - 1}")
    point = np.array([x], dtype=float)
    _check_domain(basis, point)
    return float(_basis_table(basis.knots, basis.order, point, basis.d)[0, j])


def design_matrix(basis: BSplineBasis, grid) -> np.ndarray:
    """Entry (i, j) = B_j(grid[i]); rows sum to one for clamped knots."""
    grid = np.asarray(grid, dtype=float).reshape(-1)
    _check_domain(basis, grid)
    return _basis_table(basis.knots, basis.order, grid, basis.d)


MODE_ALIASES = {"paper-literal": "literal"}


class CurvatureConfig(BaseModel):
    """How curvature and its critical points are computed."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: Literal["standard", "literal"] = "standard"
    # relative to max |kappa'|
    zero_tol: float = Field(default=1e-12, gt=0)

    @field_validator("mode", mode="before")
    @classmethod
    def _accept_alias(cls, value):
        return MODE_ALIASES.get(value, value) if isinstance(value, str) else value


def curvature(s: Signal, cfg: CurvatureConfig = CurvatureConfig()) -> Signal:
    """
    Plane curvature f''/(1+f'^2)^(3/2), or f''/(1-f'^2)^(3/2) in literal
    mode, with derivatives from central differences.
    """
    if s.length < 5:
        raise SizeError(f"curvature needs at least 5 samples, got {s.length}")
    first = central_difference(s)
    second = central_difference(first).samples
    slope = first.samples
    if cfg.mode == "standard":
        return s.replace(second / (1.0 + slope**2) ** 1.5)

    steep = np.abs(slope) >= 1.0
    if np.any(steep):
        index = int(np.flatnonzero(steep)[0])
        raise DomainError(
            f"literal curvature undefined: |f'| = {abs(slope[index]):.6g} >= 1 at sample {index}",
            index=index,
        )
    return s.replace(second / (1.0 - slope**2) ** 1.5)


def critical_points(s: Signal, cfg: CurvatureConfig = CurvatureConfig()) -> np.ndarray:
    """
    Abscissae where the discrete derivative of the curvature changes sign.

    Adjacent samples of opposite sign give a linearly interpolated root; a run
    of near-zero samples between opposite signs contributes its midpoint.
    """
    kappa = curvature(s, cfg)
    slope = central_difference(kappa).samples
    scale = np.max(np.abs(slope))
    if scale == 0:
        return np.empty(0)

    signs = np.sign(slope)
    signs[np.abs(slope) <= cfg.zero_tol * scale] = 0
    nonzero = np.flatnonzero(signs)
    times = s.times

    points = []
    for i, j in zip(nonzero[:-1], nonzero[1:]):
        if signs[i] == signs[j]:
            continue
        if j == i + 1:
            fraction = slope[i] / (slope[i] - slope[j])
            points.append(times[i] + fraction * s.dt)
        else:
            points.append(0.5 * (times[i + 1] + times[j - 1]))

    c, d = times[0], times[-1]
    points = np.unique(np.array(points, dtype=float))
    return points[(points > c) & (points < d)]


def subdivide(points: Sequence[float], c: float, d: float, target: int) -> np.ndarray:
    """
    Insert midpoints into the currently longest gap of c < points < d
    (ties go to the leftmost gap) until `target` interior knots exist.
    """
    knots = sorted(float(x) for x in points)
    if target < len(knots):
        raise CapacityError(
            f"knot target {target} is smaller than the {len(knots)} curvature critical points",
            count=len(knots),
        )
    bounds = [c] + knots + [d]
    gaps = [(-(right - left), left, right) for left, right in zip(bounds[:-1], bounds[1:])]
    heapq.heapify(gaps)
    inserted = []
    for _ in range(target - len(knots)):
        _, left, right = heapq.heappop(gaps)
        middle = 0.5 * (left + right)
        inserted.append(middle)
        heapq.heappush(gaps, (-(middle - left), left, middle))
        heapq.heappush(gaps, (-(right - middle), middle, right))
    return np.array(sorted(knots + inserted))


def curvature_knots(s: Signal, target: int, cfg: CurvatureConfig = CurvatureConfig()) -> Partition:
    """Curvature critical points of s, refined by bisection to exactly `target` interior knots."""
    if target < 0:
        raise ParameterError(f"knot target must be nonnegative, got {target}")
    points = critical_points(s, cfg)
    c, d = s.t0, s.t0 + s.duration
    interior = subdivide(points, c, d, target)
    logger.debug("Knots: %d critical points, %d after subdivision", points.size, interior.size)
    return Partition(c, d, interior)


def uniform_partition(c: float, d: float, count: int) -> Partition:
    """`count` equally spaced interior knots of [c, d]."""
    if count < 0:
        raise ParameterError(f"knot count must be nonnegative, got {count}")
    return Partition(c, d, np.linspace(c, d, count + 2)[1:-1])


def write_basis_csv(path: Union[str, Path], basis: BSplineBasis, grid) -> None:
    """One row per grid point: t, B_0(t), ..., B_{M-1}(t)."""
    grid = np.asarray(grid, dtype=float).reshape(-1)
    table = design_matrix(basis, grid)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["t"] + [f"B{j}" for j in range(basis.size)])
        for t, row in zip(grid, table):
            writer.writerow([repr(float(t))] + [f"{value:.17g}" for value in row])
