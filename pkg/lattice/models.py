"""Domain models: lattice problem definition, interval sets and reports."""

import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Coord = tuple[int, int]
NodeField = float | tuple[tuple[float, ...], ...]


class Link(BaseModel):
    """Undirected link from ``source`` in cell 0 to ``target`` in cell ``offset``.

    Coordinates are zero-based ``(n1, n2)`` positions inside the cell; ``offset``
    counts periods along e1 and e2. The conjugate direction is implied.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    source: Coord
    target: Coord
    offset: Coord = (0, 0)

    @field_validator("offset")
    @classmethod
    def _unit_offset(cls, value: Coord) -> Coord:
        if any(abs(c) > 1 for c in value):
            raise ValueError("link offsets must be -1, 0 or 1 periods")
        return value

    @model_validator(mode="after")
    def _no_self_link(self) -> "Link":
        if self.source == self.target and self.offset == (0, 0):
            raise ValueError(f"self-link at node {self.source} is not allowed")
        return self


def square_links(n1: int, n2: int) -> tuple[Link, ...]:
    """Nearest-neighbour square lattice links for an ``n1 x n2`` cell."""
    links = []
    for i1 in range(n1):
        for i2 in range(n2):
            if i1 + 1 < n1:
                links.append(Link(source=(i1, i2), target=(i1 + 1, i2)))
            else:
                links.append(Link(source=(i1, i2), target=(0, i2), offset=(1, 0)))
            if i2 + 1 < n2:
                links.append(Link(source=(i1, i2), target=(i1, i2 + 1)))
            else:
                links.append(Link(source=(i1, i2), target=(i1, 0), offset=(0, 1)))
    return tuple(links)


class LatticeSpec(BaseModel):
    """Periodic cell, masses and defect perturbations.

    Per-node fields are either a scalar applied to every cell node or an
    ``n1 x n2`` table. Nodes are indexed row-major: ``index = i1 * n2 + i2``.
    The strip occupies the cell row of period index 0 along e2 and repeats
    along e1; the point defect occupies the cell at the origin only.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    n1: int = Field(default=1, ge=1, description="Period along e1 (nodes)")
    n2: int = Field(default=1, ge=1, description="Period along e2 (nodes)")
    masses: NodeField = Field(default=1.0, description="Background masses")
    strip_perturbation: NodeField = Field(default=0.0, description="Line-defect increments")
    point_perturbation: NodeField = Field(default=0.0, description="Point-defect increments")
    adjacency: Literal["square"] | tuple[Link, ...] = "square"
    strip_direction: Literal["e1"] = "e1"

    @field_validator("strip_direction", mode="before")
    @classmethod
    def _strip_along_e1(cls, value):
        if value != "e1":
            raise ValueError(
                f"strip_direction={value!r} is not supported; the line defect runs along e1"
            )
        return value

    @model_validator(mode="after")
    def _check_physics(self) -> "LatticeSpec":
        for name in ("masses", "strip_perturbation", "point_perturbation"):
            value = getattr(self, name)
            if isinstance(value, float):
                continue
            if len(value) != self.n1 or any(len(row) != self.n2 for row in value):
                raise ValueError(f"{name} must be a scalar or an {self.n1} x {self.n2} table")

        background = self.mass_vector()
        strip = background + self.strip_vector()
        if np.any(background <= 0):
            raise ValueError("masses must be positive")
        if np.any(strip <= 0):
            raise ValueError("masses + strip_perturbation must be positive")
        if np.any(strip + self.point_vector() <= 0):
            raise ValueError("masses + strip_perturbation + point_perturbation must be positive")

        links = self.links()
        if not links:
            raise ValueError("adjacency has no links")
        for link in links:
            for i1, i2 in (link.source, link.target):
                if not (0 <= i1 < self.n1 and 0 <= i2 < self.n2):
                    raise ValueError(f"link node ({i1}, {i2}) lies outside the cell")
        if np.any(self.degrees() == 0):
            raise ValueError("every node needs at least one link")
        return self

    @property
    def size(self) -> int:
        return self.n1 * self.n2

    def node_index(self, i1: int, i2: int) -> int:
        return i1 * self.n2 + i2

    def _vector(self, value: NodeField) -> np.ndarray:
        if isinstance(value, float):
            return np.full(self.size, value)
        return np.asarray(value, dtype=float).reshape(-1)

    def mass_vector(self) -> np.ndarray:
        return self._vector(self.masses)

    def strip_vector(self) -> np.ndarray:
        return self._vector(self.strip_perturbation)

    def point_vector(self) -> np.ndarray:
        return self._vector(self.point_perturbation)

    def links(self) -> tuple[Link, ...]:
        if self.adjacency == "square":
            return square_links(self.n1, self.n2)
        return self.adjacency

    def degrees(self) -> np.ndarray:
        """Link ends per node; a link wrapping onto its own node counts twice."""
        degree = np.zeros(self.size, dtype=int)
        for link in self.links():
            degree[self.node_index(*link.source)] += 1
            degree[self.node_index(*link.target)] += 1
        return degree

    def has_strip(self) -> bool:
        return bool(np.any(self.strip_vector() != 0))

    def has_point(self) -> bool:
        return bool(np.any(self.point_vector() != 0))

    def frequency_bound(self, include_point: bool = True) -> float:
        """Upper bound on any frequency of the perturbed lattice (Gershgorin).

        Rows away from the strip keep the background masses, so those enter
        the minimum alongside the strip and defect masses.
        """
        background = self.mass_vector()
        strip = background + self.strip_vector()
        total = np.minimum(background, strip)
        if include_point:
            total = np.minimum(total, strip + self.point_vector())
        return float(np.sqrt((4 + self.degrees().max()) / total.min()))

    def without_point_defect(self) -> "LatticeSpec":
        return self.model_copy(update={"point_perturbation": 0.0})

    def spec_hash(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode()).hexdigest()[:16]

    @classmethod
    def uniform(cls, m1: float = 0.0, m2: float = 0.0, mass: float = 1.0) -> "LatticeSpec":
        """Unit-mass square lattice with a one-row strip and a one-node defect."""
        return cls(masses=float(mass), strip_perturbation=float(m1), point_perturbation=float(m2))


class IntervalSet(BaseModel):
    """Finite union of closed intervals on the frequency axis."""

    model_config = ConfigDict(frozen=True)

    intervals: tuple[tuple[float, float], ...] = ()

    @field_validator("intervals")
    @classmethod
    def _normalize(cls, value):
        for a, b in value:
            if np.isnan(a) or np.isnan(b) or a > b:
                raise ValueError(f"invalid interval [{a}, {b}]")
        merged: list[tuple[float, float]] = []
        for a, b in sorted(value):
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((float(a), float(b)))
        return tuple(merged)

    @classmethod
    def of(cls, *intervals: tuple[float, float]) -> "IntervalSet":
        return cls(intervals=tuple(intervals))

    def is_empty(self) -> bool:
        return not self.intervals

    @property
    def lower(self) -> float:
        return self.intervals[0][0]

    @property
    def upper(self) -> float:
        return self.intervals[-1][1]

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(intervals=self.intervals + other.intervals)

    def complement(self, lo: float, hi: float, min_width: float = 1e-12) -> "IntervalSet":
        """Closure of ``[lo, hi]`` minus this set; zero-width pieces are dropped."""
        pieces = []
        cursor = lo
        for a, b in self.intervals:
            if b < lo:
                continue
            if a > hi:
                break
            if a - cursor > min_width:
                pieces.append((cursor, a))
            cursor = max(cursor, b)
        if hi - cursor > min_width:
            pieces.append((cursor, hi))
        return IntervalSet(intervals=tuple(pieces))

    def contains(self, x: float, margin: float = 0.0) -> bool:
        return any(a - margin <= x <= b + margin for a, b in self.intervals)

    def distance(self, x: float) -> float:
        if not self.intervals:
            return float("inf")
        return min(0.0 if a <= x <= b else min(abs(x - a), abs(x - b)) for a, b in self.intervals)

    def edges(self) -> list[float]:
        return [edge for interval in self.intervals for edge in interval]


class DispersionPoint(BaseModel):
    k1: float
    k2: float
    omegas: tuple[float, ...]


class DispersionTable(BaseModel):
    """Sampled propagative branches; branch index is the sort position."""

    grid: int
    spec_hash: str
    branch_count: int
    points: list[DispersionPoint]

    @model_validator(mode="after")
    def _sorted_branches(self) -> "DispersionTable":
        for point in self.points:
            if len(point.omegas) != self.branch_count:
                raise ValueError("branch count mismatch")
            if any(w < 0 for w in point.omegas) or list(point.omegas) != sorted(point.omegas):
                raise ValueError("branches must be nonnegative and sorted")
        return self

    def rows(self):
        for point in self.points:
            for branch, omega in enumerate(point.omegas):
                yield point.k1, point.k2, branch, omega


class GapStructure(BaseModel):
    """Projected bands and the gaps between them, up to ``omega_max``."""

    i_p: IntervalSet
    i_g: IntervalSet
    gaps: IntervalSet
    tail_gap: bool
    omega_max: float

    def is_tail(self, index: int) -> bool:
        return self.tail_gap and index == len(self.gaps.intervals) - 1

    def gap_index(self, omega: float, margin: float = 1e-9) -> int | None:
        """Index of the gap holding ``omega`` at least ``margin`` from band edges."""
        for index, (a, b) in enumerate(self.gaps.intervals):
            upper_ok = omega <= b if self.is_tail(index) else omega < b - margin
            if a + margin < omega and upper_ok:
                return index
        return None


class ExistenceCase(str, Enum):
    """Regimes of the uniform strip mass."""

    TWO_GAP = "two-gap"
    ABOVE_GUIDED = "one-gap-above-guided"
    ABOVE_PROPAGATIVE = "one-gap-above-propagative"


class GapVerdict(BaseModel):
    gap: Literal["G1", "G2", "G"]
    interval: tuple[float, float]
    modes: int = Field(ge=0, le=1)


class ExistenceReport(BaseModel):
    m1: float
    m2: float
    case_id: ExistenceCase
    verdicts: list[GapVerdict]
    threshold: float | None = None
    d1_edge: float | None = None

    @property
    def total_modes(self) -> int:
        return sum(v.modes for v in self.verdicts)

    def modes_in(self, gap: str) -> int:
        return sum(v.modes for v in self.verdicts if v.gap == gap)

    def occupied_gap(self) -> str | None:
        return next((v.gap for v in self.verdicts if v.modes), None)


@dataclass
class ModeResult:
    """A guided or localized frequency with optional real-space shape.

    ``shape`` is indexed ``[x, y]`` over the node window with the defect (or
    strip row) at ``origin``; it is normalized to unit maximum amplitude.
    """

    omega: float
    gap_index: int | None = None
    residual: float = 0.0
    shape: np.ndarray | None = None
    origin: tuple[int, int] = (0, 0)
    decay_rate_x: float | None = None
    decay_rate_y: float | None = None
    decay_fit_r2: float | None = None
    participation_ratio: float | None = None
    k1: float | None = None
