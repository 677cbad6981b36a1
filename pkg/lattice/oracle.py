"""Direct eigensolution of a large clamped finite lattice."""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from .env import logfire
from .errors import DomainError, NonConvergence
from .localized import gap_structure
from .models import LatticeSpec

MIN_SIZE = 41
LOCALIZED_PR = 0.05
BOUNDARY_WARN = 1e-6


def defect_node(spec: LatticeSpec) -> tuple[int, int]:
    """Cell coordinates of the point-defect node (largest |increment|)."""
    index = int(np.argmax(np.abs(spec.point_vector())))
    return divmod(index, spec.n2)


@dataclass(frozen=True)
class FiniteLattice:
    """Box of ``width x height`` nodes with zero displacement outside.

    Node ``(x, y)`` has flat index ``x * height + y``; ``origin`` is the box
    position of the point-defect node, placed at the centre.
    """

    width: int
    height: int
    masses: np.ndarray
    stiffness: sparse.csr_matrix
    origin: tuple[int, int]
    boundary: str = "clamped"

    @classmethod
    def from_spec(cls, spec: LatticeSpec, width: int, height: int) -> "FiniteLattice":
        d1, d2 = defect_node(spec)
        ox, oy = (width - 1) // 2, (height - 1) // 2
        gx, gy = np.meshgrid(np.arange(width) - ox + d1, np.arange(height) - oy + d2, indexing="ij")
        r1, i1 = np.divmod(gx, spec.n1)
        r2, i2 = np.divmod(gy, spec.n2)
        cell_index = i1 * spec.n2 + i2
        masses = spec.mass_vector()[cell_index]
        masses = masses + np.where(r2 == 0, spec.strip_vector()[cell_index], 0.0)
        masses = masses + np.where((r1 == 0) & (r2 == 0), spec.point_vector()[cell_index], 0.0)

        rows, cols = [], []
        flat = np.arange(width * height).reshape(width, height)
        for link in spec.links():
            at_source = (i1 == link.source[0]) & (i2 == link.source[1])
            px = (r1 + link.offset[0]) * spec.n1 + link.target[0] - d1 + ox
            py = (r2 + link.offset[1]) * spec.n2 + link.target[1] - d2 + oy
            inside = at_source & (px >= 0) & (px < width) & (py >= 0) & (py < height)
            src = flat[inside]
            dst = flat[px[inside], py[inside]]
            rows += [src, dst]
            cols += [dst, src]
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        n = width * height
        adjacency = sparse.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n)).tocsr()
        stiffness = (4.0 * sparse.identity(n, format="csr") - adjacency).tocsr()
        return cls(width=width, height=height, masses=masses, stiffness=stiffness, origin=(ox, oy))

    def reduced_operator(self) -> sparse.csr_matrix:
        scale = sparse.diags(1.0 / np.sqrt(self.masses.ravel()))
        return (scale @ self.stiffness @ scale).tocsr()

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros((self.width, self.height), dtype=bool)
        mask[[0, -1], :] = True
        mask[:, [0, -1]] = True
        return mask


@dataclass
class OracleMode:
    omega: float
    participation_ratio: float
    gap_index: int
    boundary_ratio: float
    shape: np.ndarray
    origin: tuple[int, int] = (0, 0)

    @property
    def is_candidate(self) -> bool:
        return self.participation_ratio < LOCALIZED_PR


def participation_ratio(shape: np.ndarray) -> float:
    """``(sum |u|^2)^2 / (N sum |u|^4)``; 1 for a uniform field, 1/N for one node."""
    power = np.abs(shape) ** 2
    return float(power.sum() ** 2 / (power.size * np.sum(power**2)))


def _eigs_near(operator, sigma: float, reach: float, v0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = operator.shape[0]
    k = 8
    while True:
        k = min(k, n - 2)
        try:
            values, vectors = eigsh(operator, k=k, sigma=sigma, which="LM", v0=v0)
        except (ArpackNoConvergence, ArpackError) as e:
            raise NonConvergence(f"shift-invert eigensolve failed near {sigma}: {e}", achieved=float("nan")) from e
        if np.max(np.abs(values - sigma)) >= reach or k >= n - 2:
            return values, vectors
        k *= 2


def finite_oracle(spec: LatticeSpec, size: tuple[int, int] = (61, 61), seed: int = 0) -> list[OracleMode]:
    """Eigenmodes of the clamped finite lattice with frequencies in the gaps."""
    width, height = size
    if width < MIN_SIZE or height < MIN_SIZE:
        raise DomainError(f"finite lattice must be at least {MIN_SIZE} x {MIN_SIZE} nodes")
    lattice = FiniteLattice.from_spec(spec, width, height)
    structure = gap_structure(spec)
    operator = lattice.reduced_operator()
    scale = 1.0 / np.sqrt(lattice.masses.ravel())
    v0 = np.random.default_rng(seed).standard_normal(operator.shape[0])
    boundary = lattice.boundary_mask()

    modes: list[OracleMode] = []
    with logfire.span("finite_oracle", spec_hash=spec.spec_hash(), width=width, height=height):
        for index, (a, b) in enumerate(structure.gaps.intervals):
            if structure.is_tail(index):
                sigma = b**2 * (1 + 1e-3)
                reach = sigma - a**2
            else:
                sigma = (a**2 + b**2) / 2
                reach = (b**2 - a**2) / 2
            values, vectors = _eigs_near(operator, sigma, reach, v0)
            for value, vector in zip(values, vectors.T, strict=True):
                omega = float(np.sqrt(max(value, 0.0)))
                if structure.gap_index(omega) != index:
                    continue
                shape = (scale * vector).reshape(width, height)
                shape = shape / np.linalg.norm(shape)
                peak = np.abs(shape).max()
                mode = OracleMode(
                    omega=omega,
                    participation_ratio=participation_ratio(shape),
                    gap_index=index,
                    boundary_ratio=float(np.abs(shape[boundary]).max() / peak),
                    shape=shape,
                    origin=lattice.origin,
                )
                if mode.is_candidate and mode.boundary_ratio > BOUNDARY_WARN:
                    logfire.warn(
                        "candidate reaches the clamped boundary; enlarge the lattice",
                        omega=omega,
                        boundary_ratio=mode.boundary_ratio,
                    )
                modes.append(mode)
    modes.sort(key=lambda m: m.omega)
    logfire.info("finite oracle", candidates=[(m.omega, m.participation_ratio) for m in modes if m.is_candidate])
    return modes

