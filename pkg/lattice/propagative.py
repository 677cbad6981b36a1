"""Propagative (Floquet) branches and their band projections."""

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .bloch import BZ_SLACK, l_hat_batch
from .env import logfire
from .errors import AssemblyError, DomainError, NonConvergence
from .models import DispersionPoint, DispersionTable, IntervalSet, LatticeSpec

CLIP_ZERO = 1e-12
NEGATIVE_FAIL = 1e-9
MIN_GRID = 64


def branch_frequencies(spec: LatticeSpec, k1, k2) -> np.ndarray:
    """Sorted branch frequencies at broadcast wavevectors, shape ``(..., N)``.

    Solves ``(-L) v = w^2 M v`` through the Hermitian form ``M^-1/2 (-L) M^-1/2``.
    """
    scale = 1.0 / np.sqrt(spec.mass_vector())
    reduced = -l_hat_batch(spec, k1, k2) * scale[:, None] * scale[None, :]
    eigenvalues = np.linalg.eigvalsh(reduced)
    lowest = float(eigenvalues.min())
    if lowest < -NEGATIVE_FAIL:
        raise AssemblyError(f"negative eigenvalue {lowest:.3e}: stiffness is not positive semidefinite")
    if lowest < -CLIP_ZERO:
        logfire.warn("clipping slightly negative eigenvalue", eigenvalue=lowest)
    return np.sqrt(np.clip(eigenvalues, 0.0, None))


def propagative_branches(spec: LatticeSpec, k: tuple[float, float]) -> list[float]:
    k1, k2 = (float(c) for c in k)
    if max(abs(k1), abs(k2)) > np.pi + BZ_SLACK:
        raise DomainError(f"wavevector {k} lies outside [-pi, pi]^2")
    return branch_frequencies(spec, k1, k2).tolist()


def dispersion_table(spec: LatticeSpec, grid: int = 64) -> DispersionTable:
    """Branches on a ``(grid + 1) x (grid + 1)`` grid covering [-pi, pi]^2."""
    axis = np.linspace(-np.pi, np.pi, grid + 1)
    k1, k2 = np.meshgrid(axis, axis, indexing="ij")
    omegas = branch_frequencies(spec, k1, k2)
    points = [
        DispersionPoint(k1=float(k1[i, j]), k2=float(k2[i, j]), omegas=tuple(omegas[i, j]))
        for i in range(axis.size)
        for j in range(axis.size)
    ]
    return DispersionTable(grid=grid, spec_hash=spec.spec_hash(), branch_count=spec.size, points=points)


def _periodic_nodes(n: int) -> np.ndarray:
    return -np.pi + 2 * np.pi * np.arange(n) / n


def _edges_k1(spec: LatticeSpec, k1: float, n: int) -> np.ndarray:
    nodes = _periodic_nodes(n)
    values = branch_frequencies(spec, k1, nodes)
    h = 2 * np.pi / n
    edges = np.empty((spec.size, 2))
    for branch in range(spec.size):
        for col, sign in ((0, 1.0), (1, -1.0)):
            j = int(np.argmin(sign * values[:, branch]))
            res = minimize_scalar(
                lambda x, b=branch, s=sign: s * branch_frequencies(spec, k1, x)[b],
                bounds=(nodes[j] - h, nodes[j] + h),
                method="bounded",
                options={"xatol": 1e-12},
            )
            best = min(sign * values[j, branch], float(res.fun))
            edges[branch, col] = sign * best
    return edges


def _edges_full(spec: LatticeSpec, n: int) -> np.ndarray:
    nodes = _periodic_nodes(n)
    k1, k2 = np.meshgrid(nodes, nodes, indexing="ij")
    values = branch_frequencies(spec, k1, k2)
    h = 2 * np.pi / n
    edges = np.empty((spec.size, 2))
    for branch in range(spec.size):
        for col, sign in ((0, 1.0), (1, -1.0)):
            i, j = np.unravel_index(np.argmin(sign * values[..., branch]), values.shape[:2])
            x0 = np.array([nodes[i], nodes[j]])
            res = minimize(
                lambda x, b=branch, s=sign: s * branch_frequencies(spec, x[0], x[1])[b],
                x0,
                method="Nelder-Mead",
                bounds=[(x0[0] - h, x0[0] + h), (x0[1] - h, x0[1] + h)],
                options={
                    "xatol": 1e-12,
                    "fatol": 1e-15,
                    "initial_simplex": [x0, x0 + [h / 2, 0], x0 + [0, h / 2]],
                },
            )
            best = min(sign * values[i, j, branch], float(res.fun))
            edges[branch, col] = sign * best
    return edges


def _refine(compute, grid: int, tol: float, max_refinements: int, label: str) -> IntervalSet:
    if grid < MIN_GRID:
        raise DomainError(f"grid must be at least {MIN_GRID} points")
    edges = compute(grid)
    change = float("inf")
    for _ in range(max_refinements):
        grid *= 2
        refined = compute(grid)
        change = float(np.max(np.abs(refined - edges)))
        edges = refined
        if change < tol:
            return IntervalSet(intervals=tuple(map(tuple, edges)))
    raise NonConvergence(f"{label} edges did not settle", achieved=change, points=grid)


def propagative_projection_k1(
    spec: LatticeSpec, k1: float, grid: int = 64, tol: float = 1e-8, max_refinements: int = 8
) -> IntervalSet:
    """Frequencies reached by any branch as k2 sweeps the zone, at fixed k1."""
    return _refine(lambda n: _edges_k1(spec, k1, n), grid, tol, max_refinements, "I_p(k1)")


def propagative_projection_full(
    spec: LatticeSpec, grid: int = 64, tol: float = 1e-8, max_refinements: int = 4
) -> IntervalSet:
    with logfire.span("propagative_projection_full", spec_hash=spec.spec_hash(), grid=grid):
        return _refine(lambda n: _edges_full(spec, n), grid, tol, max_refinements, "I_p")


def uniform_omega_p(k1, k2, mass: float = 1.0):
    """Closed-form branch of the unit-spring square lattice with equal masses."""
    return np.sqrt(np.clip(4 - 2 * np.cos(k1) - 2 * np.cos(k2), 0.0, None) / mass)


def uniform_projection_k1(k1: float, mass: float = 1.0) -> IntervalSet:
    c = np.cos(k1)
    return IntervalSet.of((float(np.sqrt((2 - 2 * c) / mass)), float(np.sqrt((6 - 2 * c) / mass))))


def uniform_projection(mass: float = 1.0) -> IntervalSet:
    return IntervalSet.of((0.0, float(np.sqrt(8 / mass))))
