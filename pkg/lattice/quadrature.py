"""Quadrature rules: periodic trapezoid with doubling and graded Gauss-Legendre."""

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .env import get_settings
from .errors import NonConvergence


@dataclass(frozen=True)
class QuadratureResult:
    value: np.ndarray
    error: np.ndarray
    points: int


def _nodes(n: int, shift: float) -> np.ndarray:
    return -np.pi + 2 * np.pi * (np.arange(n) + shift) / n


def _node_sum(integrand, nodes, active, width, chunk_elements):
    step = max(1, chunk_elements // max(1, active.size * width))
    total = None
    for start in range(0, nodes.size, step):
        part = integrand(nodes[start : start + step], active).sum(axis=0)
        total = part if total is None else total + part
    return total


def periodic_trapezoid(
    integrand: Callable[[np.ndarray, np.ndarray], np.ndarray],
    count: int,
    *,
    tol: float,
    width: int = 1,
    initial_points: int = 16,
    max_points: int | None = None,
    chunk_elements: int = 2**22,
    label: str = "trapezoid",
) -> QuadratureResult:
    """Mean of ``count`` 2pi-periodic integrands over [-pi, pi).

    ``integrand(nodes, active)`` returns an array of shape
    ``(len(nodes), len(active), ...)`` for the job indices in ``active``.
    Each job doubles its grid until successive estimates differ by at most
    ``tol * max(1, |estimate|)``; converged jobs drop out of later levels.
    ``width`` is the number of scalars per (node, job) and only sizes chunks.
    """
    max_points = max_points or get_settings().point_cap
    n = initial_points
    active = np.arange(count)
    estimate = _node_sum(integrand, _nodes(n, 0.0), active, width, chunk_elements) / n
    error = np.full(count, np.inf)
    while active.size:
        if 2 * n > max_points:
            raise NonConvergence(
                f"{label} did not converge within {max_points} points",
                achieved=float(error[active].max()),
                points=n,
            )
        fresh = _node_sum(integrand, _nodes(n, 0.5), active, width, chunk_elements)
        refined = (estimate[active] * n + fresh) / (2 * n)
        axes = tuple(range(1, refined.ndim))
        diff = np.abs(refined - estimate[active]).max(axis=axes) if axes else np.abs(refined - estimate[active])
        scale = np.maximum(1.0, np.abs(refined).max(axis=axes) if axes else np.abs(refined))
        if not np.all(np.isfinite(diff)):
            raise NonConvergence(f"{label} met a non-finite integrand", achieved=float("inf"), points=n)
        estimate[active] = refined
        error[active] = diff
        n *= 2
        active = active[diff > tol * scale]
    return QuadratureResult(value=estimate, error=error, points=n)


def graded_gauss_legendre(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    *,
    tol: float,
    levels: int = 30,
    initial_order: int = 8,
    max_order: int = 512,
) -> QuadratureResult:
    """Integral of ``func`` over ``[a, b]`` on panels refined geometrically
    toward both ends; the Gauss order doubles until the sum settles."""
    half = (b - a) / 2
    ratios = 2.0 ** -np.arange(levels + 1)
    breaks = np.concatenate(([a], a + half * ratios[::-1], (b - half * ratios)[1:], [b]))
    lo, hi = breaks[:-1], breaks[1:]
    centre, radius = (hi + lo) / 2, (hi - lo) / 2

    def rule(order: int) -> float:
        x, w = leggauss(order)
        nodes = centre[None, :] + radius[None, :] * x[:, None]
        return float(np.sum(radius[None, :] * w[:, None] * func(nodes)))

    order = initial_order
    value = rule(order)
    diff = float("inf")
    while True:
        if order * 2 > max_order:
            raise NonConvergence("graded Gauss-Legendre did not converge", achieved=diff)
        order *= 2
        refined = rule(order)
        diff = abs(refined - value)
        value = refined
        if diff <= tol * max(1.0, abs(value)):
            return QuadratureResult(value=np.asarray(value), error=np.asarray(diff), points=order * lo.size)
