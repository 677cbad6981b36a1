"""Sign-scan root search with bracketed refinement."""

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .env import logfire
from .errors import NonConvergence

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass
class RootScan:
    roots: list[float] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    rejected: list[float] = field(default_factory=list)
    saturated: list[tuple[float, float]] = field(default_factory=list)

    def extend(self, other: "RootScan"):
        self.roots += other.roots
        self.residuals += other.residuals
        self.rejected += other.rejected
        self.saturated += other.saturated


def realness_residual(value: complex) -> float:
    return abs(value.imag) / (1.0 + abs(value.real))


def scan_grid(
    lo: float,
    hi: float,
    *,
    points: int = 128,
    open_lo: bool = True,
    open_hi: bool = True,
    tail: bool = False,
    min_offset: float = 1e-4,
) -> np.ndarray:
    """Sample points in ``[lo, hi]`` clustered toward open (band-edge) ends.

    A tail interval is sampled log-spaced away from ``lo``.
    """
    width = hi - lo
    if tail:
        offsets = np.geomspace(min_offset, 1.0, points)
        if not open_lo:
            offsets = np.concatenate(([0.0], offsets))
        return lo + width * offsets
    t = (1 - np.cos(np.pi * np.arange(1, points + 1) / (points + 1))) / 2
    near = 10.0 ** -np.arange(2, int(round(-np.log10(min_offset))) + 1)
    offsets = [t, near, 1 - near]
    if not open_lo:
        offsets.append([0.0])
    if not open_hi:
        offsets.append([1.0])
    return lo + width * np.unique(np.concatenate(offsets))


def _evaluate_safely(evaluate: Evaluator, xs: np.ndarray) -> np.ndarray:
    try:
        return np.asarray(evaluate(xs), dtype=complex)
    except NonConvergence:
        values = np.full(xs.size, np.nan, dtype=complex)
        for i, x in enumerate(xs):
            try:
                values[i] = evaluate(np.array([x]))[0]
            except NonConvergence:
                continue
        return values


def scan_roots(
    evaluate: Evaluator,
    lo: float,
    hi: float,
    *,
    points: int = 128,
    open_lo: bool = True,
    open_hi: bool = True,
    tail: bool = False,
    xtol: float = 1e-13,
    residual_gate: float = 1e-6,
) -> RootScan:
    """Roots of ``Re evaluate`` in ``[lo, hi]``.

    ``evaluate`` maps an array of abscissae to complex values. Roots whose
    realness residual exceeds ``residual_gate`` are reported as rejected.
    """
    scan = RootScan()
    if hi <= lo:
        return scan

    xs = scan_grid(lo, hi, points=points, open_lo=open_lo, open_hi=open_hi, tail=tail)
    real = _evaluate_safely(evaluate, xs).real

    def real_at(x: float) -> float:
        return float(evaluate(np.array([x]))[0].real)

    candidates: list[float] = [float(x) for x, f in zip(xs, real, strict=True) if f == 0.0]
    for i in range(xs.size - 1):
        fa, fb = real[i], real[i + 1]
        if not (np.isfinite(fa) and np.isfinite(fb)):
            scan.saturated.append((float(xs[i]), float(xs[i + 1])))
            continue
        if fa * fb < 0:
            try:
                candidates.append(brentq(real_at, xs[i], xs[i + 1], xtol=xtol, maxiter=200))
            except NonConvergence:
                scan.saturated.append((float(xs[i]), float(xs[i + 1])))

    for root in sorted(candidates):
        residual = realness_residual(complex(evaluate(np.array([root]))[0]))
        if residual > residual_gate:
            logfire.warn("root rejected by realness gate", omega=root, residual=residual)
            scan.rejected.append(root)
        else:
            scan.roots.append(float(root))
            scan.residuals.append(residual)
    if scan.saturated:
        logfire.warn("sign scan saturated", intervals=scan.saturated)
    return scan
