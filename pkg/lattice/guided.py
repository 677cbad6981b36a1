"""Guided waves along the line defect: averaged resolvent, determinant, dispersion."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .bloch import l_hat_batch, wrap_wavevector
from .env import get_settings, logfire
from .errors import DomainError, NonConvergence, SpectrumViolation
from .models import IntervalSet, LatticeSpec
from .propagative import propagative_projection_k1
from .quadrature import QuadratureResult, periodic_trapezoid
from .roots import RootScan, realness_residual, scan_roots
from .workers import parallel_map

GUARD = 1e-9


@dataclass(frozen=True)
class AveragedResolvent:
    omega: float
    k1: float
    matrix: np.ndarray
    quad_error: float


@dataclass(frozen=True)
class DeterminantValue:
    value: complex
    residual: float


def resolvent_average(spec: LatticeSpec, omegas, k1s, *, tol: float) -> QuadratureResult:
    """k2-mean of ``(L + w^2 M)^-1`` for every (omega, k1) pair; unchecked."""
    omegas, k1s = (a.ravel() for a in np.broadcast_arrays(np.asarray(omegas, float), np.asarray(k1s, float)))
    masses = spec.mass_vector()
    n = spec.size

    def integrand(k2: np.ndarray, active: np.ndarray) -> np.ndarray:
        operator = l_hat_batch(spec, k1s[active][None, :], k2[:, None])
        w2 = omegas[active] ** 2
        if n == 1:
            return 1.0 / (operator + (w2 * masses[0])[None, :, None, None])
        return np.linalg.inv(operator + w2[None, :, None, None] * np.diag(masses))

    return periodic_trapezoid(integrand, omegas.size, tol=tol, width=n * n, label="k2 average")


def _check_off_band(spec: LatticeSpec, omega: float, k1: float) -> IntervalSet:
    bands = propagative_projection_k1(spec, k1)
    if bands.contains(omega, margin=GUARD):
        raise SpectrumViolation(omega, "propagative", f"omega={omega!r} lies in I_p(k1={k1!r}) = {bands.intervals}")
    return bands


def averaged_resolvent_k2(
    spec: LatticeSpec, omega: float, k1: float, tol: float | None = None
) -> AveragedResolvent:
    k1 = wrap_wavevector((k1, 0.0))[0]
    _check_off_band(spec, omega, k1)
    result = resolvent_average(spec, omega, k1, tol=tol or get_settings().quad_tol)
    return AveragedResolvent(omega=omega, k1=k1, matrix=result.value[0], quad_error=float(result.error[0]))


def _guided_matrices(spec: LatticeSpec, resolvents: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    eye = np.eye(spec.size)
    return eye + (omegas**2)[:, None, None] * resolvents * spec.strip_vector()[None, None, :]


def guided_det_values(spec: LatticeSpec, omegas, k1: float, tol: float = 1e-12) -> np.ndarray:
    """Batched ``det(I + w^2 <L_p^-1>_2 M1)`` without band checks."""
    omegas = np.atleast_1d(np.asarray(omegas, float))
    result = resolvent_average(spec, omegas, k1, tol=tol)
    return np.linalg.det(_guided_matrices(spec, result.value, omegas))


def guided_det(spec: LatticeSpec, omega: float, k1: float, tol: float = 1e-12) -> DeterminantValue:
    if not spec.has_strip():
        return DeterminantValue(value=1.0 + 0.0j, residual=0.0)
    resolvent = averaged_resolvent_k2(spec, omega, k1, tol=tol)
    matrix = _guided_matrices(spec, resolvent.matrix[None], np.array([omega]))[0]
    value = complex(np.linalg.det(matrix))
    return DeterminantValue(value=value, residual=realness_residual(value))


def _validate_search(search: IntervalSet, bands: IntervalSet):
    for a, b in search.intervals:
        for c, d in bands.intervals:
            if max(a, c) < min(b, d) - GUARD:
                raise DomainError(f"search interval [{a}, {b}] overlaps the band [{c}, {d}]")


def scan_guided(
    spec: LatticeSpec, k1: float, search: IntervalSet | None = None, tol: float = 1e-12
) -> RootScan:
    """Sign scan of the guided determinant over gaps of I_p(k1)."""
    scan = RootScan()
    if not spec.has_strip():
        return scan
    k1 = wrap_wavevector((k1, 0.0))[0]
    bands = propagative_projection_k1(spec, k1)
    if search is None:
        search = bands.complement(0.0, max(spec.frequency_bound(include_point=False), bands.upper))
    _validate_search(search, bands)
    for a, b in search.intervals:
        scan.extend(
            scan_roots(
                lambda ws: guided_det_values(spec, ws, k1, tol=tol),
                a,
                b,
                open_lo=bands.contains(a, margin=1e-12),
                open_hi=bands.contains(b, margin=1e-12),
            )
        )
    scan.roots = [r for r in scan.roots if bands.distance(r) >= GUARD]
    return scan


def guided_spectrum(spec: LatticeSpec, k1: float, search: IntervalSet | None = None) -> list[float]:
    return scan_guided(spec, k1, search).roots


def uniform_averaged_resolvent(omega: float, k1: float) -> float:
    """Closed-form k2-mean of ``1/(2cos k1 + 2cos k2 - 4 + w^2)``."""
    a = 2 * np.cos(k1) - 4 + omega**2
    if abs(a) <= 2:
        raise SpectrumViolation(omega, "propagative")
    return float(np.sign(a) / np.sqrt((a - 2) * (a + 2)))


def guided_closed_form(m1: float, k1: float) -> float:
    """Guided frequency of the uniform example with strip increment ``m1``.

    Written without the ``m1^2 - 1`` denominator so ``m1 = 1`` and ``m1 = 0``
    (band edge) need no special branch.
    """
    if m1 <= -1:
        raise DomainError("strip mass 1 + m1 must be positive")
    c = np.cos(k1)
    root = np.sqrt(m1**2 * (c - 2) ** 2 - m1**2 + 1)
    if m1 < 0:
        w2 = (4 - 2 * c + 2 * root) / (1 - m1**2)
    else:
        w2 = 2 * ((c - 2) ** 2 - 1) / (root + 2 - c)
    return float(np.sqrt(max(w2, 0.0)))


def uniform_guided_projection(m1: float) -> IntervalSet:
    if m1 <= -1:
        raise DomainError("strip mass 1 + m1 must be positive")
    if m1 == 0:
        return IntervalSet()
    root = np.sqrt(8 * m1**2 + 1)
    if m1 < 0:
        return IntervalSet.of((2 / np.sqrt(1 - m1**2), np.sqrt(6 + 2 * root) / np.sqrt(1 - m1**2)))
    return IntervalSet.of((0.0, float(np.sqrt(16 / (root + 3)))))


def _pair_closure(spec: LatticeSpec, k_yes: float, yes: list[float], k_no: float, no: list[float]):
    """Intervals between samples where guided branches appear or vanish.

    A vanishing branch has merged into a band edge; its range is closed off at
    the nearest edge of I_p at the sample where it is missing.
    """
    edges = propagative_projection_k1(spec, k_no).edges()
    nearest = {r: min(edges, key=lambda e, r=r: abs(e - r)) for r in yes}
    ending = sorted(yes, key=lambda r: abs(nearest[r] - r))[: len(yes) - len(no)]
    continuing = sorted(r for r in yes if r not in ending)
    intervals = [(min(r, nearest[r]), max(r, nearest[r])) for r in ending]
    intervals += [(min(a, b), max(a, b)) for a, b in zip(continuing, sorted(no), strict=False)]
    return intervals


def _branch_intervals(spec: LatticeSpec, k1s: np.ndarray, samples: dict[float, list[float]]):
    intervals = [(r, r) for k in k1s for r in samples[k]]
    for ka, kb in zip(k1s[:-1], k1s[1:], strict=True):
        ra, rb = samples[ka], samples[kb]
        if len(ra) == len(rb):
            intervals += [(min(a, b), max(a, b)) for a, b in zip(ra, rb, strict=True)]
        elif len(ra) > len(rb):
            intervals += _pair_closure(spec, ka, ra, kb, rb)
        else:
            intervals += _pair_closure(spec, kb, rb, ka, ra)

    # interior extrema fall between samples; polish them
    for j in range(1, len(k1s) - 1):
        left, mid, right = (samples[k] for k in k1s[j - 1 : j + 2])
        if not len(left) == len(mid) == len(right):
            continue
        for b, value in enumerate(mid):
            sign = 1.0 if value < min(left[b], right[b]) else -1.0 if value > max(left[b], right[b]) else 0.0
            if sign == 0.0:
                continue

            def branch(k, b=b, sign=sign, value=value):
                roots = guided_spectrum(spec, k)
                return sign * (roots[b] if len(roots) == len(mid) else value)

            res = minimize_scalar(branch, bounds=(k1s[j - 1], k1s[j + 1]), method="bounded", options={"xatol": 1e-10})
            intervals.append((sign * float(res.fun),) * 2)
    return intervals


@lru_cache(maxsize=16)
def _projection(spec: LatticeSpec, grid: int, tol: float, max_refinements: int) -> IntervalSet:
    samples: dict[float, list[float]] = {}
    previous: IntervalSet | None = None
    change = float("inf")
    for level in range(max_refinements + 1):
        n = grid * 2**level
        # dyadic fractions keep the shared k1 nodes bit-identical across levels
        k1s = np.pi * (np.arange(n + 1) / n)
        fresh = [float(k) for k in k1s if float(k) not in samples]
        for k, roots in zip(fresh, parallel_map(lambda k: guided_spectrum(spec, k), fresh), strict=True):
            samples[k] = roots
        current = IntervalSet(intervals=tuple(_branch_intervals(spec, [float(k) for k in k1s], samples)))
        logfire.info("guided projection level", level=level, k1_samples=n + 1, intervals=current.intervals)
        if previous is not None and len(previous.intervals) == len(current.intervals):
            change = float(np.max(np.abs(np.subtract(previous.edges(), current.edges())), initial=0.0))
            if change < tol:
                return current
        previous = current
    raise NonConvergence("guided projection edges did not settle", achieved=change, points=grid * 2**max_refinements)


def guided_projection(
    spec: LatticeSpec, grid: int = 32, tol: float = 1e-8, max_refinements: int = 3
) -> IntervalSet:
    """Frequencies of all guided branches over k1 in the zone.

    Uses the symmetry w_g(-k1) = w_g(k1) and sweeps k1 over [0, pi].
    """
    if not spec.has_strip():
        return IntervalSet()
    strip_only = spec.without_point_defect()
    with logfire.span("guided_projection", spec_hash=strip_only.spec_hash(), grid=grid):
        return _projection(strip_only, grid, tol, max_refinements)
