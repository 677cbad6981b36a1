"""Localized modes around the point defect and their existence classification."""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .env import logfire
from .errors import DomainError, SpectrumViolation
from .guided import GUARD, DeterminantValue, guided_projection, resolvent_average, uniform_guided_projection
from .models import ExistenceCase, ExistenceReport, GapStructure, GapVerdict, LatticeSpec, ModeResult
from .propagative import propagative_projection_full, uniform_projection
from .quadrature import QuadratureResult, graded_gauss_legendre, periodic_trapezoid
from .roots import realness_residual, scan_roots

INNER_SHARE = 10.0
OUTER_SHARE = np.sqrt(10.0)
BAND_TOP = float(np.sqrt(8.0))
TWO_GAP_LIMIT = -1 / np.sqrt(2.0)
REGION_LIMIT = 0.75 - 1 / (2 * np.pi)
# Minimum relative width of the scanned tail gap above the highest band
TAIL_HEADROOM = 0.05


def _mirror_symmetric_node(spec: LatticeSpec) -> bool:
    return spec.size == 1 and spec.adjacency == "square"


def _graded_kernel_values(spec: LatticeSpec, omegas: np.ndarray, *, tol: float) -> QuadratureResult:
    """One-node square cells: the k1 integrand is even and its guided-edge
    poles sit at k1 = 0 or pi, so graded panels on [0, pi] resolve them."""
    strip = float(spec.strip_vector()[0])
    values, errors, points = [], [], 0
    for w in omegas:

        def integrand(k1: np.ndarray, w=w) -> np.ndarray:
            inner = resolvent_average(spec, w, k1.ravel(), tol=tol / INNER_SHARE).value.real
            inner = inner.reshape(k1.shape)
            return inner / (1 + w**2 * inner * strip)

        result = graded_gauss_legendre(integrand, 0.0, np.pi, tol=tol / OUTER_SHARE)
        values.append(float(result.value) / np.pi)
        errors.append(float(result.error) / np.pi)
        points = max(points, result.points)
    return QuadratureResult(
        value=np.asarray(values).reshape(-1, 1, 1), error=np.asarray(errors), points=points
    )


def kernel_values(spec: LatticeSpec, omegas, *, tol: float) -> QuadratureResult:
    """Batched ``<L_g^-1 <L_p^-1>_2>_1`` without band checks."""
    omegas = np.atleast_1d(np.asarray(omegas, float))
    if _mirror_symmetric_node(spec):
        return _graded_kernel_values(spec, omegas, tol=tol)
    strip = spec.strip_vector()
    n = spec.size
    eye = np.eye(n)

    def integrand(k1: np.ndarray, active: np.ndarray) -> np.ndarray:
        w = omegas[active]
        inner = resolvent_average(spec, w[None, :], k1[:, None], tol=tol / INNER_SHARE)
        g = inner.value.reshape(k1.size, w.size, n, n)
        guided = eye + (w**2)[None, :, None, None] * g * strip
        return np.linalg.solve(guided, g)

    return periodic_trapezoid(integrand, omegas.size, tol=tol / OUTER_SHARE, width=n * n, label="k1 average")


def d_loc_values(spec: LatticeSpec, omegas, tol: float = 1e-11) -> np.ndarray:
    omegas = np.atleast_1d(np.asarray(omegas, float))
    kernel = kernel_values(spec, omegas, tol=tol).value
    matrices = np.eye(spec.size) + (omegas**2)[:, None, None] * kernel * spec.point_vector()
    return np.linalg.det(matrices)


def d_loc_limit(spec: LatticeSpec) -> float:
    """Value of the localized determinant as omega grows without bound."""
    strip = spec.mass_vector() + spec.strip_vector()
    return float(np.prod((strip + spec.point_vector()) / strip))


@lru_cache(maxsize=32)
def _gap_structure(strip_only: LatticeSpec, omega_max: float) -> GapStructure:
    i_p = propagative_projection_full(strip_only)
    i_g = guided_projection(strip_only)
    bands = i_p.union(i_g)
    omega_max = max(omega_max, bands.upper * (1 + TAIL_HEADROOM))
    gaps = bands.complement(0.0, omega_max)
    tail = bool(gaps.intervals) and gaps.upper >= omega_max and bands.upper < omega_max
    logfire.info("gap structure", i_p=i_p.intervals, i_g=i_g.intervals, gaps=gaps.intervals)
    return GapStructure(i_p=i_p, i_g=i_g, gaps=gaps, tail_gap=tail, omega_max=omega_max)


def gap_structure(spec: LatticeSpec, omega_max: float | None = None) -> GapStructure:
    """Gaps of ``I_p + I_g`` up to ``omega_max`` (default: the frequency bound)."""
    bound = spec.frequency_bound() if omega_max is None else float(omega_max)
    return _gap_structure(spec.without_point_defect(), bound)


def _require_gap(spec: LatticeSpec, omega: float) -> GapStructure:
    structure = gap_structure(spec, max(spec.frequency_bound(), omega))
    if structure.gap_index(omega, margin=GUARD) is None:
        raise SpectrumViolation(omega, "propagative or guided")
    return structure


def localized_kernel(spec: LatticeSpec, omega: float, tol: float = 1e-11) -> np.ndarray:
    _require_gap(spec, omega)
    return kernel_values(spec, omega, tol=tol).value[0]


def d_loc(spec: LatticeSpec, omega: float, tol: float = 1e-11) -> DeterminantValue:
    if not spec.has_point():
        return DeterminantValue(value=1.0 + 0.0j, residual=0.0)
    _require_gap(spec, omega)
    value = complex(d_loc_values(spec, omega, tol=tol)[0])
    return DeterminantValue(value=value, residual=realness_residual(value))


@dataclass
class LocalizedScan:
    structure: GapStructure
    modes: list[ModeResult] = field(default_factory=list)
    rejected: list[float] = field(default_factory=list)
    saturated: list[tuple[float, float]] = field(default_factory=list)
    limit: float = 1.0


def scan_localized(spec: LatticeSpec, tol: float = 1e-11, points: int = 128) -> LocalizedScan:
    """Sign scan of the localized determinant over every gap."""
    structure = gap_structure(spec)
    report = LocalizedScan(structure=structure, limit=d_loc_limit(spec))
    if not spec.has_point():
        return report
    bands = structure.i_p.union(structure.i_g)
    with logfire.span("scan_localized", spec_hash=spec.spec_hash(), gaps=structure.gaps.intervals):
        for index, (a, b) in enumerate(structure.gaps.intervals):
            tail = structure.is_tail(index)
            scan = scan_roots(
                lambda ws: d_loc_values(spec, ws, tol=tol),
                a,
                b,
                points=points,
                open_lo=bands.contains(a, margin=1e-12),
                open_hi=not tail,
                tail=tail,
            )
            report.modes += [
                ModeResult(omega=root, gap_index=index, residual=residual)
                for root, residual in zip(scan.roots, scan.residuals, strict=True)
                if bands.distance(root) >= GUARD
            ]
            report.rejected += scan.rejected
            report.saturated += scan.saturated
    logfire.info("localized roots", roots=[m.omega for m in report.modes], limit=report.limit)
    return report


def localized_modes(spec: LatticeSpec) -> list[ModeResult]:
    return scan_localized(spec).modes


# closed forms of the unit-mass square lattice with a one-row strip


def uniform_gap_structure(m1: float) -> GapStructure:
    i_p = uniform_projection()
    i_g = uniform_guided_projection(m1)
    gaps = i_p.union(i_g).complement(0.0, float("inf"))
    return GapStructure(i_p=i_p, i_g=i_g, gaps=gaps, tail_gap=True, omega_max=float("inf"))


def _d1_value(omega: float, m1: float, tol: float) -> float:
    """Guided-edge poles sit at k1 = 0 or pi, where the graded panels cluster."""
    w2 = omega**2

    def integrand(k1: np.ndarray) -> np.ndarray:
        a = 2 * np.cos(k1) - 4 + w2
        s = np.sign(a) * np.sqrt((a - 2) * (a + 2))
        return w2 / (w2 * m1 + s)

    return float(graded_gauss_legendre(integrand, 0.0, np.pi, tol=tol).value) / np.pi


def _edge_mean(func) -> float:
    """(1/pi) times the integral over [0, pi] of ``func(s)``, where
    ``s(k) = sqrt((cos k + 2)^2 - 1)`` is written in factored form."""

    def integrand(k: np.ndarray) -> np.ndarray:
        s = np.sqrt(2.0) * np.cos(k / 2) * np.sqrt(np.cos(k) + 3)
        return func(s)

    return float(graded_gauss_legendre(integrand, 0.0, np.pi, tol=1e-14).value) / np.pi


def d1_band_edge(m1: float) -> float:
    """D1 at the top of the propagative band, omega = 2 sqrt 2."""
    if m1 <= -1:
        raise DomainError("strip mass 1 + m1 must be positive")
    if m1 == 0:
        return float("inf")
    if m1 == TWO_GAP_LIMIT:
        return float("-inf")
    if TWO_GAP_LIMIT < m1 < 0:
        raise DomainError(f"omega = 2 sqrt 2 lies inside the guided band for m1={m1}")
    return 4 * _edge_mean(lambda s: 1.0 / (4 * m1 + s))


def d1(omega: float, m1: float, tol: float = 1e-11) -> float:
    """Scalar localized kernel of the uniform example scaled by omega^2."""
    if m1 <= -1:
        raise DomainError("strip mass 1 + m1 must be positive")
    structure = uniform_gap_structure(m1)
    if abs(omega - BAND_TOP) <= 1e-12:
        if any(abs(a - BAND_TOP) <= 1e-12 for a, _ in structure.gaps.intervals):
            return d1_band_edge(m1)
        raise SpectrumViolation(omega, "guided")
    if structure.gap_index(omega, margin=GUARD) is None:
        raise SpectrumViolation(omega, "propagative or guided")
    return _d1_value(float(omega), m1, tol)


def classify_existence(m1: float, m2: float) -> ExistenceReport:
    """Number of localized modes per gap for the uniform example, without root search."""
    if 1 + m1 <= 0 or 1 + m1 + m2 <= 0:
        raise DomainError("strip and defect masses must be positive")
    gaps = uniform_gap_structure(m1).gaps.intervals

    if m1 < TWO_GAP_LIMIT:
        edge = d1_band_edge(m1)
        threshold = -1 / edge
        return ExistenceReport(
            m1=m1,
            m2=m2,
            case_id=ExistenceCase.TWO_GAP,
            verdicts=[
                GapVerdict(gap="G1", interval=gaps[0], modes=int(0 < m2 < threshold)),
                GapVerdict(gap="G2", interval=gaps[1], modes=int(m2 < 0)),
            ],
            threshold=threshold,
            d1_edge=edge,
        )
    if m1 <= 0:
        return ExistenceReport(
            m1=m1,
            m2=m2,
            case_id=ExistenceCase.ABOVE_GUIDED,
            verdicts=[GapVerdict(gap="G2", interval=gaps[0], modes=int(m2 < 0))],
        )
    edge = d1_band_edge(m1)
    threshold = -1 / edge
    return ExistenceReport(
        m1=m1,
        m2=m2,
        case_id=ExistenceCase.ABOVE_PROPAGATIVE,
        verdicts=[GapVerdict(gap="G", interval=gaps[0], modes=int(m2 < threshold))],
        threshold=threshold,
        d1_edge=edge,
    )


def region_boundary(m_tilde: float) -> float:
    """Largest defect mass with a localized mode in the gap touching 2 sqrt 2.

    Equals ``m_tilde - 1/D1(2 sqrt 2)``, evaluated as ``1 - Q/P`` with both
    moments free of cancellation for large strip masses. On the one-gap
    regime the boundary is the diagonal ``m_tilde``.
    """
    if m_tilde <= 0:
        raise DomainError("strip mass must be positive")
    m1 = m_tilde - 1
    if TWO_GAP_LIMIT <= m1 <= 0:
        return float(m_tilde)
    p = _edge_mean(lambda s: 4 * m1 / (4 * m1 + s))
    q = _edge_mean(lambda s: s / (4 + s / m1))
    return 1 - q / p


def region_map(m_tildes) -> list[dict]:
    rows = []
    for m_tilde in m_tildes:
        m1 = m_tilde - 1
        case = (
            ExistenceCase.TWO_GAP
            if m1 < TWO_GAP_LIMIT
            else ExistenceCase.ABOVE_GUIDED
            if m1 <= 0
            else ExistenceCase.ABOVE_PROPAGATIVE
        )
        rows.append(
            {"m_tilde": float(m_tilde), "m_bar_boundary": region_boundary(m_tilde), "m_bar_diagonal": float(m_tilde), "regime": case.value}
        )
    return rows
