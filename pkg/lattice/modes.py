"""Real-space shapes of guided and localized modes by Fourier synthesis."""

from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress

from .bloch import l_hat_batch, wrap_wavevector
from .env import logfire
from .errors import DegenerateRoot, DomainError, NonConvergence
from .guided import averaged_resolvent_k2, resolvent_average
from .localized import localized_kernel
from .models import LatticeSpec, ModeResult
from .oracle import OracleMode, defect_node, participation_ratio

ROOT_THRESHOLD = 1e-6
SHAPE_TOL = 1e-6
MAX_GRID = 2048
FIT_FLOOR = 1e-12


def null_vector(matrix: np.ndarray) -> np.ndarray:
    """Right singular vector of the smallest singular value of a singular matrix."""
    _, sigma, vh = np.linalg.svd(matrix)
    scale = max(1.0, float(sigma[0]))
    if sigma[-1] > ROOT_THRESHOLD * scale:
        raise DomainError(f"not a root: smallest singular value {sigma[-1]:.3e}")
    if sigma.size > 1 and sigma[-2] <= ROOT_THRESHOLD * scale:
        raise DegenerateRoot(f"null space is not one-dimensional (second singular value {sigma[-2]:.3e})")
    return vh[-1].conj()


def _normalize(shape: np.ndarray) -> np.ndarray:
    flat = np.abs(shape).argmax()
    return shape / shape.flat[flat]


def _periodic_nodes(n: int) -> np.ndarray:
    return -np.pi + 2 * np.pi * np.arange(n) / n


def _stagger(r: np.ndarray) -> np.ndarray:
    # grid starts at -pi, so each lattice step picks up a factor exp(i pi)
    return np.where(r % 2 == 0, 1.0, -1.0)


def _fit_decay(distances: np.ndarray, envelope: np.ndarray) -> tuple[float | None, float | None]:
    keep = envelope > FIT_FLOOR
    if keep.sum() < 3:
        return None, None
    fit = linregress(distances[keep], np.log(envelope[keep]))
    return max(0.0, -float(fit.slope)), float(fit.rvalue**2)


def _refine(synthesize, grid: int, label: str) -> np.ndarray:
    shape = synthesize(grid)
    change = float("inf")
    while grid * 2 <= MAX_GRID:
        grid *= 2
        refined = synthesize(grid)
        change = float(np.abs(refined - shape).max())
        shape = refined
        if change < SHAPE_TOL:
            logfire.info("mode synthesis converged", mode=label, grid=grid, change=change)
            return shape
    raise NonConvergence(f"{label} synthesis did not settle", achieved=change, points=grid)


def reconstruct_localized_mode(
    spec: LatticeSpec, omega_loc: float, window: tuple[int, int] = (21, 21), grid: int = 256
) -> ModeResult:
    """Shape of the localized mode at ``omega_loc`` on a window centred on the defect."""
    if not spec.has_point():
        raise DomainError("no point defect: there is no localized mode to reconstruct")
    n = spec.size
    masses, strip = spec.mass_vector(), spec.strip_vector()
    w2 = omega_loc**2
    kernel = localized_kernel(spec, omega_loc)
    amplitude = null_vector(np.eye(n) + w2 * kernel * spec.point_vector())
    forcing = -w2 * spec.point_vector() * amplitude

    d1, d2 = defect_node(spec)
    hx, hy = (window[0] - 1) // 2, (window[1] - 1) // 2
    gx, gy = np.meshgrid(np.arange(-hx, hx + 1) + d1, np.arange(-hy, hy + 1) + d2, indexing="ij")
    r1, i1 = np.divmod(gx, spec.n1)
    r2, i2 = np.divmod(gy, spec.n2)
    cell_index = i1 * spec.n2 + i2

    def synthesize(q: int) -> np.ndarray:
        nodes = _periodic_nodes(q)
        g = resolvent_average(spec, omega_loc, nodes, tol=1e-12).value
        guided = np.eye(n) + w2 * g * strip
        corrected = forcing[None, :] - w2 * strip[None, :] * np.linalg.solve(guided, (g @ forcing)[..., None])[..., 0]
        k1, k2 = np.meshgrid(nodes, nodes, indexing="ij")
        operator = l_hat_batch(spec, k1, k2) + w2 * np.diag(masses)
        u_hat = np.linalg.solve(operator, np.broadcast_to(corrected[:, None, :, None], (q, q, n, 1)))[..., 0]
        field = np.fft.fft2(u_hat, axes=(0, 1)) / q**2
        values = field[r1 % q, r2 % q, cell_index] * _stagger(r1 + r2)
        return _normalize(values)

    with logfire.span("reconstruct_localized_mode", omega=omega_loc, window=window):
        shape = _refine(synthesize, grid, "localized")

    magnitude = np.abs(shape)
    cx, cy = hx, hy
    dx = np.arange(1, hx + 1)
    dy = np.arange(1, hy + 1)
    along_x = np.maximum(magnitude[cx + dx, :].max(axis=1), magnitude[cx - dx, :].max(axis=1))
    along_y = np.maximum(magnitude[:, cy + dy].max(axis=0), magnitude[:, cy - dy].max(axis=0))
    radius = min(hx, hy)
    ring = np.maximum(np.abs(np.arange(-hx, hx + 1))[:, None], np.abs(np.arange(-hy, hy + 1))[None, :])
    shells = np.array([magnitude[ring == d].max() for d in range(1, radius + 1)])
    decay_x, _ = _fit_decay(dx.astype(float), along_x)
    decay_y, _ = _fit_decay(dy.astype(float), along_y)
    _, r2_fit = _fit_decay(np.arange(1, radius + 1, dtype=float), shells)
    return ModeResult(
        omega=omega_loc,
        shape=shape,
        origin=(cx, cy),
        decay_rate_x=decay_x,
        decay_rate_y=decay_y,
        decay_fit_r2=r2_fit,
        participation_ratio=participation_ratio(shape),
    )


def reconstruct_guided_mode(
    spec: LatticeSpec, k1: float, omega_g: float, window: tuple[int, int] = (21, 21), grid: int = 256
) -> ModeResult:
    """Shape of the guided wave at ``(k1, omega_g)``.

    Columns ``x = 0 .. window[0]-1`` run along the strip; rows are centred on
    the strip row. One period along e1 multiplies the field by ``exp(-i k1)``.
    """
    if not spec.has_strip():
        raise DomainError("no line defect: there is no guided mode to reconstruct")
    k1 = wrap_wavevector((k1, 0.0))[0]
    n = spec.size
    masses, strip = spec.mass_vector(), spec.strip_vector()
    w2 = omega_g**2
    resolvent = averaged_resolvent_k2(spec, omega_g, k1, tol=1e-12)
    amplitude = null_vector(np.eye(n) + w2 * resolvent.matrix * strip)
    forcing = -w2 * strip * amplitude

    row = int(np.argmax(np.abs(strip))) % spec.n2
    hy = (window[1] - 1) // 2
    gx, gy = np.meshgrid(np.arange(window[0]), np.arange(-hy, hy + 1) + row, indexing="ij")
    r1, i1 = np.divmod(gx, spec.n1)
    r2, i2 = np.divmod(gy, spec.n2)
    cell_index = i1 * spec.n2 + i2
    phase = np.exp(-1j * k1 * r1)

    def synthesize(q: int) -> np.ndarray:
        nodes = _periodic_nodes(q)
        operator = l_hat_batch(spec, k1, nodes) + w2 * np.diag(masses)
        v_hat = np.linalg.solve(operator, np.broadcast_to(forcing[None, :, None], (q, n, 1)))[..., 0]
        profile = np.fft.fft(v_hat, axis=0) / q
        return _normalize(phase * profile[r2 % q, cell_index] * _stagger(r2))

    with logfire.span("reconstruct_guided_mode", k1=k1, omega=omega_g):
        shape = _refine(synthesize, grid, "guided")

    magnitude = np.abs(shape)
    dy = np.arange(1, hy + 1)
    across = np.maximum(magnitude[:, hy + dy].max(axis=0), magnitude[:, hy - dy].max(axis=0))
    decay_y, r2_fit = _fit_decay(dy.astype(float), across)
    return ModeResult(
        omega=omega_g,
        shape=shape,
        origin=(0, hy),
        decay_rate_x=0.0,
        decay_rate_y=decay_y,
        decay_fit_r2=r2_fit,
        participation_ratio=participation_ratio(shape),
        k1=k1,
    )


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    return float(abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)))


@dataclass
class OracleAgreement:
    oracle_omega: float
    root_omega: float
    shape_similarity: float

    @property
    def frequency_error(self) -> float:
        return abs(self.oracle_omega - self.root_omega)


def oracle_agreement(
    spec: LatticeSpec,
    modes: list[OracleMode],
    roots: list[float],
    window: tuple[int, int] = (21, 21),
    grid: int = 256,
) -> list[OracleAgreement]:
    """Pair every localized finite-lattice candidate with the nearest root and
    compare shapes on a window centred on the defect."""
    agreements = []
    for mode in modes:
        if not mode.is_candidate or not roots:
            continue
        root = min(roots, key=lambda r: abs(r - mode.omega))
        reconstructed = reconstruct_localized_mode(spec, root, window=window, grid=grid)
        x0 = mode.origin[0] - reconstructed.origin[0]
        y0 = mode.origin[1] - reconstructed.origin[1]
        box = mode.shape[x0 : x0 + window[0], y0 : y0 + window[1]]
        agreements.append(
            OracleAgreement(
                oracle_omega=mode.omega,
                root_omega=root,
                shape_similarity=cosine_similarity(box.ravel(), reconstructed.shape.ravel()),
            )
        )
    return agreements
