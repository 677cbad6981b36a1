"""Bloch reduction of the lattice operator to cell-sized matrices."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .models import LatticeSpec

BZ_SLACK = 1e-12


@dataclass(frozen=True)
class BlochOperators:
    k: tuple[float, float]
    l_hat: np.ndarray
    m_hat: np.ndarray
    m1_hat: np.ndarray
    m2_hat: np.ndarray


@lru_cache(maxsize=64)
def link_table(spec: LatticeSpec) -> tuple[np.ndarray, ...]:
    """Source index, target index and offsets of every link as arrays."""
    links = spec.links()
    source = np.array([spec.node_index(*link.source) for link in links])
    target = np.array([spec.node_index(*link.target) for link in links])
    s1 = np.array([link.offset[0] for link in links], dtype=float)
    s2 = np.array([link.offset[1] for link in links], dtype=float)
    return source, target, s1, s2


def l_hat_batch(spec: LatticeSpec, k1, k2) -> np.ndarray:
    """Bloch operator at broadcast wavevectors, shape ``(..., N, N)``.

    A link into cell ``s`` contributes ``exp(-i s.k)`` at (source, target) and
    its conjugate at (target, source). No Brillouin-zone check is made.
    """
    k1, k2 = np.broadcast_arrays(np.asarray(k1, dtype=float), np.asarray(k2, dtype=float))
    n = spec.size
    out = np.zeros(k1.shape + (n, n), dtype=complex)
    source, target, s1, s2 = link_table(spec)
    for a, b, o1, o2 in zip(source, target, s1, s2, strict=True):
        if o1 == 0 and o2 == 0:
            out[..., a, b] += 1.0
            out[..., b, a] += 1.0
            continue
        phase = np.exp(-1j * (o1 * k1 + o2 * k2))
        out[..., a, b] += phase
        out[..., b, a] += phase.conj()
    idx = np.arange(n)
    out[..., idx, idx] -= 4.0
    return out


def wrap_wavevector(k: tuple[float, float]) -> tuple[float, float]:
    """Map a wavevector into [-pi, pi)^2."""
    return tuple(float((c + np.pi) % (2 * np.pi) - np.pi) for c in k)


def assemble_bloch(spec: LatticeSpec, k: tuple[float, float]) -> BlochOperators:
    k1, k2 = (float(c) for c in k)
    if max(abs(k1), abs(k2)) > np.pi + BZ_SLACK:
        raise DomainError(f"wavevector {k} lies outside [-pi, pi]^2; wrap it first")
    return BlochOperators(
        k=(k1, k2),
        l_hat=l_hat_batch(spec, k1, k2),
        m_hat=np.diag(spec.mass_vector()),
        m1_hat=np.diag(spec.strip_vector()),
        m2_hat=np.diag(spec.point_vector()),
    )


def hermitian_check(ops: BlochOperators) -> float:
    """Largest entrywise deviation of ``l_hat`` from its conjugate transpose."""
    return float(np.max(np.abs(ops.l_hat - ops.l_hat.conj().T)))
