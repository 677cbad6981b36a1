import numpy as np
import pytest

from lattice.errors import DomainError, SpectrumViolation
from lattice.guided import (
    averaged_resolvent_k2,
    guided_closed_form,
    guided_det,
    guided_projection,
    guided_spectrum,
    resolvent_average,
    scan_guided,
    uniform_averaged_resolvent,
    uniform_guided_projection,
)
from lattice.models import IntervalSet, LatticeSpec

PANEL_STRIPS = [-0.9, -0.5, 0.5, 2.0]


def _off_band_samples(count: int, seed: int = 5):
    """Random (omega, k1) pairs at least 0.05 away from I_p(k1)."""
    rng = np.random.default_rng(seed)
    samples = []
    while len(samples) < count:
        k1 = rng.uniform(-np.pi, np.pi)
        c = np.cos(k1)
        lower, upper = np.sqrt(2 - 2 * c), np.sqrt(6 - 2 * c)
        if rng.random() < 0.5 and lower > 0.1:
            omega = rng.uniform(0.02, lower - 0.05)
        else:
            omega = rng.uniform(upper + 0.05, 6.0)
        samples.append((omega, k1))
    return np.array(samples)


def test_averaged_resolvent_matches_closed_form():
    """The k2 mean of the scalar resolvent has a closed form off the band."""
    spec = LatticeSpec.uniform()
    samples = _off_band_samples(200)
    numeric = resolvent_average(spec, samples[:, 0], samples[:, 1], tol=1e-12).value[:, 0, 0]
    exact = [uniform_averaged_resolvent(w, k) for w, k in samples]
    np.testing.assert_allclose(numeric.real, exact, atol=1e-8)
    np.testing.assert_allclose(numeric.imag, 0.0, atol=1e-12)


def test_averaged_resolvent_sign_follows_band_side():
    spec = LatticeSpec.uniform()
    below = averaged_resolvent_k2(spec, 1.0, np.pi)
    above = averaged_resolvent_k2(spec, 3.5, np.pi)
    assert below.matrix[0, 0].real < 0
    assert above.matrix[0, 0].real > 0
    assert below.quad_error < 1e-8


def test_averaged_resolvent_is_hermitian_for_supercells():
    spec = LatticeSpec(n1=2, n2=2, masses=((1.0, 2.0), (0.5, 1.5)), strip_perturbation=0.3)
    result = averaged_resolvent_k2(spec, 5.0, 0.8, tol=1e-12)
    np.testing.assert_allclose(result.matrix, result.matrix.conj().T, atol=1e-10)


def test_averaged_resolvent_rejects_band_frequencies():
    with pytest.raises(SpectrumViolation) as exc_info:
        averaged_resolvent_k2(LatticeSpec.uniform(), 1.0, 0.0)
    assert exc_info.value.band == "propagative"


def test_averaged_resolvent_wraps_k1():
    spec = LatticeSpec.uniform()
    wrapped = averaged_resolvent_k2(spec, 3.5, 2 * np.pi + 0.4)
    direct = averaged_resolvent_k2(spec, 3.5, 0.4)
    assert wrapped.k1 == pytest.approx(0.4)
    np.testing.assert_allclose(wrapped.matrix, direct.matrix, atol=1e-14)


@pytest.mark.parametrize("m1", PANEL_STRIPS)
def test_guided_roots_match_closed_form(m1):
    spec = LatticeSpec.uniform(m1)
    k1s = np.linspace(0.0, np.pi, 33)
    if m1 > 0:
        # the branch meets the zero-frequency band edge at k1 = 0
        k1s = k1s[1:]
    for k1 in k1s:
        roots = guided_spectrum(spec, k1)
        assert roots == pytest.approx([guided_closed_form(m1, k1)], abs=1e-8)


def test_guided_roots_stay_off_the_band():
    spec = LatticeSpec.uniform(-0.5)
    scan = scan_guided(spec, 1.2)
    assert len(scan.roots) == 1
    assert scan.rejected == []
    assert abs(guided_det(spec, scan.roots[0], 1.2).value) <= 1e-8


def test_guided_root_for_heavy_strip_at_zone_edge():
    roots = guided_spectrum(LatticeSpec.uniform(2.0), np.pi)
    assert roots[0] ** 2 == pytest.approx((-6 + 2 * np.sqrt(33)) / 3, abs=1e-8)


def test_guided_root_for_light_strip_at_zone_centre():
    roots = guided_spectrum(LatticeSpec.uniform(-0.9), 0.0)
    assert roots[0] ** 2 == pytest.approx(4 / 0.19, abs=1e-7)


def test_no_strip_means_unit_determinant_and_no_roots():
    spec = LatticeSpec.uniform()
    assert guided_det(spec, 3.5, 0.4).value == 1.0
    assert guided_spectrum(spec, 0.4) == []
    assert guided_projection(spec).is_empty()


def test_search_overlapping_band_is_rejected():
    with pytest.raises(DomainError, match="overlaps"):
        scan_guided(LatticeSpec.uniform(2.0), np.pi, search=IntervalSet.of((1.0, 3.0)))


def test_explicit_search_interval():
    spec = LatticeSpec.uniform(-0.9)
    roots = guided_spectrum(spec, 0.0, search=IntervalSet.of((3.0, 6.0)))
    assert roots == pytest.approx([guided_closed_form(-0.9, 0.0)], abs=1e-8)


@pytest.mark.parametrize("m1", [-0.9, -0.5, 0.5, 2.0])
def test_guided_projection_matches_printed_edges(m1):
    numeric = guided_projection(LatticeSpec.uniform(m1))
    exact = uniform_guided_projection(m1)
    assert len(numeric.intervals) == 1
    np.testing.assert_allclose(numeric.intervals[0], exact.intervals[0], atol=1e-8)


def test_guided_projection_ignores_point_defect():
    strip = guided_projection(LatticeSpec.uniform(-0.9))
    both = guided_projection(LatticeSpec.uniform(-0.9, 0.1))
    assert both == strip


def test_closed_form_edge_values():
    assert guided_closed_form(2.0, np.pi) ** 2 == pytest.approx((-6 + 2 * np.sqrt(33)) / 3)
    assert guided_closed_form(-0.9, 0.0) ** 2 == pytest.approx(4 / 0.19)
    assert guided_closed_form(1e-9, np.pi) == pytest.approx(2.0, abs=1e-6)
    assert guided_closed_form(0.0, 1.0) == pytest.approx(np.sqrt(2 - 2 * np.cos(1.0)))


def test_closed_form_at_unit_strip_increment():
    """The printed fraction is 0/0 at m1 = 1; the finite limit is used."""
    for k1 in (0.3, 1.5, np.pi):
        c = np.cos(k1)
        assert guided_closed_form(1.0, k1) ** 2 == pytest.approx(((c - 2) ** 2 - 1) / (2 - c))
    assert uniform_guided_projection(1.0).upper == pytest.approx(np.sqrt(8 / 3))


def test_uniform_guided_projection_regimes():
    light = uniform_guided_projection(-0.9)
    assert light.intervals[0] == pytest.approx(
        (2 / np.sqrt(0.19), np.sqrt(6 + 2 * np.sqrt(8 * 0.81 + 1)) / np.sqrt(0.19))
    )
    assert uniform_guided_projection(0.0).is_empty()
    assert uniform_guided_projection(2.0).intervals[0] == pytest.approx(
        (0.0, np.sqrt((-6 + 2 * np.sqrt(33)) / 3))
    )


def test_closed_forms_reject_nonpositive_strip_mass():
    with pytest.raises(DomainError):
        guided_closed_form(-1.0, 0.0)
    with pytest.raises(DomainError):
        uniform_guided_projection(-1.5)
