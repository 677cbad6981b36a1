import numpy as np
import pytest
from pydantic import ValidationError

from lattice.models import (
    DispersionPoint,
    DispersionTable,
    ExistenceCase,
    ExistenceReport,
    GapStructure,
    GapVerdict,
    IntervalSet,
    LatticeSpec,
    Link,
    square_links,
)
from lattice.propagative import propagative_projection_full


@pytest.fixture
def supercell():
    return LatticeSpec(
        n1=2,
        n2=1,
        masses=((1.0,), (1.5,)),
        strip_perturbation=((0.5,), (0.5,)),
        point_perturbation=((-0.3,), (0.0,)),
    )


def test_link_rejects_self_link():
    """A link from a node to itself in the same cell is meaningless."""
    with pytest.raises(ValidationError, match="self-link"):
        Link(source=(0, 0), target=(0, 0))


def test_link_rejects_long_offsets():
    with pytest.raises(ValidationError, match="offsets"):
        Link(source=(0, 0), target=(0, 0), offset=(2, 0))


def test_square_links_for_single_node_wrap_both_directions():
    links = square_links(1, 1)
    assert [link.offset for link in links] == [(1, 0), (0, 1)]


def test_empty_adjacency_is_rejected():
    with pytest.raises(ValidationError, match="adjacency has no links"):
        LatticeSpec(adjacency=())


def test_nonpositive_masses_are_rejected():
    with pytest.raises(ValidationError, match="masses must be positive"):
        LatticeSpec(masses=-1.0)
    with pytest.raises(ValidationError, match="strip_perturbation"):
        LatticeSpec(strip_perturbation=-1.0)
    with pytest.raises(ValidationError, match="point_perturbation"):
        LatticeSpec(strip_perturbation=-0.5, point_perturbation=-0.5)


def test_table_shape_must_match_cell():
    with pytest.raises(ValidationError, match="2 x 1 table"):
        LatticeSpec(n1=2, n2=1, masses=((1.0, 1.0),))


def test_strip_direction_other_than_e1_is_rejected():
    with pytest.raises(ValidationError, match="runs along e1"):
        LatticeSpec(strip_direction="e2")


def test_links_outside_cell_are_rejected():
    with pytest.raises(ValidationError, match="outside the cell"):
        LatticeSpec(adjacency=(Link(source=(0, 0), target=(1, 0)),))


def test_isolated_nodes_are_rejected():
    links = (
        Link(source=(0, 0), target=(0, 0), offset=(1, 0)),
        Link(source=(0, 0), target=(0, 0), offset=(0, 1)),
    )
    with pytest.raises(ValidationError, match="at least one link"):
        LatticeSpec(n1=2, n2=1, adjacency=links)


def test_node_vectors_are_row_major(supercell):
    assert supercell.node_index(1, 0) == 1
    np.testing.assert_array_equal(supercell.mass_vector(), [1.0, 1.5])
    np.testing.assert_array_equal(supercell.point_vector(), [-0.3, 0.0])
    assert supercell.has_strip() and supercell.has_point()
    assert not supercell.without_point_defect().has_point()


def test_degrees_of_square_cells():
    np.testing.assert_array_equal(LatticeSpec.uniform().degrees(), [4])
    np.testing.assert_array_equal(LatticeSpec(n1=3, n2=2).degrees(), [4] * 6)


def test_frequency_bound_uses_lightest_mass():
    assert LatticeSpec.uniform().frequency_bound() == pytest.approx(np.sqrt(8))
    spec = LatticeSpec.uniform(2.0, -2.6)
    assert spec.frequency_bound() == pytest.approx(np.sqrt(8 / 0.4))
    assert spec.frequency_bound(include_point=False) == pytest.approx(np.sqrt(8))
    assert LatticeSpec.uniform(-0.9).frequency_bound() == pytest.approx(np.sqrt(80))


@pytest.mark.parametrize(
    "spec",
    [
        LatticeSpec.uniform(2.0),
        LatticeSpec.uniform(0.5, 1.0),
        LatticeSpec(n1=2, n2=1, masses=((1.0,), (1.5,)), strip_perturbation=3.0),
        LatticeSpec(n1=2, n2=2, masses=((1.0, 2.5), (0.7, 1.3)), strip_perturbation=((4.0, 1.0), (2.0, 0.5))),
    ],
)
def test_frequency_bound_covers_the_background_band(spec):
    background = propagative_projection_full(spec.without_point_defect())
    assert spec.frequency_bound(include_point=False) >= background.upper


def test_spec_hash_is_stable_and_discriminating():
    assert LatticeSpec.uniform(-0.9, 0.1).spec_hash() == LatticeSpec.uniform(-0.9, 0.1).spec_hash()
    assert LatticeSpec.uniform(-0.9, 0.1).spec_hash() != LatticeSpec.uniform(-0.9, 0.2).spec_hash()


def test_specs_are_hashable_cache_keys():
    assert len({LatticeSpec.uniform(2.0), LatticeSpec.uniform(2.0)}) == 1


def test_interval_set_merges_and_sorts():
    intervals = IntervalSet.of((3.0, 4.0), (0.0, 1.0), (0.5, 2.0))
    assert intervals.intervals == ((0.0, 2.0), (3.0, 4.0))
    assert intervals.lower == 0.0 and intervals.upper == 4.0
    assert intervals.edges() == [0.0, 2.0, 3.0, 4.0]


def test_interval_set_rejects_reversed_interval():
    with pytest.raises(ValidationError):
        IntervalSet.of((2.0, 1.0))


def test_interval_set_complement_drops_zero_width_pieces():
    bands = IntervalSet.of((0.0, np.sqrt(8)), (np.sqrt(8), 5.0))
    assert bands.complement(0.0, 10.0).intervals == ((5.0, 10.0),)
    gaps = IntervalSet.of((0.0, 2.0), (3.0, 4.0)).complement(0.0, 5.0)
    assert gaps.intervals == ((2.0, 3.0), (4.0, 5.0))


def test_interval_set_membership_and_distance():
    bands = IntervalSet.of((0.0, 2.0), (3.0, 4.0))
    assert bands.contains(2.0) and not bands.contains(2.5)
    assert bands.contains(2.05, margin=0.1)
    assert bands.distance(2.5) == pytest.approx(0.5)
    assert bands.distance(1.0) == 0.0
    assert IntervalSet().distance(1.0) == float("inf")


def test_gap_index_treats_tail_end_as_closed():
    structure = GapStructure(
        i_p=IntervalSet.of((0.0, 2.0)),
        i_g=IntervalSet(),
        gaps=IntervalSet.of((2.0, 5.0)),
        tail_gap=True,
        omega_max=5.0,
    )
    assert structure.is_tail(0)
    assert structure.gap_index(5.0) == 0
    assert structure.gap_index(2.0) is None
    assert structure.gap_index(5.1) is None


def test_dispersion_table_requires_sorted_branches():
    with pytest.raises(ValidationError, match="sorted"):
        DispersionTable(
            grid=64,
            spec_hash="x",
            branch_count=2,
            points=[DispersionPoint(k1=0.0, k2=0.0, omegas=(2.0, 1.0))],
        )


def test_existence_report_helpers():
    report = ExistenceReport(
        m1=-0.9,
        m2=0.1,
        case_id=ExistenceCase.TWO_GAP,
        verdicts=[
            GapVerdict(gap="G1", interval=(2.8, 4.5), modes=1),
            GapVerdict(gap="G2", interval=(7.7, float("inf")), modes=0),
        ],
    )
    assert report.total_modes == 1
    assert report.modes_in("G1") == 1
    assert report.occupied_gap() == "G1"
