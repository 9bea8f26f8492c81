import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diracwalk.lattice import (
    ChargeGrid,
    LatticeError,
    ShapeMismatchError,
    TwoField,
    delta_init_four,
    delta_init_two,
    make_lattice,
    merge,
)


def small_spec(a=1.0, n_steps=10):
    return make_lattice(dz=0.1, dt=0.1, c=1.0, a=a, z_extent=2.0, n_steps=n_steps)


def test_flip_probability_is_rate_times_dt():
    spec = small_spec(a=1.0)
    assert spec.p == pytest.approx(0.1)


def test_cfl_violation_rejected():
    with pytest.raises(LatticeError, match="CFL"):
        make_lattice(dz=0.1, dt=0.2, c=1.0, a=1.0, z_extent=2.0, n_steps=5)


def test_flip_probability_at_least_one_rejected():
    with pytest.raises(LatticeError, match="p ="):
        make_lattice(dz=0.1, dt=0.1, c=1.0, a=11.0, z_extent=2.0, n_steps=5)


def test_narrow_grid_rejected_unless_opted_out():
    with pytest.raises(LatticeError, match="narrow"):
        make_lattice(dz=0.1, dt=0.1, c=1.0, a=1.0, z_extent=0.5, n_steps=50)
    spec = make_lattice(dz=0.1, dt=0.1, c=1.0, a=1.0, z_extent=0.5, n_steps=50,
                        enforce_light_cone=False)
    assert spec.n_steps == 50


def test_zero_scattering_rate_allowed():
    assert small_spec(a=0.0).p == 0.0


def test_non_integral_extent_rejected():
    with pytest.raises(LatticeError, match="multiple"):
        make_lattice(dz=0.1, dt=0.1, c=1.0, a=1.0, z_extent=1.05, n_steps=5)


@given(st.integers(min_value=0, max_value=40))
def test_site_coordinate_round_trip(site):
    spec = small_spec()
    assert spec.site_of(spec.z_of(site)) == site


def test_delta_init_two_places_unit_mass():
    spec = small_spec()
    f = delta_init_two(spec, spec.origin_index, +1)
    assert f.f_plus[spec.origin_index] == 1.0
    assert f.f_plus.sum() == 1.0 and f.f_minus.sum() == 0.0
    g = delta_init_two(spec, spec.origin_index, -1)
    assert g.f_minus[spec.origin_index] == 1.0 and g.f_plus.sum() == 0.0


def test_delta_init_out_of_range_rejected():
    spec = small_spec()
    with pytest.raises(LatticeError):
        delta_init_two(spec, spec.n_sites, +1)
    with pytest.raises(LatticeError):
        delta_init_four(spec, -1, 1)


def test_fields_reject_non_finite_values():
    with pytest.raises(ValueError, match="finite"):
        TwoField(f_plus=np.array([np.nan, 0.0]), f_minus=np.zeros(2))


def test_fields_reject_mismatched_components():
    with pytest.raises(ShapeMismatchError):
        TwoField(f_plus=np.zeros(3), f_minus=np.zeros(4))


@st.composite
def grids(draw, shape=(4, 5, 3)):
    counts = draw(
        st.lists(
            st.integers(min_value=-50, max_value=50),
            min_size=int(np.prod(shape)),
            max_size=int(np.prod(shape)),
        )
    )
    n_pairs = draw(st.integers(min_value=0, max_value=100))
    return ChargeGrid(np.array(counts).reshape(shape), n_pairs=n_pairs)


@given(grids(), grids(), grids())
@settings(max_examples=50)
def test_merge_associative_and_commutative(g1, g2, g3):
    left = merge(merge(g1, g2), g3)
    right = merge(g1, merge(g2, g3))
    assert np.array_equal(left.counts, right.counts)
    assert left.n_pairs == right.n_pairs
    ab, ba = merge(g1, g2), merge(g2, g1)
    assert np.array_equal(ab.counts, ba.counts)


def test_merge_identity_and_linearity():
    empty = ChargeGrid(np.zeros((4, 5, 3), dtype=np.int64))
    g = ChargeGrid(np.arange(60).reshape(4, 5, 3), n_pairs=7)
    assert np.array_equal(merge(empty, empty).counts, empty.counts)
    assert np.array_equal(merge(g, empty).counts, g.counts)
    both = merge(g, g)
    assert np.array_equal(both.counts, 2 * g.counts)
    assert both.n_pairs == 14


def test_merge_shape_mismatch_rejected():
    g1 = ChargeGrid(np.zeros((4, 5, 3), dtype=np.int64))
    g2 = ChargeGrid(np.zeros((4, 6, 3), dtype=np.int64))
    with pytest.raises(ShapeMismatchError):
        merge(g1, g2)
