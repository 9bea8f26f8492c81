import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diracwalk.kac import (
    evolve_kac,
    kac_density_estimate,
    sample_kac_path,
    step_kac,
)
from diracwalk.lattice import TwoField, delta_init_two, make_lattice
from diracwalk.streams import path_stream

from oracles import enumerate_kac


def spec_with(p, n_steps=12, extent=16.0):
    # dz = dt = 1, c = 1, so a = p directly.
    return make_lattice(dz=1.0, dt=1.0, c=1.0, a=p, z_extent=extent,
                        n_steps=n_steps)


def test_pure_streaming_moves_delta_one_site():
    spec = spec_with(0.0)
    f = delta_init_two(spec, spec.origin_index, +1)
    g = step_kac(f, spec)
    assert g.f_plus[spec.origin_index + 1] == 1.0
    assert g.f_plus.sum() == 1.0 and g.f_minus.sum() == 0.0


def test_single_step_splits_mass_by_flip_probability():
    spec = spec_with(0.1)
    f = delta_init_two(spec, spec.origin_index, +1)
    g = step_kac(f, spec)
    assert g.f_plus[spec.origin_index + 1] == pytest.approx(0.9)
    assert g.f_minus[spec.origin_index] == pytest.approx(0.1)
    assert g.total_mass() == pytest.approx(1.0, abs=1e-12)


@given(
    st.lists(st.floats(min_value=0.0, max_value=10.0), min_size=33, max_size=33),
    st.lists(st.floats(min_value=0.0, max_value=10.0), min_size=33, max_size=33),
    st.floats(min_value=0.0, max_value=0.95),
)
@settings(max_examples=40)
def test_mass_conserved_and_positivity_preserved(fp, fm, p):
    spec = make_lattice(dz=1.0, dt=1.0, c=1.0, a=p, z_extent=16.0, n_steps=4)
    f = TwoField(f_plus=np.array(fp), f_minus=np.array(fm))
    g = f
    for _ in range(4):
        g = step_kac(g, spec)
    assert g.total_mass() == pytest.approx(f.total_mass(), rel=1e-12)
    assert (g.f_plus >= 0).all() and (g.f_minus >= 0).all()


def test_evolve_zero_steps_returns_initial_only():
    spec = spec_with(0.3)
    f = delta_init_two(spec, spec.origin_index, +1)
    assert evolve_kac(f, spec, 0) == [f]


def test_evolve_pure_streaming_translates_delta():
    spec = spec_with(0.0)
    f = delta_init_two(spec, spec.origin_index, +1)
    history = evolve_kac(f, spec, 5)
    assert history[5].f_plus[spec.origin_index + 5] == 1.0
    assert history[5].f_plus.sum() == 1.0


def test_evolve_beyond_horizon_rejected():
    spec = spec_with(0.1, n_steps=4)
    f = delta_init_two(spec, spec.origin_index, +1)
    with pytest.raises(ValueError, match="light cone"):
        evolve_kac(f, spec, 5)


@pytest.mark.parametrize("p", [0.1, 0.25, 0.5])
def test_evolution_matches_exhaustive_enumeration(p):
    spec = spec_with(p, n_steps=8, extent=10.0)
    f = delta_init_two(spec, spec.origin_index, +1)
    history = evolve_kac(f, spec, 8)
    exact = enumerate_kac(spec, 8, spec.origin_index, +1)
    for k, frame in enumerate(history):
        np.testing.assert_allclose(frame.f_plus, exact[0, :, k], atol=1e-12)
        np.testing.assert_allclose(frame.f_minus, exact[1, :, k], atol=1e-12)


def test_path_with_zero_flip_probability_is_straight():
    spec = spec_with(0.0)
    path = sample_kac_path(123, spec, 10)
    assert path.flip_events.size == 0
    assert np.array_equal(path.positions(),
                          spec.origin_index + np.arange(11))


def test_path_sampling_is_deterministic_per_seed():
    spec = spec_with(0.3)
    a = sample_kac_path(42, spec, 12)
    b = sample_kac_path(42, spec, 12)
    assert np.array_equal(a.headings, b.headings)
    assert np.array_equal(a.flip_events, b.flip_events)
    c = sample_kac_path(path_stream(42, 1), spec, 12)
    assert not np.array_equal(a.headings, c.headings)


def test_flip_counts_match_binomial_statistics():
    n, p, n_samples = 100, 0.3, 10_000
    spec = make_lattice(dz=1.0, dt=1.0, c=1.0, a=p, z_extent=128.0, n_steps=n)
    flips = np.array([
        sample_kac_path(path_stream(7, i), spec, n).flip_events.size
        for i in range(n_samples)
    ])
    sigma = np.sqrt(n * p * (1 - p))
    assert abs(flips.mean() - n * p) < 3 * sigma / np.sqrt(n_samples)


def test_single_straight_path_density_is_indicator():
    spec = spec_with(0.0, n_steps=6, extent=8.0)
    history = kac_density_estimate(5, 1, spec, 6)
    for k, frame in enumerate(history):
        assert frame.f_plus[spec.origin_index + k] == 1.0
        assert frame.total_mass() == 1.0


def test_density_estimate_slices_are_normalized():
    spec = spec_with(0.2, n_steps=10, extent=12.0)
    history = kac_density_estimate(11, 3000, spec, 10)
    for frame in history:
        assert frame.total_mass() == pytest.approx(1.0, abs=1e-12)


def test_density_estimate_converges_to_exact_evolution():
    n_paths, p, n = 20_000, 0.1, 12
    spec = spec_with(p, n_steps=n, extent=16.0)
    est = kac_density_estimate(3, n_paths, spec, n)
    exact = evolve_kac(delta_init_two(spec, spec.origin_index, +1), spec, n)
    bound = 5.0 / np.sqrt(n_paths)
    for emp, ref in zip(est, exact):
        assert np.abs(emp.stack() - ref.stack()).max() < bound
