import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diracwalk.dirac import (
    SIGMA_Q,
    SIGMA_Y,
    SIGMA_Z,
    DiracAlgebra,
    EvolutionMode,
    dirac_propagator,
    evolve_dirac,
    step_entwined,
)
from diracwalk.lattice import FourField, delta_init_four, make_lattice

from oracles import signed_path_sum


def spec_with(p, n_steps=12, extent=16.0):
    return make_lattice(dz=1.0, dt=1.0, c=1.0, a=p, z_extent=extent,
                        n_steps=n_steps)


def test_sigma_q_squares_to_minus_identity():
    assert np.array_equal(SIGMA_Q @ SIGMA_Q, -np.eye(2, dtype=np.int64))


def test_sigma_q_is_real_form_of_i_sigma_y():
    assert np.array_equal(SIGMA_Q, np.real(1j * SIGMA_Y).astype(np.int64))


def test_alpha_z_and_beta_square_to_identity():
    alg = DiracAlgebra()
    assert np.array_equal(alg.alpha_z @ alg.alpha_z, np.eye(4))
    assert np.allclose(alg.beta @ alg.beta, np.eye(4))


def test_alpha_z_beta_block_structure():
    alg = DiracAlgebra()
    assert np.array_equal(alg.alpha_z[:2, :2], -SIGMA_Z)
    assert np.array_equal(alg.alpha_z[2:, 2:], SIGMA_Z)
    assert np.array_equal(alg.alpha_z[:2, 2:], np.zeros((2, 2)))
    assert np.array_equal(alg.beta[:2, :2], SIGMA_Y)
    assert np.array_equal(alg.beta[2:, 2:], SIGMA_Y)


def test_pure_streaming_moves_channel_one_right():
    spec = spec_with(0.0)
    f = delta_init_four(spec, spec.origin_index, 1)
    g = step_entwined(f, spec)
    assert g.phi1[spec.origin_index + 1] == 1.0
    assert g.stack().sum() == 1.0


def test_step_from_channel_one_delta():
    spec = spec_with(0.1)
    g = step_entwined(delta_init_four(spec, spec.origin_index, 1), spec)
    assert g.phi1[spec.origin_index + 1] == pytest.approx(0.9)
    assert g.phi2[spec.origin_index - 1] == pytest.approx(0.1)
    assert np.count_nonzero(g.stack()) == 2


def test_step_from_channel_two_delta_carries_minus_sign():
    spec = spec_with(0.1)
    g = step_entwined(delta_init_four(spec, spec.origin_index, 2), spec)
    assert g.phi2[spec.origin_index - 1] == pytest.approx(0.9)
    assert g.phi1[spec.origin_index + 1] == pytest.approx(-0.1)


@given(
    st.floats(min_value=-3.0, max_value=3.0),
    st.floats(min_value=-3.0, max_value=3.0),
    st.integers(min_value=0, max_value=11),
)
@settings(max_examples=30)
def test_step_is_linear(alpha, beta, seed):
    spec = spec_with(0.3, n_steps=4, extent=8.0)
    rng = np.random.default_rng(seed)
    u = FourField(*rng.normal(size=(4, spec.n_sites)))
    v = FourField(*rng.normal(size=(4, spec.n_sites)))
    combo = FourField.from_stack(alpha * u.stack() + beta * v.stack())
    lhs = step_entwined(combo, spec).stack()
    rhs = alpha * step_entwined(u, spec).stack() + beta * step_entwined(v, spec).stack()
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_blocks_never_mix():
    spec = spec_with(0.4, n_steps=8, extent=10.0)
    rng = np.random.default_rng(0)
    f = FourField(rng.normal(size=spec.n_sites), rng.normal(size=spec.n_sites),
                  np.zeros(spec.n_sites), np.zeros(spec.n_sites))
    evo = evolve_dirac(f, spec, 8)
    for frame in evo.slices:
        assert np.all(frame.phi3 == 0) and np.all(frame.phi4 == 0)


def test_renormalized_mode_rescales_raw_slices():
    spec = spec_with(0.25, n_steps=6, extent=8.0)
    init = delta_init_four(spec, spec.origin_index, 1)
    raw = evolve_dirac(init, spec, 6, EvolutionMode.RAW)
    ren = evolve_dirac(init, spec, 6, EvolutionMode.RENORMALIZED)
    for k in range(7):
        np.testing.assert_allclose(
            ren[k].stack(), raw[k].stack() * (1 - spec.p) ** (-k), atol=1e-12
        )


def test_renormalization_overflow_guarded():
    spec = make_lattice(dz=1.0, dt=1.0, c=1.0, a=0.999, z_extent=2048.0,
                        n_steps=2048)
    init = delta_init_four(spec, spec.origin_index, 1)
    with pytest.raises(OverflowError):
        evolve_dirac(init, spec, 2048, EvolutionMode.RENORMALIZED)


@pytest.mark.parametrize("p", [0.1, 0.25])
@pytest.mark.parametrize("source", [1, 2])
def test_evolution_matches_signed_path_sum(p, source):
    spec = spec_with(p, n_steps=10, extent=12.0)
    evo = evolve_dirac(delta_init_four(spec, spec.origin_index, source), spec, 10)
    for k in (1, 2, 3, 7, 10):
        exact = signed_path_sum(spec, k, source, spec.origin_index)
        np.testing.assert_allclose(evo[k].stack(), exact, atol=1e-12)


def test_propagator_free_case_marches_along_light_cone():
    spec = spec_with(0.0, n_steps=10, extent=12.0)
    evo = dirac_propagator(spec, 10, source_state=1)
    for k, frame in enumerate(evo.slices):
        assert frame.phi1[spec.origin_index + k] == 1.0
        assert frame.stack().sum() == 1.0


def test_source_three_equals_source_one_with_shifted_channels():
    spec = spec_with(0.2, n_steps=8, extent=10.0)
    top = dirac_propagator(spec, 8, source_state=1)
    bottom = dirac_propagator(spec, 8, source_state=3)
    for a, b in zip(top.slices, bottom.slices):
        np.testing.assert_array_equal(a.phi1, b.phi3)
        np.testing.assert_array_equal(a.phi2, b.phi4)
        assert np.all(b.phi1 == 0) and np.all(b.phi2 == 0)


def test_two_step_propagator_table():
    # Hand expansion of two steps from a channel-1 delta at p = 0.1.
    spec = spec_with(0.1, n_steps=4, extent=6.0)
    frame = dirac_propagator(spec, 2, source_state=1)[2]
    o = spec.origin_index
    expected = {
        ("phi1", o + 2): 0.81,
        ("phi1", o): -0.01,
        ("phi2", o): 0.09,
        ("phi2", o - 2): 0.09,
    }
    for (name, site), value in expected.items():
        assert getattr(frame, name)[site] == pytest.approx(value, abs=1e-15)
    assert np.count_nonzero(frame.stack()) == len(expected)


def quadratic_drift(p, n_steps):
    spec = make_lattice(dz=1.0 / n_steps, dt=1.0 / n_steps, c=1.0, a=p * n_steps,
                        z_extent=2.0, n_steps=2 * n_steps)
    width = 0.2
    prof = np.exp(-0.5 * (spec.z_coords() / width) ** 2)
    init = FourField(prof, np.zeros_like(prof), np.zeros_like(prof),
                     np.zeros_like(prof))
    evo = evolve_dirac(init, spec, n_steps, EvolutionMode.RENORMALIZED)
    norms = [float((f.phi1 ** 2 + f.phi2 ** 2).sum() * spec.dz) for f in evo.slices]
    return abs(norms[-1] - norms[0])


def test_renormalized_quadratic_norm_drift_is_first_order():
    # Halving dt (with a, c, t fixed) should roughly halve the drift.
    coarse = quadratic_drift(p=0.02, n_steps=50)
    fine = quadratic_drift(p=0.01, n_steps=100)
    assert 1.5 <= coarse / fine <= 2.5
