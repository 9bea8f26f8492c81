"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion with the measured values; every tolerance is pinned here.
"""

import json
import time

import numpy as np
import pytest

from diracwalk import cli
from diracwalk.analysis import compare_grids, residual_convergence
from diracwalk.dirac import (
    SIGMA_Q,
    DiracAlgebra,
    EvolutionMode,
    dirac_propagator,
    evolve_dirac,
    step_entwined,
)
from diracwalk.entwined import TURN_FIRST, run_ensemble
from diracwalk.kac import evolve_kac, kac_density_estimate
from diracwalk.lattice import FourField, TwoField, delta_init_four, delta_init_two, make_lattice

from oracles import enumerate_kac, signed_path_sum


def report(num, detail):
    print(f"\n[criterion {num:2d}] PASS  {detail}")


def test_criterion_01_kac_conservation():
    # 512-interval grid (513 sites), p = 0.1, 1000 steps: total mass drift
    # below 1e-10, in under a second.
    t0 = time.time()
    spec = make_lattice(dz=1.0, dt=1.0, c=1.0, a=0.1, z_extent=256.0,
                        n_steps=1000, enforce_light_cone=False)
    rng = np.random.default_rng(2024)
    field = TwoField(f_plus=rng.random(spec.n_sites),
                     f_minus=rng.random(spec.n_sites))
    initial = field.total_mass()
    history = evolve_kac(field, spec, 1000)
    drift = abs(history[-1].total_mass() - initial)
    elapsed = time.time() - t0
    assert drift < 1e-10
    assert elapsed < 1.0
    report(1, f"mass drift {drift:.2e} over 1000 steps ({elapsed:.2f}s)")


def test_criterion_02_brute_force_oracles():
    # Exhaustive path enumeration reproduces both difference schemes to
    # 1e-12 for n <= 12 and p in {0.1, 0.5}.
    t0 = time.time()
    for p in (0.1, 0.5):
        spec = make_lattice(dz=1.0, dt=1.0, c=1.0, a=p, z_extent=14.0,
                            n_steps=12)
        history = evolve_kac(delta_init_two(spec, spec.origin_index, +1),
                             spec, 12)
        exact = enumerate_kac(spec, 12, spec.origin_index, +1)
        for k, frame in enumerate(history):
            np.testing.assert_allclose(frame.stack(),
                                       exact[:, :, k], atol=1e-12)
        evo = evolve_dirac(delta_init_four(spec, spec.origin_index, 1),
                           spec, 12)
        for k in (3, 8, 12):
            np.testing.assert_allclose(
                evo[k].stack(),
                signed_path_sum(spec, k, 1, spec.origin_index),
                atol=1e-12,
            )
    elapsed = time.time() - t0
    assert elapsed < 10.0
    report(2, f"two-channel and four-state schemes match enumeration to 1e-12 "
              f"({elapsed:.2f}s)")


def _convergence(kind):
    t0 = time.time()
    spec = make_lattice(dz=0.02, dt=0.02, c=1.0, a=1.0, z_extent=4.0,
                        n_steps=100)
    rep = residual_convergence(kind, spec, t_final=2.0, init_width=0.16)
    elapsed = time.time() - t0
    assert 1.5 <= rep.convergence_ratio <= 2.5
    assert elapsed < 5.0
    return rep.convergence_ratio, elapsed


def test_criterion_03_telegraph_limit():
    ratio, elapsed = _convergence("telegraph")
    report(3, f"telegraph residual halving ratio {ratio:.3f} ({elapsed:.2f}s)")


def test_criterion_04_dirac_limit():
    ratio, elapsed = _convergence("dirac")
    report(4, f"dirac residual halving ratio {ratio:.3f} ({elapsed:.2f}s)")


def test_criterion_05_klein_gordon_consistency():
    ratio, elapsed = _convergence("klein_gordon")
    report(5, f"klein-gordon residual halving ratio {ratio:.3f} ({elapsed:.2f}s)")


def test_criterion_06_algebra_identities():
    alg = DiracAlgebra()
    assert np.array_equal(SIGMA_Q @ SIGMA_Q, -np.eye(2, dtype=np.int64))
    assert np.array_equal(alg.alpha_z @ alg.alpha_z, np.eye(4))
    assert np.allclose(alg.beta @ alg.beta, np.eye(4))
    spec = make_lattice(dz=1.0, dt=1.0, c=1.0, a=0.5, z_extent=6.0, n_steps=6)
    rng = np.random.default_rng(1)
    top = FourField(rng.normal(size=spec.n_sites), rng.normal(size=spec.n_sites),
                    np.zeros(spec.n_sites), np.zeros(spec.n_sites))
    f = top
    for _ in range(6):
        f = step_entwined(f, spec)
        assert np.all(f.phi3 == 0) and np.all(f.phi4 == 0)
    report(6, "sigma_q^2 = -1, alpha_z^2 = beta^2 = 1, blocks decouple (exact)")


def test_criterion_07_monte_carlo_kac_convergence():
    t0 = time.time()
    n_paths, n = 100_000, 20
    spec = make_lattice(dz=1.0, dt=1.0, c=1.0, a=0.1, z_extent=24.0, n_steps=n)
    est = kac_density_estimate(42, n_paths, spec, n)
    exact = evolve_kac(delta_init_two(spec, spec.origin_index, +1), spec, n)
    bound = 5.0 / np.sqrt(n_paths)
    worst = max(
        float(np.abs(emp.stack() - ref.stack()).max())
        for emp, ref in zip(est, exact)
    )
    elapsed = time.time() - t0
    assert worst <= bound
    assert elapsed < 10.0
    report(7, f"sup-norm distance {worst:.5f} <= {bound:.5f} on every slice "
              f"({elapsed:.2f}s)")


def test_criterion_08_entwined_slice_neutrality():
    t0 = time.time()
    spec = make_lattice(dz=1.0, dt=1.0, c=1.0, a=0.25, z_extent=30.0,
                        n_steps=30)
    grid = run_ensemble(seed=11, n_pairs=10_000, spec=spec, t_r=8.0)
    slice_sums = grid.counts.sum(axis=(0, 1))
    elapsed = time.time() - t0
    assert np.all(slice_sums == 0)
    assert elapsed < 5.0
    report(8, f"all {grid.shape[2]} slices exactly neutral over 10^4 pairs "
              f"({elapsed:.2f}s)")


def test_criterion_09_figure_reproduction():
    # c = 1, a = m = 1, dt = 0.25 so lattice step 15 is physical t = 3.75;
    # 10^6 accepted pairs against the channel-1 propagator under the
    # documented convention: leading-turn stutter, identity channel map,
    # comparison scalar = channel 1 + channel 2.
    t0 = time.time()
    spec = make_lattice(dz=0.25, dt=0.25, c=1.0, a=1.0, z_extent=15.0,
                        n_steps=60)
    t_slice = 15
    grid = run_ensemble(seed=99, n_pairs=1_000_000, spec=spec,
                        t_r=t_slice * spec.dt, stutter_phase=TURN_FIRST,
                        workers=2)
    reference = dirac_propagator(spec, t_slice, source_state=1,
                                 mode=EvolutionMode.RAW)
    rep = compare_grids(grid, reference, region="half-cone",
                        channel_map=None, components=(1, 2))
    elapsed = time.time() - t0
    assert rep.correlation > 0.9
    assert rep.spearman_error_vs_z > 0.0
    assert elapsed < 600.0
    report(9, f"correlation {rep.correlation:.4f} > 0.9 on |z| <= t/2, "
              f"error-vs-|z| spearman {rep.spearman_error_vs_z:.2f} > 0, "
              f"{grid.n_rejected} rejected draws ({elapsed:.1f}s)")


def test_criterion_10_worker_determinism(tmp_path):
    args = ["entwined-sample", "--dz", "0.25", "--dt", "0.25", "--a", "1",
            "--extent", "15", "--steps", "60", "--seed", "31337",
            "--pairs", "20000", "--t-reversal", "3.75",
            "--stutter-phase", "turn-first"]
    outs = []
    for name, workers in (("one.csv", "1"), ("eight.csv", "8")):
        out = tmp_path / name
        assert cli.main(args + ["--workers", workers, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
        meta = json.loads((tmp_path / f"{name}.meta.json").read_text())
        assert meta["n_pairs"] == 20000
    assert outs[0] == outs[1]
    report(10, "entwined-sample with 1 vs 8 workers is byte-identical")
