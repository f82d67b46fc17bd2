"""Acceptance criteria, one test per criterion.

Each test prints a single PASS line with the measured numbers; shared
simulation runs are cached in session fixtures. Criterion 5 (the projection
contract) is checked against every step of every run executed here.
"""

import time

import numpy as np
import pytest

from voroflow import cli
from voroflow import config
from voroflow import diagnostics as diag
from voroflow import flowmap
from voroflow import geometry as geo
from voroflow import operators as ops_mod
from voroflow import poisson
from voroflow import stepper

from conftest import BOX, all_fluid_diagram, lattice_points, random_points

# (scene, mode, step, max_abs_divergence, velocity_scale, spacing)
DIV_RECORDS = []


def _run_sim(scene, mode, steps, probe=None, probe_every=0, **overrides):
    cfg = config.default_config(scene, mode=mode, steps=steps,
                                timing=False, **overrides)
    state = stepper.init_state(cfg)
    energies = [diag.kinetic_energy(state.fops.Vf, state.u_f)]
    probes = {}
    for k in range(1, steps + 1):
        stats = stepper.step(state, cfg.dt)
        energies.append(stats.kinetic_energy)
        DIV_RECORDS.append((scene, mode, k, stats.max_abs_divergence,
                            stats.velocity_scale, cfg.spacing))
        if probe is not None and probe_every and k % probe_every == 0:
            probes[k] = probe(state)
    return state, np.array(energies), probes


@pytest.fixture(scope="session")
def taylor_green_runs():
    out = {}
    for mode in ("base", "baseline"):
        _, energies, _ = _run_sim("taylor_green", mode, 500)
        out[mode] = energies
    return out


@pytest.fixture(scope="session")
def vortex_pair_runs():
    def extrema_distance(state):
        omega = diag.compute_vorticity(state.fops, state.u_f)
        pos, mag = diag.vorticity_extrema(state.fops, state.x_f, omega, 0.5)
        pos, mag = diag.cluster_extrema(pos, mag, 3 * state.cfg.spacing)
        if pos.shape[0] < 2:
            return 0.0
        return float(np.linalg.norm(pos[0] - pos[1]))

    out = {}
    for mode in ("base", "baseline"):
        _, _, probes = _run_sim("taylor_vortex_pair", mode, 300,
                                probe=extrema_distance, probe_every=300)
        out[mode] = probes[300]
    return out


@pytest.fixture(scope="session")
def leapfrog_runs():
    def count(state):
        return diag.count_vortices(state.fops, state.x_f, state.u_f)

    out = {}
    for mode in ("base", "baseline"):
        _, _, probes = _run_sim("leapfrog", mode, 500,
                                probe=count, probe_every=10)
        out[mode] = probes
    return out


@pytest.fixture(scope="session")
def droplet_runs():
    out = {}
    for label, naive in (("treated", False), ("naive", True)):
        try:
            state, energies, _ = _run_sim("droplet_pool", "boundary", 500,
                                          naive_boundary=naive)
            in_domain = (
                np.all(state.x_f[:, 0] > state.box[0])
                and np.all(state.x_f[:, 0] < state.box[2])
                and np.all(state.x_f[:, 1] > state.box[1])
                and np.all(state.x_f[:, 1] < state.box[3])
            )
            out[label] = {"energies": energies, "in_domain": in_domain,
                          "failed": False}
        except poisson.SolverFailure:
            out[label] = {"energies": np.array([np.nan]), "in_domain": False,
                          "failed": True}
    return out


def test_criterion_01_operator_adjointness():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(100, 2001))
        dia = all_fluid_diagram(random_points(rng, n))
        ops = ops_mod.build_operators(dia)
        v = rng.standard_normal((n, 2))
        p = rng.standard_normal(n)
        lhs = float(ops_mod.apply_divergence(ops, v) @ p)
        rhs = float(v.ravel() @ (ops.G @ p))
        rel = abs(lhs + rhs) / (abs(lhs) + abs(rhs) + 1e-30)
        worst = max(worst, rel)
    elapsed = time.perf_counter() - t0
    assert worst < 1e-10
    assert elapsed < 10.0
    print(f"criterion 1 PASS: adjointness worst rel {worst:.2e} "
          f"on 50 sets in {elapsed:.1f}s")


def test_criterion_02_laplacian_psd_and_nullspace():
    rng = np.random.default_rng(11)
    worst_quad = 0.0
    worst_null = 0.0
    for n in (150, 400):
        dia = all_fluid_diagram(random_points(rng, n))
        L = ops_mod.assemble_laplacian(ops_mod.build_operators(dia))
        worst_null = max(worst_null, float(np.max(np.abs(L @ np.ones(n)))))
        for _ in range(50):
            z = rng.standard_normal(n)
            q = float(z @ (-(L @ z))) / float(z @ z)
            worst_quad = min(worst_quad, q)
    assert worst_quad >= -1e-12
    assert worst_null < 1e-10
    print(f"criterion 2 PASS: min z(-L)z/|z|^2 = {worst_quad:.2e}, "
          f"max |L.1| = {worst_null:.2e}")


def test_criterion_03_affine_operator_exactness():
    pts, h = lattice_points(32)
    dia = all_fluid_diagram(pts, spacing=h)
    ops = ops_mod.build_operators(dia)
    interior = ((pts[:, 0] > 1.5 * h) & (pts[:, 0] < 1 - 1.5 * h)
                & (pts[:, 1] > 1.5 * h) & (pts[:, 1] < 1 - 1.5 * h))
    grad = ops_mod.apply_gradient(ops, pts[:, 0]) / ops.Vdiag[:, None]
    err_g = float(np.max(np.abs(grad[interior] - [1.0, 0.0])))
    div = ops_mod.apply_divergence(ops, pts) / ops.Vdiag
    err_d = float(np.max(np.abs(div[interior] - 2.0)))
    assert err_g < 1e-10 and err_d < 1e-10
    print(f"criterion 3 PASS: affine gradient err {err_g:.2e}, "
          f"divergence err {err_d:.2e}")


def test_criterion_04_affine_jacobian_recovery():
    th = 0.35
    maps = {
        "rotation": np.array([[np.cos(th), -np.sin(th)],
                              [np.sin(th), np.cos(th)]]),
        "scaling": np.diag([1.4, 0.7]),
        "shear": np.array([[1.0, 0.5], [0.0, 1.0]]),
    }
    x_i = np.array([0.4, 0.6])
    offsets = np.array([[0.05, 0.0], [0.0, 0.05], [-0.03, 0.04]])
    worst = 0.0
    for name, A in maps.items():
        nbrs = [(x_i + d, (x_i + d) @ A.T) for d in offsets]
        T = flowmap.estimate_jacobian(x_i, x_i @ A.T, nbrs)
        worst = max(worst, float(np.max(np.abs(T - np.linalg.inv(A)))))
    assert worst < 1e-10
    print(f"criterion 4 PASS: rotation/scaling/shear recovered, "
          f"worst err {worst:.2e}")


def test_criterion_05_projection_contract(taylor_green_runs, vortex_pair_runs,
                                          leapfrog_runs, droplet_runs):
    assert DIV_RECORDS, "no benchmark steps recorded"
    worst = 0.0
    for scene, mode, k, max_div, scale, h in DIV_RECORDS:
        bound = 1e-6 * max(scale, 1e-12) / h
        ratio = max_div / bound
        assert max_div <= bound, (
            f"{scene}/{mode} step {k}: div {max_div:.3e} > bound {bound:.3e}")
        worst = max(worst, ratio)
    print(f"criterion 5 PASS: {len(DIV_RECORDS)} benchmark steps, "
          f"worst div/bound ratio {worst:.3f}")


def test_criterion_06_warm_start_proposition():
    cfg = config.default_config("taylor_green", timing=False)
    state = stepper.init_state(cfg)
    t0 = time.perf_counter()
    iters = []
    for _ in range(100):
        _, agree, iw, iz = stepper.step_base_instrumented(state, cfg.dt)
        assert agree
        assert iw <= iz
        iters.append((iw, iz))
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0
    saved = np.mean([iz - iw for iw, iz in iters])
    print(f"criterion 6 PASS: 100 steps agree, warm <= zero every step, "
          f"mean iters saved {saved:.1f}, {elapsed:.1f}s")


def test_criterion_07_energy_ordering(taylor_green_runs):
    e_cov = taylor_green_runs["base"]
    e_bas = taylor_green_runs["baseline"]
    r_cov = e_cov[500] / e_cov[0]
    r_bas = e_bas[500] / e_bas[0]
    assert r_cov >= r_bas + 0.05
    print(f"criterion 7 PASS: E(500)/E(0) covector {r_cov:.4f} vs "
          f"baseline {r_bas:.4f} (gap {r_cov - r_bas:.4f} >= 0.05)")


def test_criterion_08_vortex_pair_separation(vortex_pair_runs):
    d_cov = vortex_pair_runs["base"]
    d_bas = vortex_pair_runs["baseline"]
    assert d_cov >= 1.2 * d_bas
    print(f"criterion 8 PASS: extrema distance at step 300 covector "
          f"{d_cov:.3f} vs baseline {d_bas:.3f} ({d_cov / d_bas:.2f}x)")


def test_criterion_09_leapfrog_longevity(leapfrog_runs):
    def first_drop(probes, horizon):
        for k in sorted(probes):
            if probes[k] < 4:
                return k
        return horizon + 1

    drop_cov = first_drop(leapfrog_runs["base"], 500)
    drop_bas = first_drop(leapfrog_runs["baseline"], 500)
    assert drop_cov > drop_bas
    print(f"criterion 9 PASS: vortex count first below 4 at step "
          f"{drop_cov} (covector, >500 means never) vs {drop_bas} (baseline)")


def test_criterion_10_free_surface_ablation(droplet_runs):
    treated = droplet_runs["treated"]
    naive = droplet_runs["naive"]
    e_t = treated["energies"]
    assert not treated["failed"]
    assert np.all(np.isfinite(e_t))
    assert treated["in_domain"]
    e0 = e_t[0]
    assert np.max(e_t) <= 2.0 * e0
    e_n = naive["energies"]
    diverged = (naive["failed"] or np.any(~np.isfinite(e_n))
                or np.max(e_n) > 2.0 * e0)
    assert diverged
    print(f"criterion 10 PASS: treated max E/E0 "
          f"{np.max(e_t) / e0:.2f} <= 2, naive "
          f"{'failed/NaN' if (naive['failed'] or np.any(~np.isfinite(e_n))) else f'max E/E0 {np.max(e_n) / e0:.2f} > 2'}")


def test_criterion_11_hydrostatic_equilibrium():
    cfg = config.default_config("hydrostatic_pool", timing=False)
    state = stepper.init_state(cfg)
    bound = 1e-3 * np.sqrt(9.81 * cfg.pool_height)
    worst = 0.0
    for k in range(1, 101):
        stats = stepper.step(state, cfg.dt)
        DIV_RECORDS.append(("hydrostatic_pool", "boundary", k,
                            stats.max_abs_divergence, stats.velocity_scale,
                            cfg.spacing))
        speed = float(np.max(np.hypot(state.u_f[:, 0], state.u_f[:, 1])))
        worst = max(worst, speed)
        assert speed < bound
    print(f"criterion 11 PASS: max speed {worst:.2e} < {bound:.2e} "
          f"over 100 steps")


def test_criterion_12_determinism(tmp_path):
    text = ("scene = droplet_pool\nspacing = 0.05\nsteps = 20\n"
            "timing = 0\n")
    digests = []
    for tag in ("r1", "r2"):
        cfgfile = tmp_path / f"{tag}.cfg"
        cfgfile.write_text(text + f"out = {tmp_path / tag}\n")
        assert cli.main(["--config", str(cfgfile)]) == 0
        digests.append((tmp_path / tag / "energy.csv").read_bytes())
    assert digests[0] == digests[1]
    print("criterion 12 PASS: repeated run energy.csv bit-identical "
          f"({len(digests[0])} bytes)")
