import numpy as np
import pytest

from voroflow import flowmap
from voroflow import geometry as geo
from voroflow import operators as ops_mod

from conftest import BOX, all_fluid_diagram, lattice_points


def _affine_neighbors(A, x_init_i, offsets):
    """(x_init_j, x_now_j) pairs for the forward map x_now = A x_init."""
    x_init_j = x_init_i + offsets
    return list(zip(x_init_j, x_init_j @ A.T))


@pytest.mark.parametrize("A", [
    np.array([[np.cos(0.3), -np.sin(0.3)], [np.sin(0.3), np.cos(0.3)]]),
    np.diag([1.7, 0.6]),
    np.array([[1.0, 0.4], [0.0, 1.0]]),
    np.array([[1.2, 0.3], [-0.2, 0.9]]),
])
def test_affine_jacobian_recovery(A):
    # [DERIVED] backward Jacobian of x_now = A x_init is A^-1, exactly
    x_init_i = np.array([0.3, 0.7])
    offsets = np.array([[0.05, 0.0], [0.0, 0.05], [-0.04, 0.03], [0.02, -0.05]])
    nbrs = _affine_neighbors(A, x_init_i, offsets)
    T = flowmap.estimate_jacobian(x_init_i, x_init_i @ A.T, nbrs)
    assert np.max(np.abs(T - np.linalg.inv(A))) < 1e-10


def test_rank_deficient_raises():
    x = np.array([0.5, 0.5])
    with pytest.raises(flowmap.RankDeficient):
        flowmap.estimate_jacobian(x, x, [(x + [0.1, 0], x + [0.1, 0]),
                                         (x + [0.2, 0], x + [0.2, 0])])
    collinear = [(x + [d, 0.0], x + [d, 0.0]) for d in (0.1, 0.2, 0.3, 0.4)]
    with pytest.raises(flowmap.RankDeficient):
        flowmap.estimate_jacobian(x, x, collinear)


def test_update_jacobians_on_lattice():
    pts, h = lattice_points(8)
    dia = all_fluid_diagram(pts, spacing=h)
    fops = ops_mod.build_fluid_operators(dia)
    state = flowmap.make_state(pts, np.zeros_like(pts))
    A = np.array([[1.1, 0.2], [-0.1, 0.95]])
    x_now = pts @ A.T
    bad = flowmap.update_jacobians(state, x_now, fops.nbr_off, fops.nbr_idx)
    # corner cells have only 2 neighbors and are flagged by design
    corners = np.diff(fops.nbr_off) < 3
    assert np.array_equal(bad, corners)
    assert np.max(np.abs(state.T[~bad] - np.linalg.inv(A))) < 1e-10


def test_update_jacobians_flags_degenerate_and_keeps_previous():
    pts, h = lattice_points(8)
    dia = all_fluid_diagram(pts, spacing=h)
    fops = ops_mod.build_fluid_operators(dia)
    state = flowmap.make_state(pts, np.zeros_like(pts))
    state.T[:] = 2.0 * np.eye(2)
    # collapse every neighborhood of cell 0 onto a line
    x_now = pts.copy()
    nbrs = fops.nbr_idx[fops.nbr_off[0]:fops.nbr_off[1]]
    x_now[nbrs, 1] = x_now[0, 1]
    x_now[nbrs, 0] = x_now[0, 0] + 1e-14 * (1 + np.arange(len(nbrs)))
    bad = flowmap.update_jacobians(state, x_now, fops.nbr_off, fops.nbr_idx)
    assert bad[0]
    assert np.allclose(state.T[0], 2.0 * np.eye(2))


def test_map_velocity_is_covector_pullback(rng):
    n = 5
    state = flowmap.make_state(rng.random((n, 2)), rng.standard_normal((n, 2)))
    T = rng.standard_normal((n, 2, 2))
    state.T = T
    g = rng.standard_normal((n, 2))
    state.gravity_acc = g
    u_M = flowmap.map_velocity(state)
    for i in range(n):
        assert np.allclose(u_M[i], T[i].T @ state.u_init[i] + g[i], atol=1e-14)


def test_rotation_preserves_speed(rng):
    # a pure rotation is orthogonal, so the covector pullback keeps |u|
    th = 0.4
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    state = flowmap.make_state(rng.random((4, 2)), rng.standard_normal((4, 2)))
    state.T = np.tile(np.linalg.inv(R), (4, 1, 1))
    u_M = flowmap.map_velocity(state)
    assert np.allclose(np.linalg.norm(u_M, axis=1),
                       np.linalg.norm(state.u_init, axis=1), atol=1e-13)


def test_evolve_jacobians_first_order():
    state = flowmap.make_state(np.zeros((1, 2)), np.zeros((1, 2)))
    grad_u = np.array([[[0.2, -0.1], [0.3, 0.05]]])
    flowmap.evolve_jacobians(state, grad_u, 0.01)
    assert np.allclose(state.T[0], np.eye(2) - 0.01 * grad_u[0], atol=1e-15)


def test_fusion_identity_arithmetic(rng):
    u_M = rng.standard_normal((6, 2))
    gL = rng.standard_normal((6, 2))
    gK = rng.standard_normal((6, 2))
    out = flowmap.fuse_to_advected(u_M, gL, gK, 0.01)
    assert np.allclose(out, u_M - gL + 0.01 * gK, atol=1e-15)


def test_accumulate_lambda(rng):
    n = 4
    state = flowmap.make_state(rng.random((n, 2)), np.zeros((n, 2)))
    p = rng.standard_normal(n)
    u = rng.standard_normal((n, 2))
    flowmap.accumulate_lambda(state, p, u, 0.02)
    expect = (p - 0.5 * np.sum(u * u, axis=1)) * 0.02
    assert np.allclose(state.lambda_acc, expect, atol=1e-15)


def test_reinitialize_clears_everything(rng):
    n = 6
    state = flowmap.make_state(rng.random((n, 2)), rng.standard_normal((n, 2)))
    state.lambda_acc[:] = 1.0
    state.gravity_acc[:] = 2.0
    state.near_surface[:] = True
    state.force_reinit[:] = True
    state.since_reinit = 7
    x = rng.random((n, 2))
    u = rng.standard_normal((n, 2))
    flowmap.reinitialize(state, x, u)
    assert np.array_equal(state.x_init, x)
    assert np.array_equal(state.u_init, u)
    assert np.allclose(state.T, np.eye(2))
    assert not state.lambda_acc.any()
    assert not state.gravity_acc.any()
    assert not state.near_surface.any()
    assert not state.force_reinit.any()
    assert state.since_reinit == 0


def _pool_diagram():
    pts, h = lattice_points(10)
    kinds = np.zeros(pts.shape[0], dtype=np.int8)
    kinds[pts[:, 1] > 0.6] = geo.AIR
    dia = geo.build_diagram(pts, kinds, BOX, spacing=h)
    fops = ops_mod.build_fluid_operators(dia)
    return dia, fops, pts[kinds == geo.FLUID]


def test_flag_near_surface_layers():
    dia, fops, x_f = _pool_diagram()
    state = flowmap.make_state(x_f, np.zeros_like(x_f))
    flags0 = flowmap.flag_near_surface(state, dia, fops, k=0).copy()
    # layer 0 is exactly the top fluid row
    top = x_f[:, 1] > 0.5
    assert np.array_equal(flags0, top)
    flowmap.reinitialize(state, x_f, np.zeros_like(x_f))
    flags1 = flowmap.flag_near_surface(state, dia, fops, k=1)
    assert np.all(flags1[flags0])
    assert flags1.sum() > flags0.sum()


def test_flag_near_surface_sticky():
    dia, fops, x_f = _pool_diagram()
    state = flowmap.make_state(x_f, np.zeros_like(x_f))
    state.near_surface[0] = True
    flags = flowmap.flag_near_surface(state, dia, fops, k=0, sticky=True)
    assert flags[0]
    flags = flowmap.flag_near_surface(state, dia, fops, k=0, sticky=False)
    assert not flags[0]
